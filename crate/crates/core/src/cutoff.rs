//! The smooth cutoff `F(λ≤1)` splitting `1/|y|` into a singular part
//! supported in `|y| ≤ s^β` and a regular remainder, with its constants.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::quadrature::{integrate_adaptive, GaussLegendre, NeumaierSum};

/// Minimum number of table cells on `(1/2, 1)`.
pub const MIN_RESOLUTION: usize = 10_000;
/// Scan resolution for the suprema.
pub const SCAN_POINTS: usize = 1_000_000;

/// Closed-form constants as stated for the cutoff.
pub fn stated_c0_bound() -> f64 {
    4.0 * (32.0f64 / 3.0).exp()
}

pub fn stated_cf1_bound() -> f64 {
    8.0 * (26.0f64 / 3.0).exp()
}

pub fn stated_cf2_bound() -> f64 {
    1.0 + stated_c0_bound()
}

/// `e^{-1/((λ-1/2)(1-λ))}` on `(1/2, 1)`, zero elsewhere.
pub fn bump(lambda: f64) -> f64 {
    if lambda <= 0.5 || lambda >= 1.0 {
        return 0.0;
    }
    (-1.0 / ((lambda - 0.5) * (1.0 - lambda))).exp()
}

/// `F(λ≤1) = C₀ ∫_λ^1 bump` and `F(λ>1) = 1 − F(λ≤1)`, tabulated by
/// cumulative integrals on a uniform grid of `(1/2, 1)`.
#[derive(Debug, Clone)]
pub struct CutoffProfile {
    c0: f64,
    integral: f64,
    knots: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rule: GaussLegendre,
}

/// Dense samples of the profile and its derivatives.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CutoffTables {
    pub lambda: Vec<f64>,
    pub f_le: Vec<f64>,
    pub f_gt: Vec<f64>,
    pub d1_gt: Vec<f64>,
    pub d2_gt: Vec<f64>,
}

impl CutoffProfile {
    pub fn build(resolution: usize) -> Result<Self> {
        if resolution < MIN_RESOLUTION {
            return Err(invalid(format!("cutoff resolution {resolution} < {MIN_RESOLUTION}")));
        }
        let integral = integrate_adaptive(bump, 0.5, 1.0, 1e-14, 0.0)?.value;
        let rule = GaussLegendre::new(20)?;
        let knots: Vec<f64> = (0..=resolution).map(|i| 0.5 + 0.5 * i as f64 / resolution as f64).collect();
        let cells: Vec<f64> = knots.windows(2).map(|w| rule.integrate(bump, w[0], w[1])).collect();
        let mut lower = Vec::with_capacity(resolution + 1);
        let mut acc = NeumaierSum::new();
        lower.push(0.0);
        for c in &cells {
            acc.add(*c);
            lower.push(acc.value());
        }
        let mut upper = vec![0.0; resolution + 1];
        let mut acc = NeumaierSum::new();
        for i in (0..resolution).rev() {
            acc.add(cells[i]);
            upper[i] = acc.value();
        }
        Ok(Self { c0: 1.0 / integral, integral, knots, lower, upper, rule })
    }

    /// `C₀ = (∫_{1/2}^1 bump)^{-1}`.
    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn bump_integral(&self) -> f64 {
        self.integral
    }

    /// Integral of the bump over `(1/2, 1)` accumulated from the table cells.
    pub fn tabulated_integral(&self) -> f64 {
        self.lower[self.lower.len() - 1]
    }

    pub fn resolution(&self) -> usize {
        self.knots.len() - 1
    }

    /// `(F(λ≤1), F(λ>1))`. The smaller value is integrated directly and the
    /// other is its complement.
    pub fn split(&self, lambda: f64) -> (f64, f64) {
        if lambda <= 0.5 {
            return (1.0, 0.0);
        }
        if lambda >= 1.0 {
            return (0.0, 1.0);
        }
        let n = self.resolution();
        let i = (((lambda - 0.5) * 2.0 * n as f64) as usize).min(n - 1);
        if lambda <= 0.75 {
            let part = self.lower[i] + self.rule.integrate(bump, self.knots[i], lambda);
            let gt = self.c0 * part;
            (1.0 - gt, gt)
        } else {
            let part = self.upper[i + 1] + self.rule.integrate(bump, lambda, self.knots[i + 1]);
            let le = self.c0 * part;
            (le, 1.0 - le)
        }
    }

    pub fn f_le(&self, lambda: f64) -> f64 {
        self.split(lambda).0
    }

    pub fn f_gt(&self, lambda: f64) -> f64 {
        self.split(lambda).1
    }

    /// `F'(λ>1) = C₀ bump(λ)`.
    pub fn d1_gt(&self, lambda: f64) -> f64 {
        self.c0 * bump(lambda)
    }

    /// `F''(λ>1) = C₀ bump(λ) (3/2 − 2λ) / ((λ−1/2)(1−λ))²`.
    pub fn d2_gt(&self, lambda: f64) -> f64 {
        if lambda <= 0.5 || lambda >= 1.0 {
            return 0.0;
        }
        let g = (lambda - 0.5) * (1.0 - lambda);
        let b = bump(lambda);
        if b == 0.0 {
            return 0.0;
        }
        self.c0 * b * (1.5 - 2.0 * lambda) / (g * g)
    }

    /// Samples on `points` equally spaced values spanning `[0, 3/2]`.
    pub fn tables(&self, points: usize) -> CutoffTables {
        let lambda: Vec<f64> = (0..points).map(|i| 1.5 * i as f64 / (points.max(2) - 1) as f64).collect();
        let (f_le, f_gt) = lambda.iter().map(|&l| self.split(l)).unzip();
        CutoffTables {
            d1_gt: lambda.iter().map(|&l| self.d1_gt(l)).collect(),
            d2_gt: lambda.iter().map(|&l| self.d2_gt(l)).collect(),
            lambda,
            f_le,
            f_gt,
        }
    }

    /// `v_sin(y) = F(|y|/S ≤ 1)/|y|` with `S = s^β`.
    pub fn v_sin(&self, r: f64, scale: f64) -> f64 {
        self.f_le(r / scale) / r
    }

    /// `v_reg(y) = F(|y|/S > 1)/|y|`.
    pub fn v_reg(&self, r: f64, scale: f64) -> f64 {
        self.f_gt(r / scale) / r
    }
}

/// Suprema over `λ` with their locations and the certification flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffConstants {
    pub c0: f64,
    /// `sup λ² |F''(λ>1)|`.
    pub c_f1: f64,
    pub c_f1_at: f64,
    /// `sup |λ F'(λ>1) − F(λ>1)|`, including the value 1 taken for `λ ≥ 1`.
    pub c_f2: f64,
    pub c_f2_at: f64,
    pub c0_stated_bound: f64,
    pub c_f1_stated_bound: f64,
    pub c_f2_stated_bound: f64,
    pub c0_within_stated_bound: bool,
    pub c_f1_within_stated_bound: bool,
    pub c_f2_within_one_plus_c0: bool,
}

fn scan_sup<F: Fn(f64) -> f64>(f: F, points: usize) -> (f64, f64) {
    let h = 0.5 / points as f64;
    let mut best = (f64::NEG_INFINITY, 0.5);
    for j in 0..points {
        let l = 0.5 + (j as f64 + 0.5) * h;
        let v = f(l);
        if v > best.0 {
            best = (v, l);
        }
    }
    // Golden-section refinement around the best sample.
    let (mut a, mut b) = ((best.1 - h).max(0.5), (best.1 + h).min(1.0));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    for _ in 0..80 {
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - phi * (b - a);
        d = a + phi * (b - a);
    }
    let m = 0.5 * (a + b);
    let v = f(m);
    if v > best.0 {
        (v, m)
    } else {
        best
    }
}

/// Computes `C₀`, `C_F1`, `C_F2` by a dense scan with local refinement.
pub fn cutoff_constants(profile: &CutoffProfile) -> CutoffConstants {
    cutoff_constants_with(profile, SCAN_POINTS)
}

pub fn cutoff_constants_with(profile: &CutoffProfile, points: usize) -> CutoffConstants {
    let (c_f1, c_f1_at) = scan_sup(|l| l * l * profile.d2_gt(l).abs(), points);
    let (inner, inner_at) = scan_sup(|l| (l * profile.d1_gt(l) - profile.f_gt(l)).abs(), points);
    let (c_f2, c_f2_at) = if inner >= 1.0 { (inner, inner_at) } else { (1.0, 1.0) };
    let c0 = profile.c0();
    CutoffConstants {
        c0,
        c_f1,
        c_f1_at,
        c_f2,
        c_f2_at,
        c0_stated_bound: stated_c0_bound(),
        c_f1_stated_bound: stated_cf1_bound(),
        c_f2_stated_bound: stated_cf2_bound(),
        c0_within_stated_bound: c0 <= stated_c0_bound(),
        c_f1_within_stated_bound: c_f1 <= stated_cf1_bound(),
        c_f2_within_one_plus_c0: c_f2 <= 1.0 + c0,
    }
}

/// `‖v_sin‖_{L²(ℝ³)} = (4π ∫_0^S F(r/S ≤ 1)² dr)^{1/2}` with `S = s^β`,
/// integrated in `r`.
pub fn vsin_l2_norm(profile: &CutoffProfile, s: f64, beta: f64) -> Result<f64> {
    if !(s > 0.0 && s.is_finite() && beta.is_finite()) {
        return Err(invalid("vsin_l2_norm needs s > 0 and finite beta"));
    }
    let scale = s.powf(beta);
    let tail = integrate_adaptive(|r| profile.f_le(r / scale).powi(2), 0.5 * scale, scale, 1e-13, 0.0)?;
    Ok((4.0 * PI * (0.5 * scale + tail.value)).sqrt())
}

/// Worst pointwise ratios of the regular-part derivatives to their bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VregAudit {
    pub samples: usize,
    /// `max |Δv_reg| |y|³ / C_F1` over samples with `|y| > S/2`.
    pub worst_laplacian_ratio: f64,
    pub worst_laplacian_at: f64,
    /// `max_j |∂_j v_reg| |y|² / C_F2`.
    pub worst_gradient_ratio: f64,
    pub worst_gradient_at: f64,
    /// Largest derivative magnitude seen where the bounds vanish (`|y| ≤ S/2`).
    pub inside_max: f64,
}

impl VregAudit {
    pub fn passed(&self) -> bool {
        self.worst_laplacian_ratio <= 1.0 && self.worst_gradient_ratio <= 1.0 && self.inside_max == 0.0
    }
}

/// Samples `y ∈ ℝ³` with `|y|/S` log-uniform on `[1/4, 4]` and compares the
/// chain-rule derivatives
/// `Δv_reg = λ² F''(λ>1) / |y|³`, `∂_j v_reg = (λF'(λ>1) − F(λ>1)) y_j/|y|³`
/// with `C_F1 χ/|y|³` and `C_F2 χ/|y|²`, `χ = 1_{|y| > S/2}`.
pub fn vreg_pointwise_bounds(
    profile: &CutoffProfile,
    c_f1: f64,
    c_f2: f64,
    s: f64,
    beta: f64,
    samples: usize,
    seed: u64,
) -> Result<VregAudit> {
    if !(s > 0.0 && s.is_finite()) || samples == 0 {
        return Err(invalid("vreg audit needs s > 0 and at least one sample"));
    }
    let scale = s.powf(beta);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = VregAudit {
        samples,
        worst_laplacian_ratio: 0.0,
        worst_laplacian_at: 0.0,
        worst_gradient_ratio: 0.0,
        worst_gradient_at: 0.0,
        inside_max: 0.0,
    };
    for _ in 0..samples {
        let lambda = 0.25 * 16f64.powf(rng.random::<f64>());
        let dir: [f64; 3] = loop {
            let v = [rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if n > 1e-3 && n <= 1.0 {
                break [v[0] / n, v[1] / n, v[2] / n];
            }
        };
        let r = lambda * scale;
        let lap = (lambda * lambda * profile.d2_gt(lambda)).abs() / r.powi(3);
        let radial = (lambda * profile.d1_gt(lambda) - profile.f_gt(lambda)).abs();
        let grad = dir.iter().map(|d| radial * d.abs() / (r * r)).fold(0.0, f64::max);
        if lambda <= 0.5 {
            out.inside_max = out.inside_max.max(lap).max(grad);
            continue;
        }
        let lr = lap * r.powi(3) / c_f1;
        let gr = grad * r * r / c_f2;
        if lr > out.worst_laplacian_ratio {
            out.worst_laplacian_ratio = lr;
            out.worst_laplacian_at = lambda;
        }
        if gr > out.worst_gradient_ratio {
            out.worst_gradient_ratio = gr;
            out.worst_gradient_at = lambda;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn profile() -> &'static CutoffProfile {
        static P: OnceLock<CutoffProfile> = OnceLock::new();
        P.get_or_init(|| CutoffProfile::build(20_000).unwrap())
    }

    #[test]
    fn c0_matches_high_precision_reference() {
        // 1/∫ from a 40-digit mpmath quadrature.
        let reference = 83_748_827.949_664_6;
        assert!(((profile().c0() - reference) / reference).abs() < 1e-12, "{}", profile().c0());
        let t = profile().tabulated_integral();
        assert!(((t - profile().bump_integral()) / t).abs() < 1e-12);
    }

    #[test]
    fn profile_takes_expected_values() {
        let p = profile();
        assert_eq!(p.f_le(0.5), 1.0);
        assert_eq!(p.f_le(1.0), 0.0);
        assert_eq!(p.f_le(0.2), 1.0);
        assert_eq!(p.f_gt(2.0), 1.0);
        assert!((p.f_le(0.75) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_coarse_resolution() {
        assert!(CutoffProfile::build(100).is_err());
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let p = profile();
        for l in [0.55, 0.6, 0.7, 0.75, 0.8, 0.9, 0.95] {
            let h = 1e-6;
            let fd1 = (p.f_gt(l + h) - p.f_gt(l - h)) / (2.0 * h);
            assert!((fd1 - p.d1_gt(l)).abs() < 1e-6 * p.d1_gt(l).abs().max(1.0), "{l}");
            let fd2 = (p.d1_gt(l + h) - p.d1_gt(l - h)) / (2.0 * h);
            assert!((fd2 - p.d2_gt(l)).abs() < 1e-5 * p.d2_gt(l).abs().max(1.0), "{l}");
        }
    }

    #[test]
    fn constants_and_flags() {
        let k = cutoff_constants(profile());
        assert!(k.c_f1 > 0.0 && k.c_f1_at > 0.5 && k.c_f1_at < 1.0);
        assert!(k.c_f1_within_stated_bound);
        assert!(k.c_f2_within_one_plus_c0);
        assert!(k.c_f2_at > 0.5 && k.c_f2_at < 1.0);
        // Values from an independent numpy scan at 2·10⁵ points.
        assert!((k.c_f1 - 86.188_105).abs() < 1e-4, "{}", k.c_f1);
        assert!((k.c_f2 - 6.568_516_739).abs() < 1e-6, "{}", k.c_f2);
        assert!(!k.c0_within_stated_bound);
    }

    #[test]
    fn vsin_norm_scales_and_is_bounded() {
        let p = profile();
        for s in [1.0, 0.25, 1.0 / 16.0, 1.0 / 64.0] {
            let v = vsin_l2_norm(p, s, 0.5).unwrap();
            assert!(v <= 2.0 * PI.sqrt() * s.powf(0.25));
        }
        let a = vsin_l2_norm(p, 1.0, 0.5).unwrap();
        let b = vsin_l2_norm(p, 1.0 / 16.0, 0.5).unwrap();
        assert!((a / b - 2.0).abs() < 1e-9);
        assert!(vsin_l2_norm(p, 0.0, 0.5).is_err());
    }

    #[test]
    fn vreg_laplacian_matches_finite_differences() {
        let p = profile();
        let scale = 0.5;
        for lambda in [0.6, 0.7, 0.8, 0.9] {
            let y = [lambda * scale * 0.6, lambda * scale * 0.8, 0.0];
            let v = |y: [f64; 3]| p.v_reg((y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt(), scale);
            let h = 1e-4 * scale;
            let mut lap = -6.0 * v(y);
            for a in 0..3 {
                let mut up = y;
                up[a] += h;
                let mut dn = y;
                dn[a] -= h;
                lap += v(up) + v(dn);
            }
            lap /= h * h;
            let r = lambda * scale;
            let formula = lambda * lambda * p.d2_gt(lambda) / r.powi(3);
            assert!((lap - formula).abs() < 1e-4 * formula.abs().max(1.0), "{lambda}: {lap} {formula}");
            let mut up = y;
            up[0] += h;
            let mut dn = y;
            dn[0] -= h;
            let grad = (v(up) - v(dn)) / (2.0 * h);
            let formula = (lambda * p.d1_gt(lambda) - p.f_gt(lambda)) * y[0] / r.powi(3);
            assert!((grad - formula).abs() < 1e-6 * formula.abs().max(1.0));
        }
    }

    #[test]
    fn vreg_audit_passes_with_certified_and_computed_constants() {
        let p = profile();
        let k = cutoff_constants(p);
        for s in [1.0, 0.1, 0.01] {
            let a = vreg_pointwise_bounds(p, stated_cf1_bound(), 1.0 + 4.0 * (32.0f64 / 3.0).exp(), s, 0.5, 20_000, 1).unwrap();
            assert!(a.passed() && a.worst_laplacian_ratio < 1.0);
            let b = vreg_pointwise_bounds(p, k.c_f1, k.c_f2, s, 0.5, 20_000, 1).unwrap();
            assert!(b.worst_laplacian_ratio <= 1.0 + 1e-9 && b.worst_gradient_ratio <= 1.0 + 1e-9);
            assert_eq!(b.inside_max, 0.0);
        }
    }

    proptest! {
        #[test]
        fn partition_of_unity(l in 0.0f64..1.5) {
            let (a, b) = profile().split(l);
            prop_assert!((a + b - 1.0).abs() <= f64::EPSILON);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn f_le_is_monotone(l in 0.5f64..1.0, d in 1e-6f64..0.1) {
            prop_assert!(profile().f_le(l) >= profile().f_le((l + d).min(1.0)));
        }

        #[test]
        fn profile_is_symmetric_about_three_quarters(d in 0.0f64..0.25) {
            let p = profile();
            prop_assert!((p.f_le(0.75 - d) + p.f_le(0.75 + d) - 1.0).abs() < 1e-12);
        }
    }
}
