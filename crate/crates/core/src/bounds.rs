//! Closed-form constants of the error bound and the bounds themselves.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cutoff::{stated_c0_bound, stated_cf1_bound, CutoffConstants};
use crate::error::{invalid, Result};
use crate::lab::{fit_order, FitOutcome};
use crate::operators::{h2_norm, DiscreteHamiltonian, PotentialKind};
use crate::quadrature::compensated_sum;
use crate::spectral::Wavefunction;

/// Sharp Hardy constant `‖ |x|^{-1} |p|^{-1} ‖` in three dimensions.
pub const C_HLS3: f64 = 2.0;

/// `C_F1` as certified in closed form, `8 e^{26/3}`.
pub fn certified_cf1() -> f64 {
    stated_cf1_bound()
}

/// `C_F2` as certified in closed form, `1 + 4 e^{32/3}`.
pub fn certified_cf2() -> f64 {
    1.0 + stated_c0_bound()
}

/// `C_N = 2 + 6 c₀ N^{3/2} + 8 c₀² N³`.
pub fn c_n(n: usize, c0: f64) -> f64 {
    let a = c0 * (n as f64).powf(1.5);
    2.0 + 6.0 * a + 8.0 * a * a
}

/// `C̃_F = (4√6/3) C_F1 + 48 C_F2 + 2`.
pub fn tilde_cf(c_f1: f64, c_f2: f64) -> f64 {
    4.0 * 6f64.sqrt() / 3.0 * c_f1 + 48.0 * c_f2 + 2.0
}

/// `C̃_N = (4/5) c₀ C̃_F ((N−1) N^{3/2} + (N−1) N^{1/2} (C_N − 1))`.
pub fn tilde_cn(n: usize, c0: f64, tilde_cf: f64) -> f64 {
    let nf = n as f64;
    let m = nf - 1.0;
    0.8 * c0 * tilde_cf * (m * nf.powf(1.5) + m * nf.sqrt() * (c_n(n, c0) - 1.0))
}

/// One-body H² growth constant `2 + 6|c| + 8c²`, so that
/// `‖e^{-isH}ψ‖_{H²} ≤ C₁ ‖ψ‖_{H²}` for `H = -Δ + c/|x|`.
pub fn one_body_growth(c: f64) -> f64 {
    let a = c.abs();
    2.0 + 6.0 * a + 8.0 * a * a
}

/// Global-error constant for one body in a Coulomb field, obtained by
/// running the N-body argument with a single coordinate: the regular part
/// contributes at most `(C̃_F − 2)/2`, the singular part `2`, and
/// `‖⟨p⟩² e^{-isH}ψ₀‖ ≤ C₁ ‖ψ₀‖_{H²}`. Hence
/// `‖U₁(t)^L ψ₀ − e^{-iTH}ψ₀‖ ≤ (4/5)|c| C̃_F C₁ T t^{1/4} ‖ψ₀‖_{H²}`.
pub fn one_body_constant(c: f64, tilde_cf: f64) -> f64 {
    0.8 * c.abs() * tilde_cf * one_body_growth(c)
}

/// `(1 + 2c₀N^{3/2}) ‖Hψ‖ + (2c₀N^{3/2} + 4c₀²N³) ‖ψ‖`.
pub fn second_moment_bound(n: usize, c0: f64, h_norm: f64, norm: f64) -> f64 {
    let a = c0 * (n as f64).powf(1.5);
    (1.0 + 2.0 * a) * h_norm + (2.0 * a + 4.0 * a * a) * norm
}

/// `Γ(n/2)` for integer `n ≥ 1`, by the half-integer recursion.
pub fn gamma_half(n: u32) -> f64 {
    let (mut g, mut x) = if n.is_multiple_of(2) { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    let target = n as f64 / 2.0;
    while x < target - 0.25 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Upper bound on the Hardy–Littlewood–Sobolev constant in dimension
/// `n ≥ 3`: `9 + 2π^{n/2}/((n−2)Γ(n/2)) + 8π^n/((2^{n/2−1} − 1) Γ(n/2+1)²)`.
pub fn chls_upper_bound(n: u32) -> Result<f64> {
    if n < 3 {
        return Err(invalid("HLS constant bound needs dimension n >= 3"));
    }
    let nf = n as f64;
    let half = nf / 2.0;
    let g = gamma_half(n);
    let g1 = gamma_half(n + 2);
    Ok(9.0 + 2.0 * PI.powf(half) / ((nf - 2.0) * g) + 8.0 * PI.powf(nf) / ((2f64.powf(half - 1.0) - 1.0) * g1 * g1))
}

/// A bound value with an advisory when the step exceeds 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub value: f64,
    pub warning: Option<String>,
}

fn check_times(total_time: f64, t: f64) -> Result<Option<String>> {
    if !(t > 0.0 && t.is_finite() && total_time >= 0.0 && total_time.is_finite()) {
        return Err(invalid("bound needs t > 0 and finite T >= 0"));
    }
    Ok((t > 1.0).then(|| format!("step t = {t} > 1: the bound is stated for t <= 1")))
}

/// `C̃_N T t^{1/4} ‖ψ₀‖_{H²}`.
pub fn theorem_bound(
    total_time: f64,
    t: f64,
    h2_norm: f64,
    n: usize,
    c0: f64,
    tilde_cf: f64,
) -> Result<BoundValue> {
    let warning = check_times(total_time, t)?;
    if n < 2 {
        return Err(invalid("the N-body bound needs N >= 2; use the one-body model"));
    }
    Ok(BoundValue { value: tilde_cn(n, c0, tilde_cf) * total_time * t.powf(0.25) * h2_norm, warning })
}

/// Certified global-error bound for a rate study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ErrorBoundModel {
    /// `(4/5)|c| C̃_F C₁ T t^{1/4} ‖ψ₀‖_{H²}`.
    OneBodyCoulomb { c: f64, tilde_cf: f64, h2_norm: f64 },
    /// `C̃_N T t^{1/4} ‖ψ₀‖_{H²}`.
    NBody { n: usize, c0: f64, tilde_cf: f64, h2_norm: f64 },
    /// `(T t / 2)(‖ΔV‖_∞ + 2‖∇V‖_∞ K)` with `K² = ‖|p|ψ₀‖² + osc V` for a
    /// normalised smooth-potential state.
    Smooth { laplacian_sup: f64, gradient_sup: f64, kinetic_radius: f64, norm: f64 },
}

impl ErrorBoundModel {
    pub fn global(&self, total_time: f64, t: f64) -> f64 {
        match *self {
            Self::OneBodyCoulomb { c, tilde_cf, h2_norm } => {
                one_body_constant(c, tilde_cf) * total_time * t.powf(0.25) * h2_norm
            }
            Self::NBody { n, c0, tilde_cf, h2_norm } => tilde_cn(n, c0, tilde_cf) * total_time * t.powf(0.25) * h2_norm,
            Self::Smooth { laplacian_sup, gradient_sup, kinetic_radius, norm } => {
                0.5 * total_time * t * (laplacian_sup + 2.0 * gradient_sup * kinetic_radius) * norm
            }
        }
    }

    /// Bound on one step, `global(t, t)`.
    pub fn local(&self, t: f64) -> f64 {
        self.global(t, t)
    }
}

/// Certified bound for a run of `h` from `psi0`: the one-body or N-body
/// theorem for Coulomb kinds, the commutator bound for smooth ones.
pub fn certified_model(h: &DiscreteHamiltonian, psi0: &Wavefunction) -> Result<ErrorBoundModel> {
    let tcf = tilde_cf(certified_cf1(), certified_cf2());
    let v = h.potential();
    match v.kind() {
        PotentialKind::Coulomb { c } => Ok(ErrorBoundModel::OneBodyCoulomb { c: *c, tilde_cf: tcf, h2_norm: h2_norm(psi0) }),
        PotentialKind::Pairwise { coefficients } => Ok(ErrorBoundModel::NBody {
            n: coefficients.particles(),
            c0: coefficients.c0(),
            tilde_cf: tcf,
            h2_norm: h2_norm(psi0),
        }),
        _ => {
            let (lap, grad) = v
                .smooth_derivative_bounds()
                .ok_or_else(|| invalid("no certified bound for a custom potential"))?;
            let norm = psi0.norm();
            if norm == 0.0 {
                return Err(invalid("bound for the zero state"));
            }
            let w = psi0.to_momentum();
            let kinetic = compensated_sum(
                w.values().iter().zip(h.kinetic_symbol()).map(|(a, &k)| k * a.norm_sqr()),
            ) * h.grid().momentum_weight()
                / (norm * norm);
            Ok(ErrorBoundModel::Smooth {
                laplacian_sup: lap,
                gradient_sup: grad,
                kinetic_radius: (kinetic + v.oscillation()).sqrt(),
                norm,
            })
        }
    }
}

/// Collected constants with both certified and computed cutoff values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantReport {
    pub c_hls3: f64,
    pub cutoff: CutoffConstants,
    pub certified_c_f1: f64,
    pub certified_c_f2: f64,
    pub tilde_cf_certified: f64,
    pub tilde_cf_computed: f64,
    pub n: usize,
    pub c0_pair: f64,
    pub c_n: f64,
    pub tilde_cn_certified: f64,
    pub tilde_cn_computed: f64,
    pub certified_dominates_computed: bool,
}

pub fn constant_report(cutoff: &CutoffConstants, n: usize, c0_pair: f64) -> ConstantReport {
    let tcf_cert = tilde_cf(certified_cf1(), certified_cf2());
    let tcf_comp = tilde_cf(cutoff.c_f1, cutoff.c_f2);
    ConstantReport {
        c_hls3: C_HLS3,
        cutoff: cutoff.clone(),
        certified_c_f1: certified_cf1(),
        certified_c_f2: certified_cf2(),
        tilde_cf_certified: tcf_cert,
        tilde_cf_computed: tcf_comp,
        n,
        c0_pair,
        c_n: c_n(n, c0_pair),
        tilde_cn_certified: tilde_cn(n, c0_pair, tcf_cert),
        tilde_cn_computed: tilde_cn(n, c0_pair, tcf_comp),
        certified_dominates_computed: certified_cf1() >= cutoff.c_f1 && certified_cf2() >= cutoff.c_f2,
    }
}

/// Log-log slope of `C̃_N` against `N`.
pub fn tilde_cn_slope(ns: &[usize], c0: f64, tilde_cf: f64) -> Result<FitOutcome> {
    let pts: Vec<(f64, f64)> = ns.iter().map(|&n| (n as f64, tilde_cn(n, c0, tilde_cf))).collect();
    fit_order(&pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_n_example() {
        // 2 + 6·2^{1.5} + 8·2³ evaluated by hand.
        let want = 2.0 + 6.0 * 8f64.sqrt() + 64.0;
        assert!((c_n(2, 1.0) - want).abs() < 1e-12);
        assert!((c_n(2, 1.0) - 82.970_562_748).abs() < 1e-8);
    }

    #[test]
    fn one_body_growth_at_two() {
        assert_eq!(one_body_growth(-2.0), 46.0);
    }

    #[test]
    fn second_moment_formula() {
        let a = 8f64.sqrt();
        // 4c₀²N³ = 32 for N = 2, c₀ = 1.
        let want = (1.0 + 2.0 * a) * 3.0 + (2.0 * a + 32.0);
        assert!((second_moment_bound(2, 1.0, 3.0, 1.0) - want).abs() < 1e-12);
        assert!((second_moment_bound(2, 1.0, 3.0, 1.0) - 57.627_416_998).abs() < 1e-8);
    }

    #[test]
    fn gamma_half_values() {
        assert!((gamma_half(1) - PI.sqrt()).abs() < 1e-15);
        assert!((gamma_half(3) - PI.sqrt() / 2.0).abs() < 1e-15);
        assert!((gamma_half(5) - 0.75 * PI.sqrt()).abs() < 1e-15);
        assert_eq!(gamma_half(8), 6.0);
    }

    #[test]
    fn chls_bound_is_finite_and_above_sharp_constant() {
        let b = chls_upper_bound(3).unwrap();
        assert!(b.is_finite() && b >= C_HLS3);
        // 9 + 4π + 128π²/(9(√2 − 1)) by hand.
        let want = 9.0 + 4.0 * PI + 128.0 * PI * PI / (9.0 * (2f64.sqrt() - 1.0));
        assert!((b - want).abs() < 1e-10 * want);
        assert!(chls_upper_bound(2).is_err());
    }

    #[test]
    fn theorem_bound_monotone_and_warns() {
        let tcf = tilde_cf(certified_cf1(), certified_cf2());
        let a = theorem_bound(1.0, 0.01, 2.0, 2, 1.0, tcf).unwrap();
        let b = theorem_bound(1.0, 0.02, 2.0, 2, 1.0, tcf).unwrap();
        assert!(b.value > a.value && a.warning.is_none());
        let w = theorem_bound(2.0, 2.0, 1.0, 2, 1.0, tcf).unwrap();
        assert!(w.warning.is_some());
        assert!(theorem_bound(1.0, 0.0, 1.0, 2, 1.0, tcf).is_err());
    }

    #[test]
    fn tilde_cn_slope_matches_oracle() {
        let tcf = tilde_cf(certified_cf1(), certified_cf2());
        let ns: Vec<usize> = (1..=6).map(|k| 1 << k).collect();
        // Least-squares slope of the bracket over N = 2..64 at c₀ = 1, computed independently.
        let f = *tilde_cn_slope(&ns, 1.0, tcf).unwrap().fit().unwrap();
        assert!((f.slope - 4.605_854_737_616).abs() < 1e-9, "{}", f.slope);
        // The slope between the two largest sizes approaches 4.5 from above.
        let tail = (tilde_cn(64, 1.0, tcf) / tilde_cn(32, 1.0, tcf)).log2();
        assert!(tail > 4.5 && tail < 4.55, "{tail}");
    }

    #[test]
    fn tilde_cn_monotone_and_linear_in_small_c0() {
        let tcf = tilde_cf(1.0, 1.0);
        for n in 2..20 {
            assert!(tilde_cn(n + 1, 1.0, tcf) > tilde_cn(n, 1.0, tcf));
            assert!(tilde_cn(n, 1.1, tcf) > tilde_cn(n, 1.0, tcf));
        }
        let r = tilde_cn(3, 1e-8, tcf) / tilde_cn(3, 2e-8, tcf);
        assert!((r - 0.5).abs() < 1e-6);
    }
}
