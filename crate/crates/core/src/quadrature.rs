//! Gauss–Legendre rules, an adaptive nested Gauss–Legendre integrator and
//! compensated summation.

use std::sync::OnceLock;

use crate::error::{invalid, Result};

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Compensated sum of an iterator.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<NeumaierSum>().value()
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// nodes in increasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("Gauss-Legendre rule needs at least one node"));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(Self { nodes, weights })
    }

    /// Nodes and weights mapped affinely onto `[a, b]`.
    pub fn on_interval(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let x = self.nodes.iter().map(|&u| mid + half * u).collect();
        let w = self.weights.iter().map(|&w| half * w).collect();
        (x, w)
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let s = compensated_sum(
            self.nodes
                .iter()
                .zip(&self.weights)
                .map(|(&u, &w)| w * f(mid + half * u)),
        );
        half * s
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn panel_rules() -> &'static (GaussLegendre, GaussLegendre) {
    static RULES: OnceLock<(GaussLegendre, GaussLegendre)> = OnceLock::new();
    RULES.get_or_init(|| {
        (
            GaussLegendre::new(10).expect("10-point rule"),
            GaussLegendre::new(20).expect("20-point rule"),
        )
    })
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
    pub panels: usize,
}

/// Adaptive bisection with a 10/20-point Gauss–Legendre error estimate per
/// panel. Converges when the summed panel estimates fall below
/// `max(abs_tol, rel_tol * |value|)`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Integral> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(invalid("integration limits must be finite"));
    }
    if a == b {
        return Ok(Integral { value: 0.0, error_estimate: 0.0, panels: 0 });
    }
    let (lo, hi) = panel_rules();
    let eval = |x0: f64, x1: f64| {
        let coarse = lo.integrate(&f, x0, x1);
        let fine = hi.integrate(&f, x0, x1);
        (fine, (fine - coarse).abs())
    };
    let (v, e) = eval(a, b);
    let mut panels = vec![(a, b, v, e)];
    for _ in 0..4000 {
        let total = compensated_sum(panels.iter().map(|p| p.2));
        let err = compensated_sum(panels.iter().map(|p| p.3));
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(Integral { value: total, error_estimate: err, panels: panels.len() });
        }
        let (i, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty panel list");
        let (x0, x1, _, _) = panels.swap_remove(i);
        let m = 0.5 * (x0 + x1);
        let (vl, el) = eval(x0, m);
        let (vr, er) = eval(m, x1);
        panels.push((x0, m, vl, el));
        panels.push((m, x1, vr, er));
    }
    Err(invalid("adaptive quadrature did not reach the requested tolerance"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_point_rule_matches_closed_form() {
        let r = GaussLegendre::new(5).unwrap();
        let a = (5.0f64 - 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
        let b = (5.0f64 + 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
        let expect = [-b, -a, 0.0, a, b];
        for (x, e) in r.nodes.iter().zip(expect) {
            assert!((x - e).abs() < 1e-15);
        }
        let wa = (322.0 + 13.0 * 70.0f64.sqrt()) / 900.0;
        let wb = (322.0 - 13.0 * 70.0f64.sqrt()) / 900.0;
        let wexp = [wb, wa, 128.0 / 225.0, wa, wb];
        for (w, e) in r.weights.iter().zip(wexp) {
            assert!((w - e).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_for_degree_2n_minus_1() {
        for n in [1usize, 4, 16, 32, 64] {
            let r = GaussLegendre::new(n).unwrap();
            let deg = 2 * n - 1;
            for p in [0, deg / 2, deg] {
                let got = r.integrate(|x| x.powi(p as i32), 0.0, 1.0);
                let want = 1.0 / (p as f64 + 1.0);
                assert!((got - want).abs() < 1e-13, "n={n} p={p} got={got}");
            }
        }
    }

    #[test]
    fn adaptive_handles_flat_endpoints() {
        let g = |x: f64| {
            if x <= 0.5 || x >= 1.0 {
                0.0
            } else {
                (-1.0 / ((x - 0.5) * (1.0 - x))).exp()
            }
        };
        let i = integrate_adaptive(g, 0.5, 1.0, 1e-13, 0.0).unwrap();
        // 40-digit reference value computed with mpmath.
        let reference = 1.194_046_560_987_131_8e-8;
        assert!(((i.value - reference) / reference).abs() < 1e-12, "{}", i.value);
    }

    #[test]
    fn neumaier_recovers_cancelled_terms() {
        let s = compensated_sum([1.0, 1e100, 1.0, -1e100]);
        assert_eq!(s, 2.0);
    }
}
