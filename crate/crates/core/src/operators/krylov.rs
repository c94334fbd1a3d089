use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C;

use super::hamiltonian::DiscreteHamiltonian;
use crate::error::{Error, Result};
use crate::spectral::{Representation, Wavefunction};

/// Lanczos approximation of `e^{-itH}ψ` with adaptive substeps.
///
/// Each substep builds a Lanczos basis (three-term recurrence, optionally
/// followed by a full Gram-Schmidt sweep), exponentiates the projected tridiagonal matrix and
/// accepts the largest step whose residual estimate
/// `β_m |e_mᵀ e^{-iτT_m} e_1| ‖ψ‖` stays below its share of
/// `tolerance · ‖ψ‖`. The estimate cannot drop below roughly `ε β_m`, so
/// steps whose estimate sits at that rounding floor are accepted and the
/// reported sum is then pessimistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovPropagator {
    pub tolerance: f64,
    pub krylov_dim: usize,
    pub max_substeps: usize,
    /// Full Gram-Schmidt sweep after the three-term recurrence.
    pub reorthogonalize: bool,
}

impl Default for KrylovPropagator {
    fn default() -> Self {
        Self { tolerance: 1e-12, krylov_dim: 40, max_substeps: 200_000, reorthogonalize: false }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KrylovStats {
    pub substeps: usize,
    pub matvecs: usize,
    /// Sum of accepted residual estimates, relative to `‖ψ‖`.
    pub error_estimate: f64,
}

fn dot(a: &[C], b: &[C]) -> C {
    let mut s = C::default();
    for (x, y) in a.iter().zip(b) {
        s += x.conj() * y;
    }
    s
}

fn norm(a: &[C]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

struct Krylov {
    basis: Vec<Vec<C>>,
    theta: Vec<f64>,
    /// First row of the eigenvector matrix, `S_{0l}`.
    first: Vec<f64>,
    /// Last row, `S_{k-1,l}`.
    last: Vec<f64>,
    vectors: DMatrix<f64>,
    coupling: f64,
}

impl Krylov {
    fn build(
        h: &DiscreteHamiltonian,
        start: &[C],
        beta0: f64,
        dim: usize,
        reorthogonalize: bool,
        stats: &mut KrylovStats,
    ) -> Self {
        let n = start.len();
        let mut basis: Vec<Vec<C>> = vec![start.iter().map(|v| v / beta0).collect()];
        let mut alpha = Vec::with_capacity(dim);
        let mut beta = Vec::with_capacity(dim);
        let mut w = vec![C::default(); n];
        let mut scale: f64 = 0.0;
        let mut coupling = 0.0;
        for j in 0..dim {
            h.apply_slice(&basis[j], &mut w);
            stats.matvecs += 1;
            let a = dot(&basis[j], &w).re;
            alpha.push(a);
            // Three-term recurrence, then one modified Gram-Schmidt sweep
            // against the whole basis.
            for (i, v) in basis.iter().enumerate().rev() {
                let c = if i == j {
                    C::new(a, 0.0)
                } else if i + 1 == j {
                    C::new(beta[i], 0.0)
                } else {
                    C::default()
                };
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= c * vi;
                }
                if i + 1 < j {
                    break;
                }
            }
            for v in basis.iter().take(if reorthogonalize { basis.len() } else { 0 }) {
                let c = dot(v, &w);
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= c * vi;
                }
            }
            let b = norm(&w);
            scale = scale.max(a.abs()).max(b);
            coupling = b;
            if b <= 1e-14 * scale.max(1.0) || j + 1 == dim {
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|v| v / b).collect());
        }
        let k = alpha.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let first = (0..k).map(|l| eig.eigenvectors[(0, l)]).collect();
        let last = (0..k).map(|l| eig.eigenvectors[(k - 1, l)]).collect();
        basis.truncate(k);
        let broke_down = coupling <= 1e-14 * scale.max(1.0);
        Self {
            basis,
            theta: eig.eigenvalues.iter().copied().collect(),
            first,
            last,
            vectors: eig.eigenvectors,
            coupling: if broke_down { 0.0 } else { coupling },
        }
    }

    /// `e^{-iτT} e_1` and the residual estimate `β_k |y_{k-1}|`.
    fn coefficients(&self, tau: f64) -> (Vec<C>, f64) {
        let k = self.theta.len();
        let phases: Vec<C> =
            self.theta.iter().zip(&self.first).map(|(&th, &s0)| C::from_polar(s0, -tau * th)).collect();
        let y: Vec<C> = (0..k)
            .map(|i| (0..k).map(|l| phases[l] * self.vectors[(i, l)]).sum())
            .collect();
        let tail: C = phases.iter().zip(&self.last).map(|(p, &s)| p * s).sum();
        (y, self.coupling * tail.norm())
    }
}

impl KrylovPropagator {
    pub fn propagate(&self, h: &DiscreteHamiltonian, t: f64, psi: &Wavefunction) -> Result<Wavefunction> {
        self.propagate_with_stats(h, t, psi).map(|(w, _)| w)
    }

    pub fn propagate_with_stats(
        &self,
        h: &DiscreteHamiltonian,
        t: f64,
        psi: &Wavefunction,
    ) -> Result<(Wavefunction, KrylovStats)> {
        h.grid().check_same(psi.grid())?;
        if !t.is_finite() {
            return Err(Error::InvalidArgument("propagation time must be finite".into()));
        }
        if self.krylov_dim < 2 || !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument("krylov_dim >= 2 and tolerance > 0 required".into()));
        }
        let mut stats = KrylovStats::default();
        let mut x = psi.to_position().into_values();
        let norm0 = norm(&x);
        if t == 0.0 || norm0 == 0.0 {
            return Ok((Wavefunction::new(h.grid(), Representation::Position, x)?, stats));
        }
        let total = t.abs();
        let sign = t.signum();
        let budget = self.tolerance * norm0;
        let mut done = 0.0;
        let (lo, hi) = h.spectral_bounds();
        let mut tau = total.min(self.krylov_dim as f64 / (hi - lo).max(1e-300));
        while done < total {
            if stats.substeps >= self.max_substeps {
                return Err(Error::NotConverged(format!(
                    "{} substeps used, {done:.3e} of {total:.3e} covered",
                    stats.substeps
                )));
            }
            let beta0 = norm(&x);
            let kr = Krylov::build(h, &x, beta0, self.krylov_dim, self.reorthogonalize, &mut stats);
            // The estimate is β_m times an O(1) sum; below this it is rounding noise.
            let floor = 64.0 * f64::EPSILON * beta0 * kr.coupling.max(1.0);
            let k = kr.theta.len() as f64;
            let remaining = total - done;
            tau = tau.min(remaining);
            let (y, err) = loop {
                let allowed = (budget * tau / total).max(floor);
                let (y, est) = kr.coefficients(sign * tau);
                let err = est * beta0;
                if err <= allowed {
                    break (y, err);
                }
                let shrink = (0.9 * (allowed / err).powf(1.0 / k)).clamp(0.1, 0.9);
                tau *= shrink;
                if tau <= total * 1e-15 {
                    return Err(Error::NotConverged(format!(
                        "step size collapsed at t = {done:.3e} (estimate {err:.3e})"
                    )));
                }
            };
            let mut next = vec![C::default(); x.len()];
            for (coef, v) in y.iter().zip(&kr.basis) {
                let c = coef * beta0;
                for (o, vi) in next.iter_mut().zip(v) {
                    *o += c * vi;
                }
            }
            x = next;
            done += tau;
            stats.substeps += 1;
            stats.error_estimate += err / norm0;
            let allowed = (budget * tau / total).max(floor);
            tau *= (0.9 * (allowed / err.max(1e-300)).powf(1.0 / k)).clamp(0.2, 2.0);
            if total - done <= total * 1e-15 {
                break;
            }
        }
        Ok((Wavefunction::new(h.grid(), Representation::Position, x)?, stats))
    }
}

/// `e^{-itH}ψ` with the default Krylov settings.
pub fn exact_propagator(h: &DiscreteHamiltonian, t: f64, psi: &Wavefunction) -> Result<Wavefunction> {
    KrylovPropagator::default().propagate(h, t, psi)
}
