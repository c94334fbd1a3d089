use num_complex::Complex64 as C;

use super::potential::Potential;
use crate::error::Result;
use crate::quadrature::compensated_sum;
use crate::spectral::{GridKind, GridSpec, Representation, Wavefunction};

/// `H = A + V` with `A` the lattice `-Δ` (the `|p|²` multiplier) and `V`
/// pointwise.
#[derive(Debug, Clone)]
pub struct DiscreteHamiltonian {
    grid: GridSpec,
    kinetic: Vec<f64>,
    potential: Potential,
}

impl DiscreteHamiltonian {
    pub fn new(potential: Potential) -> Self {
        let grid = potential.grid().clone();
        let kinetic = grid.momentum_sq_table();
        Self { grid, kinetic, potential }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    /// `|p|²` on the momentum lattice.
    pub fn kinetic_symbol(&self) -> &[f64] {
        &self.kinetic
    }

    pub fn kinetic_max(&self) -> f64 {
        self.kinetic.iter().fold(0.0, |m, &v| m.max(v))
    }

    /// Interval containing the spectrum.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let (lo, hi) = self.potential.range();
        (lo, hi + self.kinetic_max())
    }

    /// `Hψ`, returned in the position representation.
    pub fn apply(&self, psi: &Wavefunction) -> Result<Wavefunction> {
        self.grid.check_same(psi.grid())?;
        let x = psi.to_position();
        let mut out = vec![C::default(); self.grid.len()];
        self.apply_slice(x.values(), &mut out);
        Wavefunction::new(&self.grid, Representation::Position, out)
    }

    /// `out = H x` for position samples.
    pub fn apply_slice(&self, x: &[C], out: &mut [C]) {
        let v = self.potential.values();
        if self.grid.kind() == GridKind::Radial {
            // Three-point Dirichlet stencil with mirrored ghosts u_{-1} = -u_0,
            // u_n = -u_{n-1}; identical to the DST-II multiplier.
            let n = x.len();
            let h = self.grid.spacing(0);
            let s = 1.0 / (h * h);
            for k in 0..n {
                let left = if k == 0 { -x[0] } else { x[k - 1] };
                let right = if k + 1 == n { -x[n - 1] } else { x[k + 1] };
                out[k] = (x[k] * 2.0 - left - right) * s + x[k] * v[k];
            }
            return;
        }
        let mut w = Wavefunction::new(&self.grid, Representation::Position, x.to_vec())
            .expect("slice length matches grid");
        w.make_momentum();
        for (a, &k) in w.values_mut().iter_mut().zip(&self.kinetic) {
            *a *= k;
        }
        w.make_position();
        for ((o, a), (xi, vi)) in out.iter_mut().zip(w.values()).zip(x.iter().zip(v)) {
            *o = a + xi * vi;
        }
    }

    /// `Aψ = -Δψ` in the momentum representation.
    pub fn kinetic_apply(&self, psi: &Wavefunction) -> Result<Wavefunction> {
        self.grid.check_same(psi.grid())?;
        let mut w = psi.to_momentum();
        for (a, &k) in w.values_mut().iter_mut().zip(&self.kinetic) {
            *a *= k;
        }
        Ok(w)
    }
}

/// `Hψ` in the position representation.
pub fn hamiltonian_apply(h: &DiscreteHamiltonian, psi: &Wavefunction) -> Result<Wavefunction> {
    h.apply(psi)
}

/// `‖ψ‖_{H²} = (‖ψ‖² + ‖Δψ‖²)^{1/2}` with the lattice Laplacian.
pub fn h2_norm(psi: &Wavefunction) -> f64 {
    let grid = psi.grid();
    let w = psi.to_momentum();
    let p2 = grid.momentum_sq_table();
    let s = compensated_sum(w.values().iter().zip(&p2).map(|(v, &k)| (1.0 + k * k) * v.norm_sqr()));
    (s * grid.momentum_weight()).sqrt()
}

impl DiscreteHamiltonian {
    /// Lowest eigenpair of the radial Hamiltonian, normalised.
    ///
    /// The eigenvalue comes from Sturm-sequence bisection on the tridiagonal
    /// matrix; the eigenvector from inverse iteration with a shift just
    /// below it, where `H - σ` is positive definite and elimination needs no
    /// pivoting.
    pub fn ground_state(&self) -> Result<(f64, Wavefunction)> {
        if self.grid.kind() != GridKind::Radial {
            return Err(crate::error::invalid("ground_state is implemented for the radial grid"));
        }
        let (d, off) = self.radial_tridiagonal();
        let n = d.len();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..n {
            let r = if k == 0 || k + 1 == n { off.abs() } else { 2.0 * off.abs() };
            lo = lo.min(d[k] - r);
            hi = hi.max(d[k] + r);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if sturm_count(&d, off, mid) >= 1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let lambda = 0.5 * (lo + hi);
        let shift = lambda - 1e-9 * lambda.abs().max(1.0);
        let mut x = vec![1.0; n];
        for _ in 0..6 {
            x = solve_shifted(&d, off, shift, &x);
            let s = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= s);
        }
        if x.iter().sum::<f64>() < 0.0 {
            x.iter_mut().for_each(|v| *v = -*v);
        }
        let mut psi = Wavefunction::new(
            &self.grid,
            Representation::Position,
            x.into_iter().map(|v| C::new(v, 0.0)).collect(),
        )?;
        psi.normalize()?;
        let hpsi = self.apply(&psi)?;
        let energy = psi.inner(&hpsi)?.re;
        Ok((energy, psi))
    }

    fn radial_tridiagonal(&self) -> (Vec<f64>, f64) {
        let h = self.grid.spacing(0);
        let s = 1.0 / (h * h);
        let v = self.potential.values();
        let n = v.len();
        let d = (0..n)
            .map(|k| v[k] + if k == 0 || k + 1 == n { 3.0 * s } else { 2.0 * s })
            .collect();
        (d, -s)
    }
}

/// Number of eigenvalues below `x` of the symmetric tridiagonal matrix with
/// diagonal `d` and constant off-diagonal `e`.
fn sturm_count(d: &[f64], e: f64, x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for (k, &dk) in d.iter().enumerate() {
        q = if k == 0 { dk - x } else { dk - x - e * e / q };
        if q == 0.0 {
            q = -f64::EPSILON * (dk.abs() + e.abs());
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Solves `(T - σ) y = b` for positive definite `T - σ`.
fn solve_shifted(d: &[f64], e: f64, shift: f64, b: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut diag = vec![0.0; n];
    let mut y = vec![0.0; n];
    diag[0] = d[0] - shift;
    y[0] = b[0];
    for k in 1..n {
        let m = e / diag[k - 1];
        diag[k] = d[k] - shift - m * e;
        y[k] = b[k] - m * y[k - 1];
    }
    y[n - 1] /= diag[n - 1];
    for k in (0..n - 1).rev() {
        y[k] = (y[k] - e * y[k + 1]) / diag[k];
    }
    y
}
