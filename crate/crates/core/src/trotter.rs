//! Lie–Trotter stepping `U₁(t) = e^{-itB} e^{-itA}` and its error against the
//! reference propagator.

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::operators::{DiscreteHamiltonian, KrylovPropagator, MultiplierTable};
use crate::quadrature::GaussLegendre;
use crate::spectral::Wavefunction;

/// Which factor acts first within a step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitOrder {
    /// `e^{-itV} e^{-itA}`: kinetic phase first.
    #[default]
    KineticFirst,
    /// `e^{-itA} e^{-itV}`.
    PotentialFirst,
}

/// `L` steps of size `T/L` with precomputed phase tables.
#[derive(Debug, Clone)]
pub struct TrotterPlan<'a> {
    hamiltonian: &'a DiscreteHamiltonian,
    total_time: f64,
    steps: usize,
    order: SplitOrder,
    kinetic: MultiplierTable,
    potential: Vec<C>,
}

impl<'a> TrotterPlan<'a> {
    pub fn new(hamiltonian: &'a DiscreteHamiltonian, total_time: f64, steps: usize) -> Result<Self> {
        Self::with_order(hamiltonian, total_time, steps, SplitOrder::KineticFirst)
    }

    pub fn with_order(
        hamiltonian: &'a DiscreteHamiltonian,
        total_time: f64,
        steps: usize,
        order: SplitOrder,
    ) -> Result<Self> {
        if steps == 0 {
            return Err(invalid("Trotter plan needs at least one step"));
        }
        if !total_time.is_finite() {
            return Err(invalid("total time must be finite"));
        }
        let t = total_time / steps as f64;
        let grid = hamiltonian.grid();
        let kinetic = MultiplierTable::from_values(
            grid,
            hamiltonian.kinetic_symbol().iter().map(|&k| C::from_polar(1.0, -t * k)).collect(),
        )?;
        let potential = hamiltonian.potential().phase_table(t);
        Ok(Self { hamiltonian, total_time, steps, order, kinetic, potential })
    }

    pub fn hamiltonian(&self) -> &DiscreteHamiltonian {
        self.hamiltonian
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step_size(&self) -> f64 {
        self.total_time / self.steps as f64
    }

    pub fn order(&self) -> SplitOrder {
        self.order
    }

    fn potential_phase(&self, psi: &mut Wavefunction) {
        psi.make_position();
        for (v, p) in psi.values_mut().iter_mut().zip(&self.potential) {
            *v *= p;
        }
    }

    /// One step in place; the result is in the position representation.
    pub fn step_in_place(&self, psi: &mut Wavefunction) -> Result<()> {
        self.hamiltonian.grid().check_same(psi.grid())?;
        match self.order {
            SplitOrder::KineticFirst => {
                self.kinetic.apply_in_place(psi)?;
                self.potential_phase(psi);
            }
            SplitOrder::PotentialFirst => {
                self.potential_phase(psi);
                self.kinetic.apply_in_place(psi)?;
                psi.make_position();
            }
        }
        Ok(())
    }

    /// `U₁(t)^L ψ₀`.
    pub fn evolve(&self, psi0: &Wavefunction) -> Result<Wavefunction> {
        self.evolve_traced(psi0, |_, _| {})
    }

    /// As [`evolve`](Self::evolve), calling `observer(step, state)` after
    /// every step.
    pub fn evolve_traced<F: FnMut(usize, &Wavefunction)>(
        &self,
        psi0: &Wavefunction,
        mut observer: F,
    ) -> Result<Wavefunction> {
        let mut psi = psi0.to_position();
        for l in 1..=self.steps {
            self.step_in_place(&mut psi)?;
            observer(l, &psi);
        }
        Ok(psi)
    }
}

/// `e^{-itB} e^{-itA} ψ`.
pub fn lie_trotter_step(h: &DiscreteHamiltonian, t: f64, psi: &Wavefunction) -> Result<Wavefunction> {
    let plan = TrotterPlan::new(h, t, 1)?;
    let mut out = psi.clone();
    plan.step_in_place(&mut out)?;
    Ok(out)
}

/// `‖U₁(t)^L ψ₀ − e^{-iTH} ψ₀‖`.
pub fn global_error(plan: &TrotterPlan<'_>, psi0: &Wavefunction, reference: &KrylovPropagator) -> Result<f64> {
    let split = plan.evolve(psi0)?;
    let exact = reference.propagate(plan.hamiltonian(), plan.total_time(), psi0)?;
    split.distance(&exact)
}

/// `(U₁(t) − U(t)) ψ₀`.
pub fn local_error_vector(
    h: &DiscreteHamiltonian,
    t: f64,
    psi0: &Wavefunction,
    reference: &KrylovPropagator,
) -> Result<Wavefunction> {
    let mut split = lie_trotter_step(h, t, psi0)?;
    let exact = reference.propagate(h, t, psi0)?;
    split.axpy(C::new(-1.0, 0.0), &exact)?;
    Ok(split)
}

/// `‖(U₁(t) − U(t)) ψ₀‖`.
pub fn local_error(h: &DiscreteHamiltonian, t: f64, psi0: &Wavefunction, reference: &KrylovPropagator) -> Result<f64> {
    Ok(local_error_vector(h, t, psi0, reference)?.norm())
}

/// `Σ_ℓ ‖E(t) U(t)^ℓ ψ₀‖` over the `L` steps of `plan`, which dominates the
/// global error by telescoping.
pub fn accumulated_local_error(
    plan: &TrotterPlan<'_>,
    psi0: &Wavefunction,
    reference: &KrylovPropagator,
) -> Result<f64> {
    let h = plan.hamiltonian();
    let t = plan.step_size();
    let mut phi = psi0.to_position();
    let mut total = 0.0;
    for _ in 0..plan.steps() {
        let mut split = phi.clone();
        let single = TrotterPlan::with_order(h, t, 1, plan.order())?;
        single.step_in_place(&mut split)?;
        let next = reference.propagate(h, t, &phi)?;
        total += split.distance(&next)?;
        phi = next;
    }
    Ok(total)
}

/// `[e^{-isA}, B] ψ` in the position representation.
pub fn commutator_action(h: &DiscreteHamiltonian, s: f64, psi: &Wavefunction) -> Result<Wavefunction> {
    let v = h.potential().values();
    let phase = MultiplierTable::from_values(
        h.grid(),
        h.kinetic_symbol().iter().map(|&k| C::from_polar(1.0, -s * k)).collect(),
    )?;
    let x = psi.to_position();
    let mut bx = x.clone();
    for (a, &vi) in bx.values_mut().iter_mut().zip(v) {
        *a *= vi;
    }
    let mut first = phase.apply(&bx)?.to_position();
    let mut second = phase.apply(&x)?.to_position();
    for (a, &vi) in second.values_mut().iter_mut().zip(v) {
        *a *= vi;
    }
    first.axpy(C::new(-1.0, 0.0), &second)?;
    Ok(first)
}

/// Gauss–Legendre evaluation of
/// `i ∫₀ᵗ e^{-isB} [e^{-isA}, B] e^{-i(t−s)H} ψ₀ ds`, which equals the local
/// error `(U₁(t) − U(t)) ψ₀`.
pub fn error_representation_quadrature(
    h: &DiscreteHamiltonian,
    t: f64,
    psi0: &Wavefunction,
    nodes: usize,
    reference: &KrylovPropagator,
) -> Result<Wavefunction> {
    let rule = GaussLegendre::new(nodes)?;
    let (s, w) = rule.on_interval(0.0, t);
    let v = h.potential().values();
    let mut acc = Wavefunction::zeros(h.grid(), crate::spectral::Representation::Position);
    // Walk e^{-i(t−s)H} ψ₀ from the largest node s down, so each Krylov
    // call covers only the gap to the previous node.
    let mut f = psi0.to_position();
    let mut elapsed = 0.0;
    for k in (0..nodes).rev() {
        let target = t - s[k];
        f = reference.propagate(h, target - elapsed, &f)?;
        elapsed = target;
        let mut g = commutator_action(h, s[k], &f)?;
        for (a, &vi) in g.values_mut().iter_mut().zip(v) {
            *a *= C::from_polar(1.0, -s[k] * vi);
        }
        acc.axpy(C::new(0.0, w[k]), &g)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{exact_propagator, gaussian_well, sample_coulomb_one_body, Potential};
    use crate::spectral::{GridKind, GridSpec, Representation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn radial(n: usize, r: f64) -> GridSpec {
        GridSpec::new(GridKind::Radial, &[n], &[r], true).unwrap()
    }

    fn random_state(grid: &GridSpec, seed: u64) -> Wavefunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = grid
            .momentum_sq_table()
            .iter()
            .map(|k| C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) / (1.0 + k).powi(2))
            .collect();
        let mut psi = Wavefunction::new(grid, Representation::Momentum, values).unwrap().to_position();
        psi.normalize().unwrap();
        psi
    }

    #[test]
    fn zero_step_plan_is_rejected() {
        let g = radial(64, 8.0);
        let h = DiscreteHamiltonian::new(Potential::zero(&g));
        assert!(TrotterPlan::new(&h, 1.0, 0).is_err());
    }

    #[test]
    fn commuting_pair_is_exact() {
        let g = radial(512, 20.0);
        let h = DiscreteHamiltonian::new(Potential::constant(&g, 0.7));
        let psi = random_state(&g, 1);
        let plan = TrotterPlan::new(&h, 1.0, 16).unwrap();
        let err = global_error(&plan, &psi, &KrylovPropagator::default()).unwrap();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn step_is_unitary_and_orders_differ() {
        let g = radial(512, 20.0);
        let h = DiscreteHamiltonian::new(sample_coulomb_one_body(-2.0, &g).unwrap());
        let psi = random_state(&g, 2);
        let a = lie_trotter_step(&h, 0.05, &psi).unwrap();
        assert!((a.norm() - 1.0).abs() < 1e-12);
        let b = TrotterPlan::with_order(&h, 0.05, 1, SplitOrder::PotentialFirst).unwrap().evolve(&psi).unwrap();
        assert!((b.norm() - 1.0).abs() < 1e-12);
        assert!(a.distance(&b).unwrap() > 1e-6);
    }

    #[test]
    fn step_equals_explicit_factor_product() {
        let g = radial(256, 12.0);
        let h = DiscreteHamiltonian::new(sample_coulomb_one_body(-2.0, &g).unwrap());
        let psi = random_state(&g, 3);
        let t = 0.01;
        let kin = DiscreteHamiltonian::new(Potential::zero(&g));
        let mut want = exact_propagator(&kin, t, &psi).unwrap();
        for (v, &p) in want.values_mut().iter_mut().zip(h.potential().values()) {
            *v *= C::from_polar(1.0, -t * p);
        }
        let got = lie_trotter_step(&h, t, &psi).unwrap();
        assert!(got.distance(&want).unwrap() < 1e-10);
    }

    #[test]
    fn error_representation_matches_local_error() {
        let g = radial(512, 20.0);
        let reference = KrylovPropagator::default();
        let h = DiscreteHamiltonian::new(gaussian_well(5.0, 1.0, &g).unwrap());
        for seed in 0..3 {
            let psi = random_state(&g, seed);
            let t = 0.03125;
            let direct = local_error_vector(&h, t, &psi, &reference).unwrap();
            let quad = error_representation_quadrature(&h, t, &psi, 16, &reference).unwrap();
            let rel = quad.distance(&direct).unwrap() / direct.norm();
            assert!(rel < 1e-6, "{rel}");
        }
    }

    #[test]
    fn global_error_is_dominated_by_summed_local_errors() {
        let g = radial(512, 20.0);
        let reference = KrylovPropagator::default();
        let h = DiscreteHamiltonian::new(sample_coulomb_one_body(-2.0, &g).unwrap());
        let psi = random_state(&g, 4);
        let plan = TrotterPlan::new(&h, 0.5, 8).unwrap();
        let global = global_error(&plan, &psi, &reference).unwrap();
        let summed = accumulated_local_error(&plan, &psi, &reference).unwrap();
        assert!(global <= summed * (1.0 + 1e-9) + 1e-10, "{global} {summed}");
        assert!(global > 0.0);
    }

    #[test]
    fn first_order_for_smooth_potential() {
        let g = radial(512, 20.0);
        let reference = KrylovPropagator::default();
        let h = DiscreteHamiltonian::new(gaussian_well(5.0, 1.0, &g).unwrap());
        let psi = Wavefunction::from_position_fn(&g, |r| C::new(r[0] * (-r[0] * r[0] / 2.0).exp(), 0.0));
        let e1 = global_error(&TrotterPlan::new(&h, 1.0, 64).unwrap(), &psi, &reference).unwrap();
        let e2 = global_error(&TrotterPlan::new(&h, 1.0, 128).unwrap(), &psi, &reference).unwrap();
        let order = (e1 / e2).log2();
        assert!((order - 1.0).abs() < 0.05, "{order}");
    }
}
