//! Fourier multipliers, sampled potentials, the discrete Hamiltonian and the
//! Krylov reference propagator.

mod hamiltonian;
mod krylov;
mod multiplier;
mod potential;

pub use hamiltonian::{h2_norm, hamiltonian_apply, DiscreteHamiltonian};
pub use krylov::{exact_propagator, KrylovPropagator, KrylovStats};
pub use multiplier::{
    apply_multiplier, inverse_abs_momentum, kinetic_phase, laplacian_symbol, FourierMultiplier,
    MultiplierTable,
};
pub use potential::{
    gaussian_well, pair_potential_at, sample_coulomb_one_body, sample_coulomb_pairwise,
    PairCoefficients, Potential, PotentialKind,
};
