use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{GridKind, GridSpec};

/// Pair coefficients `c_jk`, `j < k`, stored row-major over the upper
/// triangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCoefficients {
    particles: usize,
    values: Vec<f64>,
}

impl PairCoefficients {
    pub fn new(particles: usize, values: Vec<f64>) -> Result<Self> {
        if particles < 2 {
            return Err(Error::InvalidPotential("pair potential needs at least two particles".into()));
        }
        let pairs = particles * (particles - 1) / 2;
        if values.len() != pairs {
            return Err(Error::InvalidPotential(format!(
                "{particles} particles need {pairs} pair coefficients, got {}",
                values.len()
            )));
        }
        if values.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPotential("non-finite pair coefficient".into()));
        }
        Ok(Self { particles, values })
    }

    pub fn uniform(particles: usize, c: f64) -> Result<Self> {
        let pairs = particles * particles.saturating_sub(1) / 2;
        Self::new(particles, vec![c; pairs])
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates over `(j, k, c_jk)` with `j < k`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.particles;
        (0..n).flat_map(move |j| (j + 1..n).map(move |k| (j, k))).zip(&self.values).map(|((j, k), &c)| (j, k, c))
    }

    /// `c_0 = max |c_jk|`.
    pub fn c0(&self) -> f64 {
        self.values.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Zero,
    Constant { value: f64 },
    Coulomb { c: f64 },
    Pairwise { coefficients: PairCoefficients },
    GaussianWell { depth: f64, width: f64 },
    Custom,
}

/// A real potential sampled on the position lattice.
#[derive(Debug, Clone)]
pub struct Potential {
    grid: GridSpec,
    kind: PotentialKind,
    values: Vec<f64>,
}

impl Potential {
    pub fn zero(grid: &GridSpec) -> Self {
        Self { grid: grid.clone(), kind: PotentialKind::Zero, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: &GridSpec, value: f64) -> Self {
        Self { grid: grid.clone(), kind: PotentialKind::Constant { value }, values: vec![value; grid.len()] }
    }

    pub fn from_values(grid: &GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch("potential length".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPotential("non-finite sample".into()));
        }
        Ok(Self { grid: grid.clone(), kind: PotentialKind::Custom, values })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max V - min V`.
    pub fn oscillation(&self) -> f64 {
        let (lo, hi) = self.range();
        hi - lo
    }

    pub fn range(&self) -> (f64, f64) {
        self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn is_singular(&self) -> bool {
        matches!(self.kind, PotentialKind::Coulomb { .. } | PotentialKind::Pairwise { .. })
    }

    /// `e^{-itV}` on every sample.
    pub fn phase_table(&self, t: f64) -> Vec<C> {
        self.values.iter().map(|&v| C::from_polar(1.0, -t * v)).collect()
    }

    /// `(sup |ΔV|, sup |∇V|)` of the continuum potential, where known in
    /// closed form.
    pub fn smooth_derivative_bounds(&self) -> Option<(f64, f64)> {
        match self.kind {
            PotentialKind::Zero | PotentialKind::Constant { .. } => Some((0.0, 0.0)),
            // V = -D exp(-r²/2w²): |ΔV| peaks at the origin, |∇V| at r = w.
            PotentialKind::GaussianWell { depth, width } => {
                Some((3.0 * depth.abs() / (width * width), depth.abs() * (-0.5f64).exp() / width))
            }
            _ => None,
        }
    }
}

fn radius(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `c / |x|` on a radial or offset cartesian grid.
pub fn sample_coulomb_one_body(c: f64, grid: &GridSpec) -> Result<Potential> {
    if !c.is_finite() {
        return Err(Error::InvalidPotential("non-finite coupling".into()));
    }
    match grid.kind() {
        GridKind::Radial => {}
        GridKind::Cartesian3d if grid.is_offset() => {}
        GridKind::Cartesian3d => {
            return Err(Error::InvalidPotential("Coulomb sampling needs an offset grid".into()))
        }
        GridKind::Tensor { .. } => {
            return Err(Error::InvalidPotential("use pairwise sampling on tensor grids".into()))
        }
    }
    let mut values = vec![0.0; grid.len()];
    grid.for_each_position(|i, x| values[i] = c / radius(x));
    Ok(Potential { grid: grid.clone(), kind: PotentialKind::Coulomb { c }, values })
}

/// `Σ_{j<k} c_jk / |x_j - x_k|` at a configuration `x = (x_1, …, x_N)`,
/// `x_j ∈ ℝ³`.
pub fn pair_potential_at(x: &[f64], coefficients: &PairCoefficients) -> f64 {
    coefficients
        .iter()
        .map(|(j, k, c)| {
            let d: f64 = (0..3).map(|a| (x[3 * j + a] - x[3 * k + a]).powi(2)).sum::<f64>().sqrt();
            c / d
        })
        .sum()
}

/// Pairwise Coulomb potential on an offset tensor grid.
pub fn sample_coulomb_pairwise(coefficients: &PairCoefficients, grid: &GridSpec) -> Result<Potential> {
    match grid.kind() {
        GridKind::Tensor { particles } if particles == coefficients.particles() => {}
        other => {
            return Err(Error::InvalidPotential(format!(
                "{}-particle pair potential on {other:?}",
                coefficients.particles()
            )))
        }
    }
    if !grid.is_offset() {
        return Err(Error::InvalidPotential("pairwise sampling needs an offset tensor grid".into()));
    }
    let mut values = vec![0.0; grid.len()];
    grid.for_each_position(|i, x| values[i] = pair_potential_at(x, coefficients));
    Ok(Potential {
        grid: grid.clone(),
        kind: PotentialKind::Pairwise { coefficients: coefficients.clone() },
        values,
    })
}

/// Centred well `-D exp(-|x|²/2w²)` on a radial or cartesian grid.
pub fn gaussian_well(depth: f64, width: f64, grid: &GridSpec) -> Result<Potential> {
    if !(depth.is_finite() && width.is_finite() && width > 0.0) {
        return Err(Error::InvalidPotential("Gaussian well needs finite depth and positive width".into()));
    }
    if matches!(grid.kind(), GridKind::Tensor { .. }) {
        return Err(Error::InvalidPotential("Gaussian well is one-body".into()));
    }
    let mut values = vec![0.0; grid.len()];
    grid.for_each_position(|i, x| {
        let r = radius(x);
        values[i] = -depth * (-r * r / (2.0 * width * width)).exp();
    });
    Ok(Potential { grid: grid.clone(), kind: PotentialKind::GaussianWell { depth, width }, values })
}
