//! Offset lattices, wavefunctions and the unitary position/momentum
//! transforms.
//!
//! Cartesian and tensor grids use the symmetric continuous-Fourier
//! convention `f̂(ξ) = (2π)^{-d/2} ∫ e^{-ix·ξ} f(x) dx`, discretised by the
//! FFT with a phase correction for the lattice origin. The radial grid
//! carries `u = rψ` for s-wave states; its momentum representation is the
//! orthonormal DST-II coefficient vector, which diagonalises the
//! three-point Dirichlet Laplacian exactly.

mod transform;
mod wavefunction;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use transform::{dst2_orthonormal, dst3_orthonormal};
pub use wavefunction::{Representation, Wavefunction};

/// Default cap on the total number of lattice points.
pub const DEFAULT_POINT_BUDGET: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Radial,
    Cartesian3d,
    Tensor { particles: usize },
}

impl GridKind {
    pub fn axes(&self) -> usize {
        match self {
            GridKind::Radial => 1,
            GridKind::Cartesian3d => 3,
            GridKind::Tensor { particles } => 3 * particles,
        }
    }

    pub fn particles(&self) -> usize {
        match self {
            GridKind::Tensor { particles } => *particles,
            _ => 1,
        }
    }
}

/// Serializable summary of a grid, used in manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDescriptor {
    pub kind: GridKind,
    pub dims: Vec<usize>,
    pub extents: Vec<f64>,
    pub offset: bool,
    pub points: usize,
}

/// A product lattice with a cached transform plan. Cloning is cheap.
#[derive(Clone)]
pub struct GridSpec {
    kind: GridKind,
    dims: Vec<usize>,
    extents: Vec<f64>,
    offset: bool,
    shifts: Vec<f64>,
    len: usize,
    plans: Arc<transform::Plans>,
}

impl fmt::Debug for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridSpec")
            .field("kind", &self.kind)
            .field("dims", &self.dims)
            .field("extents", &self.extents)
            .field("offset", &self.offset)
            .finish()
    }
}

impl PartialEq for GridSpec {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.dims == other.dims
            && self.extents == other.extents
            && self.offset == other.offset
    }
}

impl GridSpec {
    /// Builds a grid under the default point budget.
    ///
    /// Extents are half-widths for cartesian and tensor axes
    /// (`x ∈ [-a, a)`) and the outer radius for the radial grid.
    pub fn new(kind: GridKind, dims: &[usize], extents: &[f64], offset: bool) -> Result<Self> {
        Self::with_budget(kind, dims, extents, offset, DEFAULT_POINT_BUDGET)
    }

    pub fn with_budget(
        kind: GridKind,
        dims: &[usize],
        extents: &[f64],
        offset: bool,
        budget: usize,
    ) -> Result<Self> {
        let axes = kind.axes();
        if axes == 0 {
            return Err(Error::InvalidGrid("tensor grid needs at least one particle".into()));
        }
        if dims.len() != axes || extents.len() != axes {
            return Err(Error::InvalidGrid(format!(
                "{kind:?} needs {axes} axes, got {} sizes and {} extents",
                dims.len(),
                extents.len()
            )));
        }
        let min = match kind {
            GridKind::Tensor { .. } => 4,
            _ => 8,
        };
        for &n in dims {
            if n < min || !n.is_power_of_two() {
                return Err(Error::InvalidGrid(format!(
                    "axis size {n} must be a power of two and at least {min}"
                )));
            }
        }
        for &a in extents {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::InvalidGrid(format!("extent {a} must be positive")));
            }
        }
        if kind == GridKind::Radial && !offset {
            return Err(Error::InvalidGrid(
                "the radial grid is cell-centred and requires offset = true".into(),
            ));
        }
        let len = dims
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .unwrap_or(usize::MAX);
        if len > budget {
            return Err(Error::BudgetExceeded { points: len, budget });
        }
        let shifts: Vec<f64> = match (kind, offset) {
            (_, false) => vec![0.0; axes],
            (GridKind::Tensor { particles }, true) => (0..axes)
                .map(|a| (2 * (a / 3) + 1) as f64 / (2 * particles) as f64)
                .collect(),
            (_, true) => vec![0.5; axes],
        };
        let plans = Arc::new(transform::Plans::new(kind, dims, extents, &shifts));
        Ok(Self {
            kind,
            dims: dims.to_vec(),
            extents: extents.to_vec(),
            offset,
            shifts,
            len,
            plans,
        })
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn is_offset(&self) -> bool {
        self.offset
    }

    /// Fractional sample offset of each axis, in units of the spacing.
    pub fn shifts(&self) -> &[f64] {
        &self.shifts
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn axes(&self) -> usize {
        self.dims.len()
    }

    pub fn particles(&self) -> usize {
        self.kind.particles()
    }

    pub fn descriptor(&self) -> GridDescriptor {
        GridDescriptor {
            kind: self.kind,
            dims: self.dims.clone(),
            extents: self.extents.clone(),
            offset: self.offset,
            points: self.len,
        }
    }

    /// Lattice spacing along `axis`.
    pub fn spacing(&self, axis: usize) -> f64 {
        match self.kind {
            GridKind::Radial => self.extents[0] / self.dims[0] as f64,
            _ => 2.0 * self.extents[axis] / self.dims[axis] as f64,
        }
    }

    /// Momentum spacing `2π / (n Δx)` along a cartesian axis. For the radial
    /// grid this is `π / R`, the spacing of the continuum sine modes.
    pub fn momentum_spacing(&self, axis: usize) -> f64 {
        match self.kind {
            GridKind::Radial => PI / self.extents[0],
            _ => 2.0 * PI / (self.dims[axis] as f64 * self.spacing(axis)),
        }
    }

    /// Coordinate of sample `k` along `axis`.
    pub fn coordinate(&self, axis: usize, k: usize) -> f64 {
        let h = self.spacing(axis);
        match self.kind {
            GridKind::Radial => (k as f64 + self.shifts[0]) * h,
            _ => (k as f64 + self.shifts[axis]) * h - self.extents[axis],
        }
    }

    /// Momentum coordinate of mode `k` along `axis`. On the radial grid this
    /// is the square root of the Dirichlet stencil eigenvalue of mode `k+1`.
    pub fn momentum_coordinate(&self, axis: usize, k: usize) -> f64 {
        match self.kind {
            GridKind::Radial => self.radial_eigenvalue(k).sqrt(),
            _ => {
                let n = self.dims[axis];
                let signed = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
                signed * self.momentum_spacing(axis)
            }
        }
    }

    /// Eigenvalue `4 sin²(π m / 2n) / h²` of the radial Dirichlet stencil for
    /// coefficient index `k = m - 1`.
    pub fn radial_eigenvalue(&self, k: usize) -> f64 {
        let n = self.dims[0] as f64;
        let h = self.spacing(0);
        let s = (PI * (k as f64 + 1.0) / (2.0 * n)).sin();
        4.0 * s * s / (h * h)
    }

    /// Quadrature weight of one position sample.
    pub fn position_weight(&self) -> f64 {
        match self.kind {
            GridKind::Radial => 4.0 * PI * self.spacing(0),
            _ => (0..self.axes()).map(|a| self.spacing(a)).product(),
        }
    }

    /// Quadrature weight of one momentum sample.
    pub fn momentum_weight(&self) -> f64 {
        match self.kind {
            GridKind::Radial => self.position_weight(),
            _ => (0..self.axes()).map(|a| self.momentum_spacing(a)).product(),
        }
    }

    /// Flat index of the zero-frequency mode, if the lattice has one.
    pub fn dc_index(&self) -> Option<usize> {
        match self.kind {
            GridKind::Radial => None,
            _ => Some(0),
        }
    }

    /// Calls `f(flat_index, coordinates)` for every position sample, in
    /// row-major order.
    pub fn for_each_position<F: FnMut(usize, &[f64])>(&self, mut f: F) {
        let coords: Vec<Vec<f64>> = (0..self.axes())
            .map(|a| (0..self.dims[a]).map(|k| self.coordinate(a, k)).collect())
            .collect();
        self.odometer(&coords, &mut f);
    }

    /// Calls `f(flat_index, momentum)` for every momentum mode, in row-major
    /// order.
    pub fn for_each_momentum<F: FnMut(usize, &[f64])>(&self, mut f: F) {
        let coords: Vec<Vec<f64>> = (0..self.axes())
            .map(|a| (0..self.dims[a]).map(|k| self.momentum_coordinate(a, k)).collect())
            .collect();
        self.odometer(&coords, &mut f);
    }

    fn odometer<F: FnMut(usize, &[f64])>(&self, coords: &[Vec<f64>], f: &mut F) {
        let d = self.axes();
        let mut idx = vec![0usize; d];
        let mut point: Vec<f64> = (0..d).map(|a| coords[a][0]).collect();
        for flat in 0..self.len {
            f(flat, &point);
            for a in (0..d).rev() {
                idx[a] += 1;
                if idx[a] < self.dims[a] {
                    point[a] = coords[a][idx[a]];
                    break;
                }
                idx[a] = 0;
                point[a] = coords[a][0];
            }
        }
    }

    /// Table of `|p|²` (all axes) over the momentum lattice.
    pub fn momentum_sq_table(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        self.for_each_momentum(|i, p| out[i] = p.iter().map(|x| x * x).sum());
        out
    }

    /// Table of `|p_j|²` for particle `j` of a tensor grid.
    pub fn particle_momentum_sq_table(&self, particle: usize) -> Result<Vec<f64>> {
        if particle >= self.particles() {
            return Err(Error::InvalidArgument(format!(
                "particle {particle} out of range for {} particles",
                self.particles()
            )));
        }
        let axes = match self.kind {
            GridKind::Tensor { .. } => 3 * particle..3 * particle + 3,
            _ => 0..self.axes(),
        };
        let mut out = vec![0.0; self.len];
        self.for_each_momentum(|i, p| out[i] = p[axes.clone()].iter().map(|x| x * x).sum());
        Ok(out)
    }

    pub(crate) fn plans(&self) -> &transform::Plans {
        &self.plans
    }

    pub(crate) fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}
