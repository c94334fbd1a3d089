use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use super::GridSpec;
use crate::error::{Error, Result};
use crate::quadrature::compensated_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Position,
    Momentum,
}

/// Complex samples on a grid, tagged with their representation.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction {
    grid: GridSpec,
    rep: Representation,
    values: Vec<C>,
}

impl Wavefunction {
    pub fn new(grid: &GridSpec, rep: Representation, values: Vec<C>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid: grid.clone(), rep, values })
    }

    pub fn zeros(grid: &GridSpec, rep: Representation) -> Self {
        Self { grid: grid.clone(), rep, values: vec![C::default(); grid.len()] }
    }

    /// Samples `f` at every position. On the radial grid `f` receives `r` and
    /// must return `u = rψ`.
    pub fn from_position_fn<F: FnMut(&[f64]) -> C>(grid: &GridSpec, mut f: F) -> Self {
        let mut values = vec![C::default(); grid.len()];
        grid.for_each_position(|i, x| values[i] = f(x));
        Self { grid: grid.clone(), rep: Representation::Position, values }
    }

    /// Samples `f` at every momentum mode.
    pub fn from_momentum_fn<F: FnMut(&[f64]) -> C>(grid: &GridSpec, mut f: F) -> Self {
        let mut values = vec![C::default(); grid.len()];
        grid.for_each_momentum(|i, p| values[i] = f(p));
        Self { grid: grid.clone(), rep: Representation::Momentum, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn representation(&self) -> Representation {
        self.rep
    }

    pub fn values(&self) -> &[C] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C> {
        self.values
    }

    fn weight(&self) -> f64 {
        match self.rep {
            Representation::Position => self.grid.position_weight(),
            Representation::Momentum => self.grid.momentum_weight(),
        }
    }

    /// Weighted L² norm in the current representation.
    pub fn norm(&self) -> f64 {
        (self.weight() * compensated_sum(self.values.iter().map(|v| v.norm_sqr()))).sqrt()
    }

    /// Largest sample modulus.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Rescales to unit norm. Fails on the zero state.
    pub fn normalize(&mut self) -> Result<f64> {
        let n = self.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidArgument("cannot normalise a zero or non-finite state".into()));
        }
        self.scale(C::new(1.0 / n, 0.0));
        Ok(n)
    }

    pub fn scale(&mut self, s: C) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    /// `⟨self, other⟩`, antilinear in `self`. Both must share grid and
    /// representation.
    pub fn inner(&self, other: &Wavefunction) -> Result<C> {
        self.check_compatible(other)?;
        let re = compensated_sum(self.values.iter().zip(&other.values).map(|(a, b)| (a.conj() * b).re));
        let im = compensated_sum(self.values.iter().zip(&other.values).map(|(a, b)| (a.conj() * b).im));
        Ok(C::new(re, im) * self.weight())
    }

    /// `self + alpha * other`.
    pub fn axpy(&mut self, alpha: C, other: &Wavefunction) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        Ok(())
    }

    /// Norm of `self - other`, evaluated in the representation of `self`.
    pub fn distance(&self, other: &Wavefunction) -> Result<f64> {
        let other = other.to_representation(self.rep);
        let mut d = self.clone();
        d.axpy(C::new(-1.0, 0.0), &other)?;
        Ok(d.norm())
    }

    pub fn to_representation(&self, rep: Representation) -> Wavefunction {
        match rep {
            Representation::Position => self.to_position(),
            Representation::Momentum => self.to_momentum(),
        }
    }

    pub fn to_momentum(&self) -> Wavefunction {
        let mut w = self.clone();
        w.make_momentum();
        w
    }

    pub fn to_position(&self) -> Wavefunction {
        let mut w = self.clone();
        w.make_position();
        w
    }

    /// Transforms in place to the momentum representation.
    pub fn make_momentum(&mut self) {
        if self.rep == Representation::Position {
            self.grid.plans().forward(self.grid.dims(), &mut self.values);
            self.rep = Representation::Momentum;
        }
    }

    /// Transforms in place to the position representation.
    pub fn make_position(&mut self) {
        if self.rep == Representation::Momentum {
            self.grid.plans().inverse(self.grid.dims(), &mut self.values);
            self.rep = Representation::Position;
        }
    }

    /// Switches representation.
    pub fn transform(&self) -> Wavefunction {
        match self.rep {
            Representation::Position => self.to_momentum(),
            Representation::Momentum => self.to_position(),
        }
    }

    fn check_compatible(&self, other: &Wavefunction) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        if self.rep != other.rep {
            return Err(Error::GridMismatch("representations differ".into()));
        }
        Ok(())
    }
}
