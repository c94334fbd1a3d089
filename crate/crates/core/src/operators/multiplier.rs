use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C;

use crate::error::{Error, Result};
use crate::spectral::{GridSpec, Wavefunction};

type Symbol = dyn Fn(&[f64]) -> C + Send + Sync;

/// A function of the momentum lattice point, applied diagonally in the
/// momentum representation.
#[derive(Clone)]
pub struct FourierMultiplier {
    label: String,
    symbol: Arc<Symbol>,
    dc: Option<C>,
}

impl fmt::Debug for FourierMultiplier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierMultiplier").field("label", &self.label).field("dc", &self.dc).finish()
    }
}

impl FourierMultiplier {
    pub fn new<F>(label: impl Into<String>, symbol: F) -> Self
    where
        F: Fn(&[f64]) -> C + Send + Sync + 'static,
    {
        Self { label: label.into(), symbol: Arc::new(symbol), dc: None }
    }

    /// Value used at the zero-frequency mode instead of the symbol.
    pub fn with_dc(mut self, value: C) -> Self {
        self.dc = Some(value);
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, p: &[f64]) -> C {
        (self.symbol)(p)
    }

    /// Evaluates the symbol on every lattice mode. Fails if a value is not
    /// finite, unless it sits at the DC mode and a DC value was supplied.
    pub fn tabulate(&self, grid: &GridSpec) -> Result<MultiplierTable> {
        let dc = grid.dc_index();
        let mut values = vec![C::default(); grid.len()];
        let mut bad = None;
        grid.for_each_momentum(|i, p| {
            if Some(i) == dc {
                if let Some(v) = self.dc {
                    values[i] = v;
                    return;
                }
            }
            let v = (self.symbol)(p);
            if !(v.re.is_finite() && v.im.is_finite()) && bad.is_none() {
                bad = Some(i);
            }
            values[i] = v;
        });
        match bad {
            Some(index) => Err(Error::NonFiniteSymbol { index }),
            None => Ok(MultiplierTable { grid: grid.clone(), values }),
        }
    }
}

/// A multiplier evaluated on one grid.
#[derive(Debug, Clone)]
pub struct MultiplierTable {
    grid: GridSpec,
    values: Vec<C>,
}

impl MultiplierTable {
    pub fn from_values(grid: &GridSpec, values: Vec<C>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch("multiplier table length".into()));
        }
        Ok(Self { grid: grid.clone(), values })
    }

    pub fn values(&self) -> &[C] {
        &self.values
    }

    /// Multiplies a momentum-space state in place; transforms first if
    /// needed.
    pub fn apply_in_place(&self, psi: &mut Wavefunction) -> Result<()> {
        self.grid.check_same(psi.grid())?;
        psi.make_momentum();
        for (v, m) in psi.values_mut().iter_mut().zip(&self.values) {
            *v *= m;
        }
        Ok(())
    }

    pub fn apply(&self, psi: &Wavefunction) -> Result<Wavefunction> {
        let mut out = psi.clone();
        self.apply_in_place(&mut out)?;
        Ok(out)
    }
}

/// Applies `m` to `psi`, returning the result in the momentum representation.
pub fn apply_multiplier(psi: &Wavefunction, m: &FourierMultiplier) -> Result<Wavefunction> {
    m.tabulate(psi.grid())?.apply(psi)
}

fn p2(p: &[f64]) -> f64 {
    p.iter().map(|x| x * x).sum()
}

/// `e^{-it|p|²}`.
pub fn kinetic_phase(t: f64) -> FourierMultiplier {
    FourierMultiplier::new(format!("exp(-i*{t}*|p|^2)"), move |p| C::from_polar(1.0, -t * p2(p)))
}

/// `|p|²`, the symbol of `-Δ`.
pub fn laplacian_symbol() -> FourierMultiplier {
    FourierMultiplier::new("|p|^2", |p| C::new(p2(p), 0.0))
}

/// `1/|p|` with the DC mode set to zero.
pub fn inverse_abs_momentum() -> FourierMultiplier {
    FourierMultiplier::new("1/|p|", |p| C::new(1.0 / p2(p).sqrt(), 0.0)).with_dc(C::default())
}
