//! Randomised checks of the operator inequalities on sampled lattice states.
//!
//! Every audit maps a state to a ratio and compares it with a bound. Ratios
//! for inequalities that hold mode by mode on the lattice are checked with
//! margin 1; continuum constants get a configurable lattice margin.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::C_HLS3;
use crate::cutoff::{cutoff_constants, vreg_pointwise_bounds, CutoffProfile};
use crate::error::{invalid, Error, Result};
use crate::operators::{sample_coulomb_pairwise, PairCoefficients};
use crate::quadrature::{compensated_sum, integrate_adaptive};
use crate::spectral::{GridKind, GridSpec, Representation, Wavefunction};
use crate::Complex64 as C;

/// Relative slack for rounding in exact inequalities.
const ROUNDING: f64 = 64.0 * f64::EPSILON;

#[derive(Debug, Clone)]
pub struct AuditConfig {
    pub seed: u64,
    pub samples: usize,
    pub grid: GridSpec,
    pub spectral_decay: f64,
    pub margin: f64,
}

impl AuditConfig {
    pub fn new(grid: GridSpec, seed: u64) -> Self {
        Self { seed, samples: 500, grid, spectral_decay: 4.0, margin: 1.05 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(invalid("audit needs at least one sample"));
        }
        if !(self.margin >= 1.0 && self.margin.is_finite()) {
            return Err(invalid(format!("audit margin must be >= 1, got {}", self.margin)));
        }
        if !(self.spectral_decay >= 0.0 && self.spectral_decay.is_finite()) {
            return Err(invalid("spectral decay must be finite and non-negative"));
        }
        Ok(())
    }
}

/// DC-free normalised state with momentum coefficients
/// `z · (1 + |p|²)^{-decay/2}`, `z` complex Gaussian. Sample `index` draws
/// from its own ChaCha stream, so states do not depend on evaluation order.
pub fn random_state(config: &AuditConfig, index: usize) -> Result<Wavefunction> {
    let grid = &config.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    let mut values = vec![C::default(); grid.len()];
    grid.for_each_momentum(|i, p| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        let p2: f64 = p.iter().map(|x| x * x).sum();
        values[i] = C::new(re, im) * (1.0 + p2).powf(-0.5 * config.spectral_decay);
    });
    if let Some(dc) = grid.dc_index() {
        values[dc] = C::default();
    }
    let mut psi = Wavefunction::new(grid, Representation::Momentum, values)?;
    psi.normalize()?;
    Ok(psi)
}

/// `A = M_x F⁻¹ M_p F`: a momentum multiplier followed by a position
/// multiplier, both real.
#[derive(Debug, Clone)]
pub struct SandwichOperator {
    grid: GridSpec,
    momentum: Vec<f64>,
    position: Vec<f64>,
}

fn inverse_momentum_table(grid: &GridSpec) -> Vec<f64> {
    let mut m: Vec<f64> = grid.momentum_sq_table().into_iter().map(|k| 1.0 / k.sqrt()).collect();
    if let Some(dc) = grid.dc_index() {
        m[dc] = 0.0;
    }
    m
}

impl SandwichOperator {
    /// `(1/|x|)(1/|p|)` on an offset cartesian grid.
    pub fn hardy(grid: &GridSpec) -> Result<Self> {
        if grid.kind() != GridKind::Cartesian3d || !grid.is_offset() {
            return Err(invalid("hardy audit needs an offset cartesian-3d grid"));
        }
        let mut position = vec![0.0; grid.len()];
        grid.for_each_position(|i, x| position[i] = 1.0 / x.iter().map(|v| v * v).sum::<f64>().sqrt());
        Ok(Self { grid: grid.clone(), momentum: inverse_momentum_table(grid), position })
    }

    /// `V (1/|p|)` with the pairwise Coulomb potential on a tensor grid.
    pub fn nbody(grid: &GridSpec, coefficients: &PairCoefficients) -> Result<Self> {
        if !matches!(grid.kind(), GridKind::Tensor { .. }) {
            return Err(invalid("n-body audit needs a tensor grid"));
        }
        let v = sample_coulomb_pairwise(coefficients, grid)?;
        Ok(Self { grid: grid.clone(), momentum: inverse_momentum_table(grid), position: v.values().to_vec() })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// `A f` in the position representation.
    pub fn apply(&self, f: &Wavefunction) -> Result<Wavefunction> {
        self.grid.check_same(f.grid())?;
        let mut g = f.to_momentum();
        for (v, m) in g.values_mut().iter_mut().zip(&self.momentum) {
            *v *= m;
        }
        g.make_position();
        for (v, m) in g.values_mut().iter_mut().zip(&self.position) {
            *v *= m;
        }
        Ok(g)
    }

    /// `A* g` in the momentum representation.
    fn adjoint_apply(&self, g: &Wavefunction) -> Wavefunction {
        let mut h = g.to_position();
        for (v, m) in h.values_mut().iter_mut().zip(&self.position) {
            *v *= m;
        }
        h.make_momentum();
        for (v, m) in h.values_mut().iter_mut().zip(&self.momentum) {
            *v *= m;
        }
        h
    }

    /// `‖A f‖ / ‖f‖`.
    pub fn ratio(&self, f: &Wavefunction) -> Result<f64> {
        let n = f.norm();
        if n == 0.0 {
            return Err(invalid("ratio of the zero state"));
        }
        Ok(self.apply(f)?.norm() / n)
    }

    /// Largest singular value of the lattice operator by power iteration on
    /// `A*A`, started from `start`.
    pub fn power_norm(&self, start: &Wavefunction, max_iter: usize, tol: f64) -> Result<PowerIteration> {
        let mut v = start.to_momentum();
        v.normalize()?;
        let mut sigma = 0.0;
        for iter in 1..=max_iter {
            let w = self.adjoint_apply(&self.apply(&v)?);
            let s2 = w.norm();
            if s2 == 0.0 {
                return Ok(PowerIteration { norm: 0.0, iterations: iter, converged: true });
            }
            let next = s2.sqrt();
            v = w;
            v.scale(C::new(1.0 / s2, 0.0));
            if (next - sigma).abs() <= tol * next {
                return Ok(PowerIteration { norm: next, iterations: iter, converged: true });
            }
            sigma = next;
        }
        Ok(PowerIteration { norm: sigma, iterations: max_iter, converged: false })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerIteration {
    pub norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `‖(1/|x|)(1/|p|) f‖ / ‖f‖`.
pub fn hardy_ratio(f: &Wavefunction) -> Result<f64> {
    SandwichOperator::hardy(f.grid())?.ratio(f)
}

/// `‖V (1/|p|) f‖ / ‖f‖` for the pairwise Coulomb potential.
pub fn nbody_potential_ratio(f: &Wavefunction, coefficients: &PairCoefficients) -> Result<f64> {
    SandwichOperator::nbody(f.grid(), coefficients)?.ratio(f)
}

/// `2 c₀ N^{3/2}`.
pub fn nbody_potential_bound(coefficients: &PairCoefficients) -> f64 {
    C_HLS3 * coefficients.c0() * (coefficients.particles() as f64).powf(1.5)
}

fn require_tensor(grid: &GridSpec, particles: Option<usize>) -> Result<usize> {
    match grid.kind() {
        GridKind::Tensor { particles: n } if particles.is_none_or(|want| want == n) => Ok(n),
        k => Err(invalid(format!("audit needs a tensor grid{}, got {k:?}", match particles {
            Some(n) => format!(" with {n} particles"),
            None => String::new(),
        }))),
    }
}

/// Both sides of the mixed-derivative inequality for one pair of modes:
/// `(η_j − ζ_j)² |η|² / 4` and `(3/4)|η|⁴ + (1/4)|ζ|⁴`.
pub fn mixed_derivative_mode(eta: &[f64], zeta: &[f64], j: usize) -> (f64, f64) {
    let e2: f64 = eta.iter().map(|x| x * x).sum();
    let z2: f64 = zeta.iter().map(|x| x * x).sum();
    let d = eta[j] - zeta[j];
    (0.25 * d * d * e2, 0.75 * e2 * e2 + 0.25 * z2 * z2)
}

/// `max_j ‖|p_y| ∂_{y_j − z_j} g‖² / ((3/4)‖|p_y|²g‖² + (1/4)‖|p_z|²g‖²)` on a
/// two-particle tensor grid, with `∂_{y_j−z_j}` the multiplier `i(η_j − ζ_j)/2`.
pub fn mixed_derivative_ratio(g: &Wavefunction) -> Result<f64> {
    let grid = g.grid();
    require_tensor(grid, Some(2))?;
    let w = g.to_momentum();
    let vals = w.values();
    let mut lhs = [0.0f64; 3];
    let mut rhs = 0.0;
    grid.for_each_momentum(|i, p| {
        let a = vals[i].norm_sqr();
        for (j, l) in lhs.iter_mut().enumerate() {
            let (x, r) = mixed_derivative_mode(&p[..3], &p[3..], j);
            *l += x * a;
            if j == 0 {
                rhs += r * a;
            }
        }
    });
    if rhs == 0.0 {
        return Ok(0.0);
    }
    Ok(lhs.iter().copied().fold(0.0, f64::max) / rhs)
}

/// `Σ_{j<k}(‖⟨p_j⟩²f‖ + ‖⟨p_k⟩²f‖)` over
/// `(N−1)N^{3/2}‖f‖ + (N−1)N^{1/2}‖(−Δ)f‖`.
pub fn momentum_counting_ratio(f: &Wavefunction) -> Result<f64> {
    let grid = f.grid();
    let n = require_tensor(grid, None)?;
    if n < 2 {
        return Err(invalid("momentum counting needs at least two particles"));
    }
    let w = f.to_momentum();
    let vals = w.values();
    let mut per_particle = vec![Vec::with_capacity(grid.len()); n];
    let mut lap = Vec::with_capacity(grid.len());
    let mut mass = Vec::with_capacity(grid.len());
    grid.for_each_momentum(|i, p| {
        let a = vals[i].norm_sqr();
        let mut total = 0.0;
        for (j, acc) in per_particle.iter_mut().enumerate() {
            let pj: f64 = p[3 * j..3 * j + 3].iter().map(|x| x * x).sum();
            total += pj;
            acc.push((1.0 + pj).powi(2) * a);
        }
        lap.push(total * total * a);
        mass.push(a);
    });
    let wt = grid.momentum_weight();
    let bracket: f64 = per_particle.into_iter().map(|v| (compensated_sum(v) * wt).sqrt()).sum();
    let nf = n as f64;
    let lhs = (nf - 1.0) * bracket;
    let norm = (compensated_sum(mass) * wt).sqrt();
    let lap_norm = (compensated_sum(lap) * wt).sqrt();
    let rhs = (nf - 1.0) * nf.powf(1.5) * norm + (nf - 1.0) * nf.sqrt() * lap_norm;
    if rhs == 0.0 {
        return Ok(0.0);
    }
    Ok(lhs / rhs)
}

/// `1/(2√π)`.
pub fn sobolev_bound() -> f64 {
    0.5 / PI.sqrt()
}

/// `‖f‖_∞ / ‖⟨p⟩² f‖` on a cartesian-3d grid.
pub fn sobolev_embedding_ratio(f: &Wavefunction) -> Result<f64> {
    let grid = f.grid();
    if grid.kind() != GridKind::Cartesian3d {
        return Err(invalid("sobolev audit needs a cartesian-3d grid"));
    }
    let w = f.to_momentum();
    let p2 = grid.momentum_sq_table();
    let s = compensated_sum(w.values().iter().zip(&p2).map(|(v, &k)| (1.0 + k).powi(2) * v.norm_sqr()));
    let denom = (s * grid.momentum_weight()).sqrt();
    if denom == 0.0 {
        return Err(invalid("ratio of the zero state"));
    }
    Ok(f.to_position().sup_norm() / denom)
}

/// `‖⟨y⟩⁻²‖_{L²(ℝ³)}` by quadrature in `θ = arctan |y|`, where the radial
/// integrand `4π r²/(1+r²)²` becomes `4π sin²θ`.
pub fn y_bracket_norm() -> Result<f64> {
    let i = integrate_adaptive(|t: f64| 4.0 * PI * t.sin().powi(2), 0.0, 0.5 * PI, 1e-14, 0.0)?;
    Ok(i.value.sqrt())
}

/// `√2 π`, the value used for `‖⟨y⟩⁻²‖` in the Sobolev constant.
pub fn y_bracket_bound() -> f64 {
    2f64.sqrt() * PI
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditStatus {
    Pass,
    Warn,
    Fail,
}

impl AuditStatus {
    pub fn classify(ratio: f64, bound: f64, margin: f64) -> Self {
        if !ratio.is_finite() {
            AuditStatus::Fail
        } else if ratio <= bound * (1.0 + ROUNDING) {
            AuditStatus::Pass
        } else if ratio <= bound * margin * (1.0 + ROUNDING) {
            AuditStatus::Warn
        } else {
            AuditStatus::Fail
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            AuditStatus::Pass => "pass",
            AuditStatus::Warn => "warn",
            AuditStatus::Fail => "fail",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub audit: String,
    pub sample: usize,
    pub ratio: f64,
    pub bound: f64,
    pub margin: f64,
    pub status: AuditStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub audit: String,
    pub samples: usize,
    pub max_ratio: f64,
    pub worst_sample: usize,
    pub bound: f64,
    pub margin: f64,
    pub status: AuditStatus,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub records: Vec<AuditRecord>,
    pub summaries: Vec<AuditSummary>,
}

impl AuditReport {
    pub fn status(&self) -> AuditStatus {
        self.summaries.iter().map(|s| s.status).max().unwrap_or(AuditStatus::Pass)
    }

    pub fn summary(&self, audit: &str) -> Option<&AuditSummary> {
        self.summaries.iter().find(|s| s.audit == audit)
    }

    pub fn merge(&mut self, other: AuditReport) {
        self.records.extend(other.records);
        self.summaries.extend(other.summaries);
    }

    fn push(&mut self, audit: &str, ratios: &[f64], bound: f64, margin: f64) {
        let mut worst = 0;
        for (i, &r) in ratios.iter().enumerate() {
            if r > ratios[worst] || !r.is_finite() {
                worst = i;
            }
            self.records.push(AuditRecord {
                audit: audit.to_string(),
                sample: i,
                ratio: r,
                bound,
                margin,
                status: AuditStatus::classify(r, bound, margin),
            });
        }
        let max_ratio = ratios.get(worst).copied().unwrap_or(0.0);
        self.summaries.push(AuditSummary {
            audit: audit.to_string(),
            samples: ratios.len(),
            max_ratio,
            worst_sample: worst,
            bound,
            margin,
            status: AuditStatus::classify(max_ratio, bound, margin),
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditName {
    Hardy,
    HardyScaling,
    NbodyPotential,
    PowerIteration,
    MixedDerivative,
    MomentumCounting,
    Sobolev,
    YBracket,
    Vreg,
}

impl AuditName {
    pub const ALL: [AuditName; 9] = [
        AuditName::Hardy,
        AuditName::HardyScaling,
        AuditName::NbodyPotential,
        AuditName::PowerIteration,
        AuditName::MixedDerivative,
        AuditName::MomentumCounting,
        AuditName::Sobolev,
        AuditName::YBracket,
        AuditName::Vreg,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AuditName::Hardy => "hardy",
            AuditName::HardyScaling => "hardy_scaling",
            AuditName::NbodyPotential => "nbody_potential",
            AuditName::PowerIteration => "power_iteration",
            AuditName::MixedDerivative => "mixed_derivative",
            AuditName::MomentumCounting => "momentum_counting",
            AuditName::Sobolev => "sobolev",
            AuditName::YBracket => "y_bracket",
            AuditName::Vreg => "vreg",
        }
    }
}

impl fmt::Display for AuditName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AuditName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AuditName::ALL.into_iter().find(|a| a.as_str() == s).ok_or_else(|| {
            let known: Vec<&str> = AuditName::ALL.iter().map(|a| a.as_str()).collect();
            invalid(format!("unknown audit {s:?}; known audits: {}", known.join(", ")))
        })
    }
}

/// Settings shared by a batch of audits. Grids are built per audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditSuite {
    /// Taken from the run seed, not from the config section.
    #[serde(skip)]
    pub seed: u64,
    pub samples: usize,
    pub spectral_decay: f64,
    pub margin: f64,
    /// Points per axis and half-width of the cartesian grid.
    pub cartesian_points: usize,
    pub cartesian_extent: f64,
    /// Particle count and pair coefficients (row-major `j < k`) of the tensor audits.
    pub particles: usize,
    pub pair_coefficients: Option<Vec<f64>>,
    pub tensor_points: Option<usize>,
    pub tensor_extent: f64,
    /// Sizes for the scaling family of the Hardy audit.
    pub scaling_points: usize,
    pub scaling_extent: f64,
    pub scaling_drift: f64,
    /// Cutoff audit parameters.
    pub vreg_s: f64,
    pub vreg_beta: f64,
}

impl Default for AuditSuite {
    fn default() -> Self {
        Self {
            seed: 1,
            samples: 500,
            spectral_decay: 4.0,
            margin: 1.05,
            cartesian_points: 32,
            cartesian_extent: 8.0,
            particles: 2,
            pair_coefficients: None,
            tensor_points: None,
            tensor_extent: 4.0,
            scaling_points: 64,
            scaling_extent: 12.0,
            scaling_drift: 0.05,
            vreg_s: 0.5,
            vreg_beta: 0.5,
        }
    }
}

impl AuditSuite {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(invalid("audit needs at least one sample"));
        }
        if !(self.margin >= 1.0 && self.margin.is_finite()) {
            return Err(invalid(format!("audit margin must be >= 1, got {}", self.margin)));
        }
        if !(2..=3).contains(&self.particles) {
            return Err(invalid(format!("tensor audits support N = 2 or 3, got {}", self.particles)));
        }
        Ok(())
    }

    pub fn cartesian_grid(&self) -> Result<GridSpec> {
        let n = self.cartesian_points;
        let a = self.cartesian_extent;
        GridSpec::new(GridKind::Cartesian3d, &[n; 3], &[a; 3], true)
    }

    pub fn tensor_grid(&self, particles: usize) -> Result<GridSpec> {
        let n = self.tensor_points.unwrap_or(if particles == 2 { 8 } else { 4 });
        let axes = 3 * particles;
        GridSpec::new(GridKind::Tensor { particles }, &vec![n; axes], &vec![self.tensor_extent; axes], true)
    }

    pub fn coefficients(&self) -> Result<PairCoefficients> {
        match &self.pair_coefficients {
            Some(c) => PairCoefficients::new(self.particles, c.clone()),
            None => PairCoefficients::uniform(self.particles, 1.0),
        }
    }

    fn config(&self, grid: GridSpec, samples: usize, seed_offset: u64) -> AuditConfig {
        AuditConfig {
            seed: self.seed.wrapping_add(seed_offset),
            samples,
            grid,
            spectral_decay: self.spectral_decay,
            margin: self.margin,
        }
    }

    /// State sampled by `audit` at `sample`, for persisting offending inputs.
    pub fn state_for(&self, audit: AuditName, sample: usize) -> Result<Option<Wavefunction>> {
        let cfg = match audit {
            AuditName::Hardy | AuditName::Sobolev => self.config(self.cartesian_grid()?, self.samples, audit_stream(audit)),
            AuditName::NbodyPotential | AuditName::MomentumCounting | AuditName::PowerIteration => {
                self.config(self.tensor_grid(self.particles)?, self.samples, audit_stream(audit))
            }
            AuditName::MixedDerivative => self.config(self.tensor_grid(2)?, self.samples, audit_stream(audit)),
            _ => return Ok(None),
        };
        random_state(&cfg, sample).map(Some)
    }

    pub fn run(&self, audit: AuditName) -> Result<AuditReport> {
        self.validate()?;
        let mut report = AuditReport::default();
        let name = audit.as_str();
        let margin = self.margin;
        match audit {
            AuditName::Hardy => {
                let cfg = self.config(self.cartesian_grid()?, self.samples, audit_stream(audit));
                let op = SandwichOperator::hardy(&cfg.grid)?;
                let ratios = sample_ratios(&cfg, |f| op.ratio(f))?;
                report.push(name, &ratios, C_HLS3, margin);
            }
            AuditName::HardyScaling => {
                let s = hardy_scaling_family(self.scaling_points, self.scaling_extent)?;
                report.push(name, &[s.drift], self.scaling_drift, 1.0);
            }
            AuditName::NbodyPotential => {
                let cfg = self.config(self.tensor_grid(self.particles)?, self.samples, audit_stream(audit));
                let coeffs = self.coefficients()?;
                let op = SandwichOperator::nbody(&cfg.grid, &coeffs)?;
                let ratios = sample_ratios(&cfg, |f| op.ratio(f))?;
                report.push(name, &ratios, nbody_potential_bound(&coeffs), margin);
            }
            AuditName::PowerIteration => {
                if self.particles != 2 {
                    return Err(invalid("power iteration cross-check runs only for N = 2"));
                }
                let cfg = self.config(self.tensor_grid(2)?, 1, audit_stream(audit));
                let coeffs = self.coefficients()?;
                let op = SandwichOperator::nbody(&cfg.grid, &coeffs)?;
                let p = op.power_norm(&random_state(&cfg, 0)?, 500, 1e-8)?;
                report.push(name, &[p.norm], nbody_potential_bound(&coeffs), margin);
            }
            AuditName::MixedDerivative => {
                let cfg = self.config(self.tensor_grid(2)?, self.samples.min(200), audit_stream(audit));
                let ratios = sample_ratios(&cfg, mixed_derivative_ratio)?;
                report.push(name, &ratios, 1.0, 1.0);
            }
            AuditName::MomentumCounting => {
                let cfg = self.config(self.tensor_grid(self.particles)?, self.samples.min(200), audit_stream(audit));
                let ratios = sample_ratios(&cfg, momentum_counting_ratio)?;
                report.push(name, &ratios, 1.0, 1.0);
            }
            AuditName::Sobolev => {
                let cfg = self.config(self.cartesian_grid()?, self.samples, audit_stream(audit));
                let ratios = sample_ratios(&cfg, sobolev_embedding_ratio)?;
                report.push(name, &ratios, sobolev_bound(), margin);
            }
            AuditName::YBracket => {
                report.push(name, &[y_bracket_norm()?], y_bracket_bound(), 1.0);
            }
            AuditName::Vreg => {
                let profile = CutoffProfile::build(crate::cutoff::MIN_RESOLUTION * 10)?;
                let k = cutoff_constants(&profile);
                let a = vreg_pointwise_bounds(&profile, k.c_f1, k.c_f2, self.vreg_s, self.vreg_beta, self.samples.max(100) * 20, self.seed)?;
                report.push("vreg_laplacian", &[a.worst_laplacian_ratio], 1.0, 1.0);
                report.push("vreg_gradient", &[a.worst_gradient_ratio], 1.0, 1.0);
                report.push("vreg_inside", &[a.inside_max], 0.0, 1.0);
            }
        }
        Ok(report)
    }
}

fn audit_stream(audit: AuditName) -> u64 {
    // Distinct seeds per audit so that no two audits share states.
    (AuditName::ALL.iter().position(|a| *a == audit).unwrap_or(0) as u64) << 32
}

fn sample_ratios<F>(cfg: &AuditConfig, f: F) -> Result<Vec<f64>>
where
    F: Fn(&Wavefunction) -> Result<f64> + Sync,
{
    cfg.validate()?;
    (0..cfg.samples).into_par_iter().map(|i| f(&random_state(cfg, i)?)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFamily {
    pub lambdas: Vec<f64>,
    pub ratios: Vec<f64>,
    /// `max/min − 1` over the family.
    pub drift: f64,
}

/// Hardy ratio of `f_λ(x) = λ^{3/2} f(λx)` for `λ ∈ [1/2, 2]`, with
/// `f(x) = (x₁ + x₂/2 + x₁x₃) e^{-|x|²/2}`.
pub fn hardy_scaling_family(points: usize, extent: f64) -> Result<ScalingFamily> {
    let grid = GridSpec::new(GridKind::Cartesian3d, &[points; 3], &[extent; 3], true)?;
    let op = SandwichOperator::hardy(&grid)?;
    let lambdas: Vec<f64> = (-2..=2).map(|k| 2f64.powf(k as f64 / 2.0)).collect();
    let ratios = lambdas
        .iter()
        .map(|&l| {
            let mut f = Wavefunction::from_position_fn(&grid, |x| {
                let y = [l * x[0], l * x[1], l * x[2]];
                let r2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
                C::new(l.powf(1.5) * (y[0] + 0.5 * y[1] + y[0] * y[2]) * (-0.5 * r2).exp(), 0.0)
            });
            f.make_momentum();
            f.values_mut()[0] = C::default();
            op.ratio(&f)
        })
        .collect::<Result<Vec<f64>>>()?;
    let max = ratios.iter().copied().fold(f64::MIN, f64::max);
    let min = ratios.iter().copied().fold(f64::MAX, f64::min);
    Ok(ScalingFamily { lambdas, ratios, drift: max / min - 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cart(n: usize, a: f64) -> GridSpec {
        GridSpec::new(GridKind::Cartesian3d, &[n; 3], &[a; 3], true).unwrap()
    }

    fn tensor(particles: usize, n: usize) -> GridSpec {
        let axes = 3 * particles;
        GridSpec::new(GridKind::Tensor { particles }, &vec![n; axes], &vec![4.0; axes], true).unwrap()
    }

    #[test]
    fn random_state_is_deterministic_dc_free_and_normalised() {
        let cfg = AuditConfig::new(cart(16, 6.0), 42);
        let a = random_state(&cfg, 3).unwrap();
        let b = random_state(&cfg, 3).unwrap();
        assert_eq!(a.values(), b.values());
        assert_eq!(a.values()[0], C::default());
        assert!((a.norm() - 1.0).abs() < 1e-12);
        assert_ne!(random_state(&cfg, 4).unwrap().values(), a.values());
        assert!(crate::operators::h2_norm(&a).is_finite());
    }

    #[test]
    fn hardy_plane_wave_matches_direct_evaluation() {
        let g = cart(16, 6.0);
        let (k, axis_mode) = (6usize, 6usize);
        let xi = g.momentum_coordinate(0, axis_mode);
        let f = Wavefunction::from_position_fn(&g, |x| C::from_polar(1.0, xi * x[0]));
        // (1/|p|) e^{iξx} = e^{iξx}/|ξ|, so the ratio is ‖1/|x|‖ / (|ξ| √vol).
        let mut inv_x = 0.0;
        g.for_each_position(|_, x| inv_x += 1.0 / x.iter().map(|v| v * v).sum::<f64>());
        let vol = (2.0 * 6.0f64).powi(3);
        let want = (inv_x * g.position_weight()).sqrt() / (xi * vol.sqrt());
        let got = hardy_ratio(&f).unwrap();
        assert!((got - want).abs() < 1e-10 * want, "{got} vs {want} (mode {k})");
        assert!(got < 1.0);
    }

    #[test]
    fn hardy_random_states_below_constant() {
        let suite = AuditSuite { samples: 40, ..AuditSuite::default() };
        let r = suite.run(AuditName::Hardy).unwrap();
        let s = r.summary("hardy").unwrap();
        assert_eq!(s.status, AuditStatus::Pass);
        assert!(s.max_ratio > 0.1 && s.max_ratio <= 2.0, "{}", s.max_ratio);
    }

    #[test]
    fn hardy_scaling_family_drift_small() {
        let s = hardy_scaling_family(64, 12.0).unwrap();
        assert!(s.drift < 0.05, "{:?}", s.ratios);
    }

    #[test]
    fn nbody_zero_coefficients_give_zero() {
        let g = tensor(2, 8);
        let cfg = AuditConfig::new(g, 7);
        let f = random_state(&cfg, 0).unwrap();
        let zero = PairCoefficients::uniform(2, 0.0).unwrap();
        assert_eq!(nbody_potential_ratio(&f, &zero).unwrap(), 0.0);
        let one = PairCoefficients::uniform(2, 1.0).unwrap();
        let r = nbody_potential_ratio(&f, &one).unwrap();
        assert!(r > 0.0 && r <= 2.0, "{r}");
        assert!((nbody_potential_bound(&one) - 2.0 * 8f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn power_iteration_dominates_samples() {
        let g = tensor(2, 8);
        let cfg = AuditConfig::new(g.clone(), 11);
        let coeffs = PairCoefficients::uniform(2, 1.0).unwrap();
        let op = SandwichOperator::nbody(&g, &coeffs).unwrap();
        let p = op.power_norm(&random_state(&cfg, 0).unwrap(), 500, 1e-8).unwrap();
        let sample = op.ratio(&random_state(&cfg, 1).unwrap()).unwrap();
        assert!(p.norm >= sample * (1.0 - 1e-9));
        assert!(p.norm <= nbody_potential_bound(&coeffs), "{p:?}");
    }

    #[test]
    fn mixed_derivative_modewise() {
        // Equality at η = e_j|k|, ζ = −η.
        let (l, r) = mixed_derivative_mode(&[2.0, 0.0, 0.0], &[-2.0, 0.0, 0.0], 0);
        assert!((l - r).abs() < 1e-12);
        let (l, r) = mixed_derivative_mode(&[1.0, 2.0, -1.0], &[0.0, 0.0, 0.0], 1);
        assert!(l < r);
        assert!((l - 0.25 * 4.0 * 6.0).abs() < 1e-12);
    }

    #[test]
    fn mixed_derivative_single_mode_state() {
        let g = tensor(2, 8);
        let mut psi = Wavefunction::zeros(&g, Representation::Momentum);
        // Mode with η = (1,0,0)Δp, ζ = (−1,0,0)Δp.
        let n = 8usize;
        let idx = (n * n * n + (n - 1)) * n * n;
        psi.values_mut()[idx] = C::new(1.0, 0.0);
        let r = mixed_derivative_ratio(&psi).unwrap();
        assert!((r - 1.0).abs() < 1e-12, "{r}");
    }

    #[test]
    fn momentum_counting_two_body_matches_formula() {
        let g = tensor(2, 8);
        let cfg = AuditConfig::new(g.clone(), 5);
        let f = random_state(&cfg, 0).unwrap();
        let w = f.to_momentum();
        let p1 = g.particle_momentum_sq_table(0).unwrap();
        let p2 = g.particle_momentum_sq_table(1).unwrap();
        let wt = g.momentum_weight();
        let norm_with = |m: &dyn Fn(usize) -> f64| {
            (w.values().iter().enumerate().map(|(i, v)| m(i).powi(2) * v.norm_sqr()).sum::<f64>() * wt).sqrt()
        };
        let lhs = norm_with(&|i| 1.0 + p1[i]) + norm_with(&|i| 1.0 + p2[i]);
        let rhs = 2.0 * 2f64.sqrt() * norm_with(&|_| 1.0) + 2f64.sqrt() * norm_with(&|i| p1[i] + p2[i]);
        let r = momentum_counting_ratio(&f).unwrap();
        assert!((r - lhs / rhs).abs() < 1e-12);
        assert!(r < 1.0);
    }

    #[test]
    fn momentum_counting_product_state_is_tight_in_the_kinetic_term() {
        let g = tensor(2, 8);
        // Identical single-mode particles: ‖|p_j|²f‖ equal, so the
        // Cauchy–Schwarz step in the kinetic term is an equality.
        let mut psi = Wavefunction::zeros(&g, Representation::Momentum);
        let n = 8usize;
        let idx = (3 * n * n * n + 3) * n * n;
        psi.values_mut()[idx] = C::new(1.0, 0.0);
        let dp = g.momentum_spacing(0);
        let k2 = 9.0 * dp * dp;
        let want = 2.0 * (1.0 + k2) / (2.0 * 2f64.sqrt() + 2f64.sqrt() * 2.0 * k2);
        assert!((momentum_counting_ratio(&psi).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn sobolev_gaussian_below_bound() {
        let g = cart(32, 8.0);
        let f = Wavefunction::from_position_fn(&g, |x| C::new((-0.5 * x.iter().map(|v| v * v).sum::<f64>()).exp(), 0.0));
        let r = sobolev_embedding_ratio(&f).unwrap();
        assert!(r > 0.0 && r < sobolev_bound(), "{r}");
        assert!((sobolev_bound() - 0.282_094_791_773_878_1).abs() < 1e-15);
    }

    #[test]
    fn y_bracket_quadrature() {
        let v = y_bracket_norm().unwrap();
        assert!((v - PI).abs() < 1e-12, "{v}");
        assert!(v < y_bracket_bound());
    }

    #[test]
    fn status_classification() {
        assert_eq!(AuditStatus::classify(1.0, 1.0, 1.0), AuditStatus::Pass);
        assert_eq!(AuditStatus::classify(2.05, 2.0, 1.05), AuditStatus::Warn);
        assert_eq!(AuditStatus::classify(2.2, 2.0, 1.05), AuditStatus::Fail);
        assert_eq!(AuditStatus::classify(f64::NAN, 2.0, 1.05), AuditStatus::Fail);
    }

    #[test]
    fn unknown_audit_name_rejected() {
        assert!("hardy".parse::<AuditName>().is_ok());
        let e = "bogus".parse::<AuditName>().unwrap_err().to_string();
        assert!(e.contains("bogus") && e.contains("sobolev"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]
        #[test]
        fn mixed_derivative_holds_modewise(
            eta in proptest::array::uniform3(-50.0f64..50.0),
            zeta in proptest::array::uniform3(-50.0f64..50.0),
            j in 0usize..3,
        ) {
            let (l, r) = mixed_derivative_mode(&eta, &zeta, j);
            prop_assert!(l <= r * (1.0 + 1e-12));
        }

        #[test]
        fn momentum_counting_holds_for_random_states(seed in 0u64..1000, decay in 0.0f64..6.0) {
            let mut cfg = AuditConfig::new(tensor(3, 4), seed);
            cfg.spectral_decay = decay;
            let f = random_state(&cfg, 0).unwrap();
            prop_assert!(momentum_counting_ratio(&f).unwrap() <= 1.0);
        }
    }
}
