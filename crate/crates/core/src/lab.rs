//! Convergence-rate studies over a step ladder, log-log fits and H² traces.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::ErrorBoundModel;
use crate::error::{invalid, Error, Result};
use crate::operators::{h2_norm, DiscreteHamiltonian, KrylovPropagator, Potential};
use crate::spectral::Wavefunction;
use crate::trotter::{lie_trotter_step, TrotterPlan};

/// Fits with `R²` below this are reported as unreliable.
pub const MIN_R_SQUARED: f64 = 0.9;
/// Errors at or below this are treated as exact.
pub const EXACT_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FitOutcome {
    Reliable(Fit),
    Unreliable(Fit),
    /// Every error is at the reference accuracy; no slope is meaningful.
    Exact,
}

impl FitOutcome {
    pub fn fit(&self) -> Option<&Fit> {
        match self {
            FitOutcome::Reliable(f) | FitOutcome::Unreliable(f) => Some(f),
            FitOutcome::Exact => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            FitOutcome::Reliable(_) => "reliable",
            FitOutcome::Unreliable(_) => "unreliable",
            FitOutcome::Exact => "exact",
        }
    }
}

/// Least-squares line through `(log t, log error)`.
pub fn fit_order(points: &[(f64, f64)]) -> Result<FitOutcome> {
    if points.len() < 4 {
        return Err(Error::DegenerateWindow(points.len()));
    }
    if points.iter().all(|&(_, e)| e.abs() <= EXACT_THRESHOLD) {
        return Ok(FitOutcome::Exact);
    }
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(t, e)| t > 0.0 && e > 0.0 && t.is_finite() && e.is_finite())
        .map(|&(t, e)| (t.ln(), e.ln()))
        .collect();
    if logs.len() < 4 {
        return Err(Error::DegenerateWindow(logs.len()));
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(invalid("fit needs at least two distinct step sizes"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let fit = Fit { slope, intercept, r_squared, points: logs.len() };
    Ok(if r_squared >= MIN_R_SQUARED { FitOutcome::Reliable(fit) } else { FitOutcome::Unreliable(fit) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Global,
    Local,
}

impl ErrorKind {
    pub fn label(&self) -> &'static str {
        match self {
            ErrorKind::Global => "global",
            ErrorKind::Local => "local",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub t: f64,
    pub error: f64,
    pub bound: f64,
    pub in_window: bool,
    pub kind: ErrorKind,
}

/// Which rows enter the fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowRule {
    /// Lower step limit, the crossover `2 / max|V|` for singular potentials.
    pub min_step: Option<f64>,
    /// Errors above this are outside the asymptotic regime.
    pub error_cap: f64,
}

impl WindowRule {
    pub fn for_potential(v: &Potential) -> Self {
        let min_step = v.is_singular().then(|| 2.0 / v.max_abs());
        Self { min_step, error_cap: 0.5 }
    }

    pub fn admits(&self, t: f64, error: f64) -> bool {
        self.min_step.is_none_or(|m| t >= m) && error <= self.error_cap
    }
}

/// Step ladder `t = 2^{-k}`, `k = k_min..=k_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ladder {
    pub k_min: u32,
    pub k_max: u32,
}

impl Default for Ladder {
    fn default() -> Self {
        Self { k_min: 3, k_max: 12 }
    }
}

impl Ladder {
    pub fn steps(&self) -> Result<Vec<f64>> {
        if self.k_min > self.k_max || self.k_max > 40 {
            return Err(invalid(format!("bad ladder 2^-{}..2^-{}", self.k_min, self.k_max)));
        }
        Ok((self.k_min..=self.k_max).map(|k| 0.5f64.powi(k as i32)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateStudyConfig {
    pub total_time: f64,
    pub ladder: Ladder,
    pub kinds: Vec<ErrorKind>,
    pub window: WindowRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindFit {
    pub kind: ErrorKind,
    /// `None` when the window holds fewer than four usable rows.
    pub outcome: Option<FitOutcome>,
    pub window_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateStudyResult {
    /// Grouped by kind, ascending in `t`.
    pub rows: Vec<RateRow>,
    pub fits: Vec<KindFit>,
    pub window: WindowRule,
    pub total_time: f64,
}

impl RateStudyResult {
    pub fn fit_for(&self, kind: ErrorKind) -> Option<&KindFit> {
        self.fits.iter().find(|f| f.kind == kind)
    }

    /// Every measured error is at most its bound plus the reference tolerance.
    pub fn bound_dominates(&self, slack: f64) -> bool {
        self.rows.iter().all(|r| r.error <= r.bound + slack)
    }
}

/// Runs the ladder for every requested error kind. Ladder points are
/// independent and run in parallel; results come back in ladder order.
pub fn rate_study(
    h: &DiscreteHamiltonian,
    psi0: &Wavefunction,
    config: &RateStudyConfig,
    bound: &ErrorBoundModel,
    reference: &KrylovPropagator,
) -> Result<RateStudyResult> {
    let steps = config.ladder.steps()?;
    let total = config.total_time;
    if !(total > 0.0 && total.is_finite()) {
        return Err(invalid("total time must be positive"));
    }
    let mut rows = Vec::new();
    for &kind in &config.kinds {
        let errors: Vec<f64> = match kind {
            ErrorKind::Global => {
                let exact = reference.propagate(h, total, psi0)?;
                steps
                    .par_iter()
                    .map(|&t| {
                        let l = (total / t).round() as usize;
                        let plan = TrotterPlan::new(h, total, l.max(1))?;
                        plan.evolve(psi0)?.distance(&exact)
                    })
                    .collect::<Result<_>>()?
            }
            ErrorKind::Local => steps
                .par_iter()
                .map(|&t| {
                    let split = lie_trotter_step(h, t, psi0)?;
                    split.distance(&reference.propagate(h, t, psi0)?)
                })
                .collect::<Result<_>>()?,
        };
        for (&t, &error) in steps.iter().zip(&errors) {
            let b = match kind {
                ErrorKind::Global => bound.global(total, t),
                ErrorKind::Local => bound.local(t),
            };
            rows.push(RateRow { t, error, bound: b, in_window: config.window.admits(t, error), kind });
        }
    }
    rows.sort_by(|a, b| a.kind.label().cmp(b.kind.label()).then(a.t.total_cmp(&b.t)));
    let fits = config
        .kinds
        .iter()
        .map(|&kind| {
            let pts: Vec<(f64, f64)> =
                rows.iter().filter(|r| r.kind == kind && r.in_window).map(|r| (r.t, r.error)).collect();
            let outcome = match fit_order(&pts) {
                Ok(o) => Some(o),
                Err(Error::DegenerateWindow(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(KindFit { kind, outcome, window_points: pts.len() })
        })
        .collect::<Result<_>>()?;
    Ok(RateStudyResult { rows, fits, window: config.window, total_time: total })
}

/// H² norm ratios `‖e^{-iτH}ψ₀‖_{H²} / ‖ψ₀‖_{H²}` at equally spaced times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H2Trace {
    pub times: Vec<f64>,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub bound: Option<f64>,
}

impl H2Trace {
    pub fn within_bound(&self) -> bool {
        self.bound.is_none_or(|b| self.max_ratio <= b)
    }
}

/// Samples the H² norm at `samples + 1` times `kT/samples`.
pub fn h2_trace(
    h: &DiscreteHamiltonian,
    psi0: &Wavefunction,
    total_time: f64,
    samples: usize,
    bound: Option<f64>,
    reference: &KrylovPropagator,
) -> Result<H2Trace> {
    if samples == 0 || !(total_time > 0.0) {
        return Err(invalid("h2 trace needs samples >= 1 and T > 0"));
    }
    let base = h2_norm(psi0);
    if base == 0.0 {
        return Err(invalid("h2 trace of the zero state"));
    }
    let dt = total_time / samples as f64;
    let mut psi = psi0.to_position();
    let mut times = vec![0.0];
    let mut ratios = vec![1.0];
    for k in 1..=samples {
        psi = reference.propagate(h, dt, &psi)?;
        times.push(k as f64 * dt);
        ratios.push(h2_norm(&psi) / base);
    }
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(H2Trace { times, ratios, max_ratio, bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_power_law_is_recovered() {
        let pts: Vec<(f64, f64)> = (3..10).map(|k| {
            let t = 0.5f64.powi(k);
            (t, 3.0 * t.powf(0.25))
        }).collect();
        match fit_order(&pts).unwrap() {
            FitOutcome::Reliable(f) => {
                assert!((f.slope - 0.25).abs() < 1e-12);
                assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
                assert!((f.r_squared - 1.0).abs() < 1e-12);
            }
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn scattered_points_are_unreliable() {
        let pts = [(0.5, 1.0), (0.25, 0.01), (0.125, 1.0), (0.0625, 0.01), (0.03125, 1.0)];
        assert!(matches!(fit_order(&pts).unwrap(), FitOutcome::Unreliable(_)));
    }

    #[test]
    fn short_windows_and_exact_errors() {
        assert!(matches!(fit_order(&[(0.5, 1.0), (0.25, 0.5), (0.125, 0.25)]), Err(Error::DegenerateWindow(3))));
        let tiny = [(0.5, 1e-13), (0.25, 2e-13), (0.125, 0.0), (0.0625, 1e-14)];
        assert_eq!(fit_order(&tiny).unwrap(), FitOutcome::Exact);
    }

    #[test]
    fn window_rule_applies_crossover_only_to_singular_kinds() {
        use crate::operators::{gaussian_well, sample_coulomb_one_body};
        use crate::spectral::{GridKind, GridSpec};
        let g = GridSpec::new(GridKind::Radial, &[4096], &[60.0], true).unwrap();
        let w = WindowRule::for_potential(&sample_coulomb_one_body(-2.0, &g).unwrap());
        let h = 60.0 / 4096.0;
        assert!((w.min_step.unwrap() - h / 2.0).abs() < 1e-15);
        assert!(w.admits(0.125, 0.3) && !w.admits(0.125, 0.6) && !w.admits(0.004, 0.01));
        let s = WindowRule::for_potential(&gaussian_well(5.0, 1.0, &g).unwrap());
        assert_eq!(s.min_step, None);
    }

    proptest! {
        #[test]
        fn slope_is_invariant_under_error_scaling(p in 0.1f64..2.0, c in 1e-3f64..1e3) {
            let pts: Vec<(f64, f64)> = (3..9).map(|k| { let t = 0.5f64.powi(k); (t, t.powf(p)) }).collect();
            let scaled: Vec<(f64, f64)> = pts.iter().map(|&(t, e)| (t, c * e)).collect();
            let a = *fit_order(&pts).unwrap().fit().unwrap();
            let b = *fit_order(&scaled).unwrap().fit().unwrap();
            prop_assert!((a.slope - b.slope).abs() < 1e-9);
            prop_assert!((a.slope - p).abs() < 1e-9);
        }
    }
}
