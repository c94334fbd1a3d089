//! Command-line surface: configuration, presets, commands, CSV output and
//! run manifests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audit::{AuditConfig, AuditName, AuditReport, AuditStatus, AuditSuite, random_state};
use crate::bounds::{
    c_n, certified_cf1, certified_cf2, certified_model, constant_report, one_body_growth, tilde_cf, tilde_cn,
    tilde_cn_slope,
};
use crate::cutoff::{cutoff_constants, vsin_l2_norm, CutoffProfile};
use crate::error::{invalid, Error, Result};
use crate::lab::{h2_trace, rate_study, ErrorKind, FitOutcome, Ladder, RateStudyConfig, RateStudyResult, WindowRule};
use crate::operators::{
    gaussian_well, sample_coulomb_one_body, sample_coulomb_pairwise, DiscreteHamiltonian, KrylovPropagator,
    PairCoefficients, Potential, PotentialKind,
};
use crate::spectral::{GridDescriptor, GridKind, GridSpec, Wavefunction};
use crate::trotter::{error_representation_quadrature, local_error_vector};
use crate::Complex64 as C;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "SPLITOP_THREADS";

pub const PRESETS: [(&str, &str); 4] = [
    ("hydrogen_s_wave", include_str!("../presets/hydrogen_s_wave.json")),
    ("gaussian_control", include_str!("../presets/gaussian_control.json")),
    ("audit_default", include_str!("../presets/audit_default.json")),
    ("nbody_n2_audit", include_str!("../presets/nbody_n2_audit.json")),
];

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub potential: Option<PotentialConfig>,
    #[serde(default)]
    pub state: Option<StateConfig>,
    #[serde(default)]
    pub rate_study: Option<RateStudySection>,
    #[serde(default)]
    pub h2_trace: Vec<H2TraceSection>,
    #[serde(default)]
    pub errrep: Option<ErrrepSection>,
    #[serde(default)]
    pub audit: Option<AuditSection>,
    #[serde(default)]
    pub bounds: Option<BoundsSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKindConfig {
    Radial,
    Cartesian3d,
    Tensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub kind: GridKindConfig,
    pub points: Vec<usize>,
    pub extent: Vec<f64>,
    #[serde(default = "yes")]
    pub offset: bool,
    #[serde(default)]
    pub particles: Option<usize>,
}

fn yes() -> bool {
    true
}

impl GridConfig {
    pub fn build(&self) -> Result<GridSpec> {
        let kind = match self.kind {
            GridKindConfig::Radial => GridKind::Radial,
            GridKindConfig::Cartesian3d => GridKind::Cartesian3d,
            GridKindConfig::Tensor => GridKind::Tensor {
                particles: self.particles.ok_or_else(|| invalid("tensor grid needs `particles`"))?,
            },
        };
        GridSpec::new(kind, &self.points, &self.extent, self.offset)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    Zero,
    Constant { value: f64 },
    Coulomb { c: f64 },
    GaussianWell { depth: f64, width: f64 },
    /// Coefficients `c_jk` in row-major `j < k` order.
    Pairwise { coefficients: Vec<f64> },
}

impl PotentialConfig {
    pub fn build(&self, grid: &GridSpec) -> Result<Potential> {
        match self {
            PotentialConfig::Zero => Ok(Potential::zero(grid)),
            PotentialConfig::Constant { value } => Ok(Potential::constant(grid, *value)),
            PotentialConfig::Coulomb { c } => sample_coulomb_one_body(*c, grid),
            PotentialConfig::GaussianWell { depth, width } => gaussian_well(*depth, *width, grid),
            PotentialConfig::Pairwise { coefficients } => {
                let c = PairCoefficients::new(grid.particles(), coefficients.clone())?;
                sample_coulomb_pairwise(&c, grid)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateConfig {
    /// `e^{-r}/√π`.
    HydrogenGround,
    /// `exp(-(r − center)²/2w²)`, normalised on the lattice.
    Gaussian {
        width: f64,
        #[serde(default)]
        center: f64,
    },
    /// Lowest eigenvector of the lattice Hamiltonian (radial grids).
    DiscreteGroundState,
    /// Random band-limited state drawn from the run seed.
    Random {
        #[serde(default = "default_decay")]
        decay: f64,
    },
}

fn default_decay() -> f64 {
    4.0
}

impl StateConfig {
    pub fn build(&self, h: &DiscreteHamiltonian, seed: u64) -> Result<Wavefunction> {
        let grid = h.grid();
        let radial = grid.kind() == GridKind::Radial;
        let sample = |f: &dyn Fn(f64) -> f64| {
            Wavefunction::from_position_fn(grid, |x| {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                C::new(if radial { r * f(r) } else { f(r) }, 0.0)
            })
        };
        let mut psi = match *self {
            StateConfig::HydrogenGround => sample(&|r| (-r).exp() / std::f64::consts::PI.sqrt()),
            StateConfig::Gaussian { width, center } => {
                if !(width > 0.0 && width.is_finite() && center.is_finite()) {
                    return Err(invalid("gaussian state needs a positive width"));
                }
                sample(&|r| (-(r - center).powi(2) / (2.0 * width * width)).exp())
            }
            StateConfig::DiscreteGroundState => return Ok(h.ground_state()?.1),
            StateConfig::Random { decay } => {
                let cfg = AuditConfig { seed, samples: 1, grid: grid.clone(), spectral_decay: decay, margin: 1.0 };
                return Ok(random_state(&cfg, 0)?.to_position());
            }
        };
        psi.normalize()?;
        Ok(psi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateStudySection {
    #[serde(default = "one")]
    pub total_time: f64,
    #[serde(default = "default_k_min")]
    pub k_min: u32,
    #[serde(default = "default_k_max")]
    pub k_max: u32,
    #[serde(default = "default_kinds")]
    pub kinds: Vec<ErrorKind>,
    #[serde(default = "default_error_cap")]
    pub error_cap: f64,
    /// Overrides the crossover step `2/max|V|`; `0` disables it.
    #[serde(default)]
    pub min_step: Option<f64>,
}

fn one() -> f64 {
    1.0
}
fn default_k_min() -> u32 {
    3
}
fn default_k_max() -> u32 {
    12
}
fn default_kinds() -> Vec<ErrorKind> {
    vec![ErrorKind::Global]
}
fn default_error_cap() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct H2TraceSection {
    pub label: String,
    #[serde(default = "one")]
    pub total_time: f64,
    #[serde(default = "default_trace_samples")]
    pub samples: usize,
    /// Defaults to the run state.
    #[serde(default)]
    pub state: Option<StateConfig>,
    /// Defaults to the growth constant of the potential, if it has one.
    #[serde(default)]
    pub bound: Option<f64>,
}

fn default_trace_samples() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrrepSection {
    pub t: f64,
    #[serde(default = "default_nodes")]
    pub nodes: Vec<usize>,
    #[serde(default = "default_states")]
    pub states: usize,
    #[serde(default = "default_decay")]
    pub decay: f64,
    pub tolerance: f64,
    /// Node counts from this one up must meet the tolerance.
    #[serde(default)]
    pub check_from_nodes: Option<usize>,
}

fn default_nodes() -> Vec<usize> {
    vec![8, 16, 32]
}
fn default_states() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    pub audits: Vec<String>,
    #[serde(default)]
    pub settings: AuditSuite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "one")]
    pub c0: f64,
    #[serde(default = "default_sweep")]
    pub sweep: Vec<usize>,
}

fn default_n() -> usize {
    2
}
fn default_sweep() -> Vec<usize> {
    vec![2, 4, 8, 16, 32, 64]
}

impl Default for BoundsSection {
    fn default() -> Self {
        Self { n: default_n(), c0: 1.0, sweep: default_sweep() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Also write an SVG plot of error and bound against `t`.
    #[serde(default)]
    pub svg: bool,
}

impl RunConfig {
    /// Parses JSON, reporting schema violations with their field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config { path, message: e.into_inner().to_string() }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json(&text)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
            let known: Vec<&str> = PRESETS.iter().map(|p| p.0).collect();
            invalid(format!("unknown preset {name:?}; known presets: {}", known.join(", ")))
        })?;
        Self::from_json(text)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(&bytes))
    }

    fn label(&self) -> &str {
        self.name.as_deref().unwrap_or("run")
    }

    fn problem(&self) -> Result<Problem> {
        let grid = self.grid.as_ref().ok_or_else(|| missing("grid"))?.build()?;
        let v = self.potential.as_ref().ok_or_else(|| missing("potential"))?.build(&grid)?;
        let h = DiscreteHamiltonian::new(v);
        let psi0 = self.state.as_ref().ok_or_else(|| missing("state"))?.build(&h, self.seed)?;
        Ok(Problem { grid, h, psi0 })
    }
}

fn missing(section: &str) -> Error {
    Error::Config { path: section.into(), message: format!("missing `{section}` section") }
}

struct Problem {
    grid: GridSpec,
    h: DiscreteHamiltonian,
    psi0: Wavefunction,
}

// ---------------------------------------------------------------------------
// Manifest

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix: f64,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_name: String,
    pub config_hash: String,
    pub seed: u64,
    pub threads: usize,
    pub grids: Vec<GridDescriptor>,
    pub timing: Timing,
    pub exit_code: i32,
    pub outputs: Vec<OutputFile>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// Checks that every listed output exists with the recorded hash and size.
    pub fn validate(&self, dir: &Path) -> Result<()> {
        if self.tool != env!("CARGO_PKG_NAME") {
            return Err(invalid(format!("manifest written by {:?}", self.tool)));
        }
        let mut seen = std::collections::HashSet::new();
        for out in &self.outputs {
            if !seen.insert(&out.path) {
                return Err(invalid(format!("{} listed twice", out.path)));
            }
            let bytes = fs::read(dir.join(&out.path))?;
            if bytes.len() as u64 != out.bytes || hex::encode(Sha256::digest(&bytes)) != out.sha256 {
                return Err(invalid(format!("{} does not match its manifest entry", out.path)));
            }
        }
        Ok(())
    }
}

/// Collects the files a command writes and emits its manifest last.
struct OutputSet {
    dir: PathBuf,
    command: &'static str,
    files: Vec<OutputFile>,
}

impl OutputSet {
    fn new(dir: &Path, command: &'static str) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), command, files: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)?;
        self.files.push(OutputFile {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        });
        Ok(path)
    }

    fn finish(self, config: &RunConfig, grids: Vec<GridDescriptor>, started: (f64, Instant), exit: Exit) -> Result<PathBuf> {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.command.into(),
            config_name: config.label().into(),
            config_hash: config.hash(),
            seed: config.seed,
            threads: rayon::current_num_threads(),
            grids,
            timing: Timing { started_unix: started.0, elapsed_seconds: started.1.elapsed().as_secs_f64() },
            exit_code: exit.code(),
            outputs: self.files,
        };
        let path = self.dir.join(format!("{}.manifest.json", self.command));
        fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(path)
    }
}

fn clock() -> (f64, Instant) {
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    (now, Instant::now())
}

// ---------------------------------------------------------------------------
// Outcomes

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Exit {
    Success,
    Error,
    UnreliableFit,
    Warnings,
}

impl Exit {
    pub fn code(&self) -> i32 {
        match self {
            Exit::Success => 0,
            Exit::Error => 1,
            Exit::UnreliableFit => 2,
            Exit::Warnings => 3,
        }
    }
}

/// What a command produced: exit status, report lines and written files.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit: Exit,
    pub lines: Vec<String>,
    pub manifest: Option<PathBuf>,
}

fn fmt_e(x: f64) -> String {
    format!("{x:.12e}")
}

// ---------------------------------------------------------------------------
// rate-study

pub fn rate_study_csv(result: &RateStudyResult) -> Result<Vec<u8>> {
    let mut head = String::new();
    for f in &result.fits {
        match &f.outcome {
            Some(o @ (FitOutcome::Reliable(fit) | FitOutcome::Unreliable(fit))) => writeln!(
                head,
                "# fit kind={} status={} slope={} intercept={} r_squared={} points={}",
                f.kind.label(),
                o.label(),
                fmt_e(fit.slope),
                fmt_e(fit.intercept),
                fmt_e(fit.r_squared),
                fit.points
            ),
            Some(FitOutcome::Exact) => writeln!(head, "# fit kind={} status=exact", f.kind.label()),
            None => writeln!(head, "# fit kind={} status=degenerate points={}", f.kind.label(), f.window_points),
        }
        .expect("string write");
    }
    let min_step = result.window.min_step.map(fmt_e).unwrap_or_else(|| "none".into());
    writeln!(head, "# window min_step={min_step} error_cap={}", fmt_e(result.window.error_cap)).expect("string write");
    writeln!(head, "# total_time={}", fmt_e(result.total_time)).expect("string write");
    let mut w = csv::Writer::from_writer(head.into_bytes());
    w.write_record(["t", "error", "bound", "in_window", "kind"])?;
    let mut rows: Vec<_> = result.rows.iter().collect();
    rows.sort_by(|a, b| a.kind.label().cmp(b.kind.label()).then(a.t.total_cmp(&b.t)));
    for r in rows {
        w.write_record([fmt_e(r.t), fmt_e(r.error), fmt_e(r.bound), r.in_window.to_string(), r.kind.label().into()])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Log-log plot of error and bound against `t`.
pub fn rate_study_svg(result: &RateStudyResult) -> String {
    let (w, h, pad) = (640.0, 420.0, 50.0);
    let pts: Vec<(f64, f64, f64)> = result
        .rows
        .iter()
        .filter(|r| r.error > 0.0 && r.bound > 0.0)
        .map(|r| (r.t.log10(), r.error.log10(), r.bound.log10()))
        .collect();
    let mut svg = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n");
    if pts.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let (x0, x1) = pts.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (y0, y1) = pts.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.1).min(p.2), b.max(p.1).max(p.2)));
    let sx = |x: f64| pad + (x - x0) / (x1 - x0).max(1e-12) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0).max(1e-12) * (h - 2.0 * pad);
    let line = |sel: &dyn Fn(&(f64, f64, f64)) -> f64, color: &str| {
        let d: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(sel(p)))).collect();
        format!("<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n", d.join(" "))
    };
    svg.push_str(&format!(
        "<rect x=\"{pad}\" y=\"{pad}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        w - 2.0 * pad,
        h - 2.0 * pad
    ));
    svg.push_str(&line(&|p| p.1, "steelblue"));
    svg.push_str(&line(&|p| p.2, "firebrick"));
    svg.push_str(&format!(
        "<text x=\"{pad}\" y=\"{}\" font-size=\"12\">log10 t: {x0:.2} .. {x1:.2}; log10 error (blue), bound (red): {y0:.2} .. {y1:.2}</text>\n",
        h - 15.0
    ));
    svg.push_str("</svg>\n");
    svg
}

pub struct RateStudyRun {
    pub result: RateStudyResult,
    pub outcome: Outcome,
}

pub fn cmd_rate_study(config: &RunConfig, out_dir: &Path) -> Result<RateStudyRun> {
    let started = clock();
    let section = config.rate_study.as_ref().ok_or_else(|| missing("rate_study"))?;
    let p = config.problem()?;
    let mut window = WindowRule::for_potential(p.h.potential());
    window.error_cap = section.error_cap;
    if let Some(m) = section.min_step {
        window.min_step = (m > 0.0).then_some(m);
    }
    let study = RateStudyConfig {
        total_time: section.total_time,
        ladder: Ladder { k_min: section.k_min, k_max: section.k_max },
        kinds: section.kinds.clone(),
        window,
    };
    if study.ladder.steps()?.len() < 6 {
        return Err(invalid("the rate-study ladder needs at least 6 step sizes"));
    }
    let model = certified_model(&p.h, &p.psi0)?;
    let result = rate_study(&p.h, &p.psi0, &study, &model, &KrylovPropagator::default())?;

    let mut lines = Vec::new();
    let mut exit = Exit::Success;
    for f in &result.fits {
        match &f.outcome {
            Some(FitOutcome::Reliable(fit)) => {
                lines.push(format!("{} fit: slope {:.4}, R² {:.4}, {} points", f.kind.label(), fit.slope, fit.r_squared, fit.points))
            }
            Some(FitOutcome::Unreliable(fit)) => {
                exit = exit.max(Exit::UnreliableFit);
                lines.push(format!("{} fit unreliable: slope {:.4}, R² {:.4} < 0.9", f.kind.label(), fit.slope, fit.r_squared));
            }
            Some(FitOutcome::Exact) => lines.push(format!("{} errors at reference accuracy; fit skipped (exact)", f.kind.label())),
            None => {
                exit = exit.max(Exit::UnreliableFit);
                lines.push(format!("{} fit window has {} rows; need 4", f.kind.label(), f.window_points));
            }
        }
    }
    let slack = 1e-10;
    let violations = result.rows.iter().filter(|r| r.error > r.bound + slack).count();
    if violations > 0 {
        exit = Exit::Error;
        lines.push(format!("{violations} rows exceed the certified bound"));
    } else {
        lines.push("every row is below its certified bound".into());
    }

    let mut out = OutputSet::new(out_dir, "rate_study")?;
    let csv_path = out.write("rate_study.csv", &rate_study_csv(&result)?)?;
    lines.push(format!("wrote {}", csv_path.display()));
    if config.output.svg {
        out.write("rate_study.svg", rate_study_svg(&result).as_bytes())?;
    }
    let manifest = out.finish(config, vec![p.grid.descriptor()], started, exit)?;
    Ok(RateStudyRun { result, outcome: Outcome { exit, lines, manifest: Some(manifest) } })
}

// ---------------------------------------------------------------------------
// audit

pub fn audit_csv(report: &AuditReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["audit", "sample", "ratio", "bound", "margin", "status"])?;
    for r in &report.records {
        w.write_record([
            r.audit.clone(),
            r.sample.to_string(),
            fmt_e(r.ratio),
            fmt_e(r.bound),
            fmt_e(r.margin),
            r.status.label().into(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn state_csv(psi: &Wavefunction) -> Result<Vec<u8>> {
    let m = psi.to_momentum();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "re", "im"])?;
    for (i, v) in m.values().iter().enumerate() {
        w.write_record([i.to_string(), fmt_e(v.re), fmt_e(v.im)])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub struct AuditRun {
    pub report: AuditReport,
    pub outcome: Outcome,
}

/// Runs `names`, or the config's list when empty.
pub fn cmd_audit(config: &RunConfig, names: &[String], margin: Option<f64>, out_dir: &Path) -> Result<AuditRun> {
    let started = clock();
    let section = config.audit.clone().unwrap_or(AuditSection { audits: Vec::new(), settings: AuditSuite::default() });
    let list = if names.is_empty() { &section.audits } else { names };
    let audits = list.iter().map(|n| n.parse::<AuditName>()).collect::<Result<Vec<_>>>()?;
    if audits.is_empty() {
        return Err(invalid("no audits selected"));
    }
    let mut suite = section.settings.clone();
    suite.seed = config.seed;
    if let Some(m) = margin {
        suite.margin = m;
    }
    let mut report = AuditReport::default();
    for a in &audits {
        report.merge(suite.run(*a)?);
    }
    let mut out = OutputSet::new(out_dir, "audit")?;
    out.write("audit.csv", &audit_csv(&report)?)?;
    let mut lines = Vec::new();
    for s in &report.summaries {
        lines.push(format!(
            "{:<18} {:>4} samples  max ratio {:.6}  bound {:.6}  margin {:.3}  {}",
            s.audit,
            s.samples,
            s.max_ratio,
            s.bound,
            s.margin,
            s.status.label()
        ));
        if s.status != AuditStatus::Pass {
            if let Ok(a) = s.audit.parse::<AuditName>() {
                if let Some(psi) = suite.state_for(a, s.worst_sample)? {
                    let name = format!("audit_state_{}_{}.csv", s.audit, s.worst_sample);
                    out.write(&name, &state_csv(&psi)?)?;
                    lines.push(format!("  offending state written to {name}"));
                }
            }
        }
    }
    let exit = match report.status() {
        AuditStatus::Pass => Exit::Success,
        AuditStatus::Warn => Exit::Warnings,
        AuditStatus::Fail => Exit::Error,
    };
    let grids = [suite.cartesian_grid().ok(), suite.tensor_grid(suite.particles).ok()]
        .into_iter()
        .flatten()
        .map(|g| g.descriptor())
        .collect();
    let manifest = out.finish(config, grids, started, exit)?;
    Ok(AuditRun { report, outcome: Outcome { exit, lines, manifest: Some(manifest) } })
}

// ---------------------------------------------------------------------------
// bounds

pub fn cmd_bounds(config: &RunConfig, section: &BoundsSection, out_dir: &Path) -> Result<Outcome> {
    let started = clock();
    if section.n < 2 {
        return Err(invalid(format!(
            "N = {} rejected: the N-body potential bound holds for integers N >= 2",
            section.n
        )));
    }
    if !(section.c0 >= 0.0 && section.c0.is_finite()) {
        return Err(invalid("c0 must be finite and non-negative"));
    }
    let profile = CutoffProfile::build(crate::cutoff::MIN_RESOLUTION * 10)?;
    let k = cutoff_constants(&profile);
    let report = constant_report(&k, section.n, section.c0);

    let mut table = csv::Writer::from_writer(Vec::new());
    table.write_record(["constant", "certified", "computed", "note"])?;
    let rows: Vec<(&str, f64, f64, &str)> = vec![
        ("C_HLS3", report.c_hls3, report.c_hls3, "sharp Hardy constant"),
        ("C0", k.c0_stated_bound, k.c0, "normalisation of the cutoff; stated bound vs quadrature"),
        ("C_F1", report.certified_c_f1, k.c_f1, "sup of lambda^2 |F''|; stated bound vs scan"),
        ("C_F2", report.certified_c_f2, k.c_f2, "sup of |lambda F' - F|; stated bound vs scan"),
        ("C_N", report.c_n, report.c_n, "H2 growth constant"),
        ("tilde_C_F", report.tilde_cf_certified, report.tilde_cf_computed, "assembled commutator constant"),
        ("tilde_C_N", report.tilde_cn_certified, report.tilde_cn_computed, "global error prefactor"),
    ];
    for (name, cert, comp, note) in &rows {
        table.write_record([name.to_string(), fmt_e(*cert), fmt_e(*comp), note.to_string()])?;
    }
    let table = table.into_inner().map_err(|e| Error::Io(e.into_error()))?;

    let tcf_cert = tilde_cf(certified_cf1(), certified_cf2());
    let tcf_comp = report.tilde_cf_computed;
    let mut sweep = csv::Writer::from_writer(Vec::new());
    sweep.write_record(["n", "c_n", "tilde_cn_certified", "tilde_cn_computed"])?;
    for &n in &section.sweep {
        if n < 2 {
            return Err(invalid(format!("sweep entry N = {n} rejected: N >= 2 required")));
        }
        sweep.write_record([
            n.to_string(),
            fmt_e(c_n(n, section.c0)),
            fmt_e(tilde_cn(n, section.c0, tcf_cert)),
            fmt_e(tilde_cn(n, section.c0, tcf_comp)),
        ])?;
    }
    let mut sweep = sweep.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let mut lines = vec![
        format!("C_N({}, {}) = {:.9}", section.n, section.c0, report.c_n),
        format!("tilde C_F certified {:.6e}, computed {:.6e}", report.tilde_cf_certified, report.tilde_cf_computed),
        format!("tilde C_N certified {:.6e}, computed {:.6e}", report.tilde_cn_certified, report.tilde_cn_computed),
        format!(
            "C0 = {:.6e} within stated bound {:.6e}: {}",
            k.c0, k.c0_stated_bound, k.c0_within_stated_bound
        ),
    ];
    if section.sweep.len() >= 4 {
        let fit = tilde_cn_slope(&section.sweep, section.c0, tcf_cert)?;
        if let Some(f) = fit.fit() {
            let line = format!("# slope of log tilde_C_N vs log N: {} (R² {})\n", fmt_e(f.slope), fmt_e(f.r_squared));
            sweep.extend_from_slice(line.as_bytes());
            lines.push(format!("tilde C_N growth: slope {:.4} over N in {:?}", f.slope, section.sweep));
        }
    }
    let mut vsin = csv::Writer::from_writer(Vec::new());
    vsin.write_record(["s", "vsin_l2_norm", "bound"])?;
    for s in [1.0, 0.25, 1.0 / 16.0, 1.0 / 64.0] {
        let v = vsin_l2_norm(&profile, s, 0.5)?;
        vsin.write_record([fmt_e(s), fmt_e(v), fmt_e(2.0 * std::f64::consts::PI.sqrt() * s.powf(0.25))])?;
    }
    let vsin = vsin.into_inner().map_err(|e| Error::Io(e.into_error()))?;

    let mut out = OutputSet::new(out_dir, "bounds")?;
    out.write("constants.csv", &table)?;
    out.write("constants.json", serde_json::to_string_pretty(&report)?.as_bytes())?;
    out.write("tilde_cn_sweep.csv", &sweep)?;
    out.write("vsin.csv", &vsin)?;
    let manifest = out.finish(config, Vec::new(), started, Exit::Success)?;
    Ok(Outcome { exit: Exit::Success, lines, manifest: Some(manifest) })
}

// ---------------------------------------------------------------------------
// errrep-check

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrrepRow {
    pub nodes: usize,
    /// Largest relative mismatch over the sampled states.
    pub max_relative: f64,
    pub checked: bool,
}

pub struct ErrrepRun {
    pub rows: Vec<ErrrepRow>,
    pub tolerance: f64,
    pub outcome: Outcome,
}

/// Relative mismatch between the quadrature form of the local error and the
/// direct difference `(U₁(t) − U(t))ψ`, for each node count.
pub fn errrep_discrepancy(
    h: &DiscreteHamiltonian,
    t: f64,
    psi: &Wavefunction,
    nodes: &[usize],
    reference: &KrylovPropagator,
) -> Result<Vec<f64>> {
    if t == 0.0 {
        return Ok(vec![0.0; nodes.len()]);
    }
    let direct = local_error_vector(h, t, psi, reference)?;
    let scale = direct.norm();
    nodes
        .iter()
        .map(|&n| {
            let q = error_representation_quadrature(h, t, psi, n, reference)?;
            let d = q.distance(&direct)?;
            Ok(if scale > 0.0 { d / scale } else { d })
        })
        .collect()
}

pub fn cmd_errrep_check(config: &RunConfig, out_dir: &Path) -> Result<ErrrepRun> {
    use rayon::prelude::*;
    let started = clock();
    let section = config.errrep.as_ref().ok_or_else(|| missing("errrep"))?;
    let p = config.problem()?;
    if section.states == 0 || section.nodes.is_empty() {
        return Err(invalid("errrep needs states >= 1 and at least one node count"));
    }
    let reference = KrylovPropagator::default();
    let cfg = AuditConfig {
        seed: config.seed,
        samples: section.states,
        grid: p.grid.clone(),
        spectral_decay: section.decay,
        margin: 1.0,
    };
    let per_state: Vec<Vec<f64>> = (0..section.states)
        .into_par_iter()
        .map(|i| {
            let psi = random_state(&cfg, i)?.to_position();
            errrep_discrepancy(&p.h, section.t, &psi, &section.nodes, &reference)
        })
        .collect::<Result<_>>()?;
    let from = section.check_from_nodes.unwrap_or(*section.nodes.iter().max().expect("non-empty"));
    let rows: Vec<ErrrepRow> = section
        .nodes
        .iter()
        .enumerate()
        .map(|(j, &n)| ErrrepRow {
            nodes: n,
            max_relative: per_state.iter().map(|v| v[j]).fold(0.0, f64::max),
            checked: n >= from,
        })
        .collect();
    let ok = rows.iter().filter(|r| r.checked).all(|r| r.max_relative <= section.tolerance);
    let mut lines: Vec<String> = rows
        .iter()
        .map(|r| format!("nodes {:>3}: max relative mismatch {:.3e}{}", r.nodes, r.max_relative, if r.checked { " (checked)" } else { "" }))
        .collect();
    lines.push(format!(
        "{} states at t = {}; tolerance {:.1e}: {}",
        section.states,
        section.t,
        section.tolerance,
        if ok { "pass" } else { "fail" }
    ));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["nodes", "max_relative", "checked"])?;
    for r in &rows {
        w.write_record([r.nodes.to_string(), fmt_e(r.max_relative), r.checked.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let exit = if ok { Exit::Success } else { Exit::Error };
    let mut out = OutputSet::new(out_dir, "errrep")?;
    out.write("errrep.csv", &bytes)?;
    let manifest = out.finish(config, vec![p.grid.descriptor()], started, exit)?;
    Ok(ErrrepRun { rows, tolerance: section.tolerance, outcome: Outcome { exit, lines, manifest: Some(manifest) } })
}

// ---------------------------------------------------------------------------
// h2-trace

/// Growth constant of the exact flow: `2 + 6|c| + 8c²` for one Coulomb
/// centre, `C_N` for pair potentials, `1` for a constant potential.
pub fn growth_bound(v: &Potential) -> Option<f64> {
    match v.kind() {
        PotentialKind::Coulomb { c } => Some(one_body_growth(*c)),
        PotentialKind::Pairwise { coefficients } => Some(c_n(coefficients.particles(), coefficients.c0())),
        PotentialKind::Zero | PotentialKind::Constant { .. } => Some(1.0),
        _ => None,
    }
}

pub struct H2Run {
    pub traces: Vec<(String, crate::lab::H2Trace)>,
    pub outcome: Outcome,
}

pub fn cmd_h2_trace(config: &RunConfig, out_dir: &Path) -> Result<H2Run> {
    let started = clock();
    if config.h2_trace.is_empty() {
        return Err(missing("h2_trace"));
    }
    let p = config.problem()?;
    let reference = KrylovPropagator::default();
    let mut traces = Vec::new();
    let mut lines = Vec::new();
    let mut exit = Exit::Success;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["label", "time", "ratio"])?;
    for sec in &config.h2_trace {
        if sec.samples < 20 {
            return Err(invalid(format!("h2 trace {:?} needs at least 20 samples", sec.label)));
        }
        let psi = match &sec.state {
            Some(s) => s.build(&p.h, config.seed)?,
            None => p.psi0.clone(),
        };
        let bound = sec.bound.or_else(|| growth_bound(p.h.potential()));
        let tr = h2_trace(&p.h, &psi, sec.total_time, sec.samples, bound, &reference)?;
        for (t, r) in tr.times.iter().zip(&tr.ratios) {
            w.write_record([sec.label.clone(), fmt_e(*t), fmt_e(*r)])?;
        }
        let ok = tr.within_bound();
        if !ok {
            exit = Exit::Error;
        }
        lines.push(format!(
            "{}: max ratio {:.9} (bound {}) {}",
            sec.label,
            tr.max_ratio,
            bound.map(|b| format!("{b}")).unwrap_or_else(|| "none".into()),
            if ok { "ok" } else { "EXCEEDED" }
        ));
        traces.push((sec.label.clone(), tr));
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let mut out = OutputSet::new(out_dir, "h2_trace")?;
    out.write("h2_trace.csv", &bytes)?;
    let manifest = out.finish(config, vec![p.grid.descriptor()], started, exit)?;
    Ok(H2Run { traces, outcome: Outcome { exit, lines, manifest: Some(manifest) } })
}

// ---------------------------------------------------------------------------
// Argument parsing

#[derive(Debug, Parser)]
#[command(name = "splitop", version, about = "Split-operator Trotter error studies for Coulomb Hamiltonians")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON configuration file.
    pub config: Option<PathBuf>,
    /// Use a bundled preset instead of a file.
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    /// Overrides the configuration seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(p), _) => RunConfig::load(p)?,
            (None, Some(name)) => RunConfig::preset(name)?,
            (None, None) => return Err(invalid("pass a config file or --preset NAME")),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Trotter error over the step ladder, with fit and certified bounds.
    RateStudy {
        #[command(flatten)]
        common: Common,
        /// Also write an SVG plot.
        #[arg(long)]
        svg: bool,
    },
    /// Randomised operator-inequality audits.
    Audit {
        #[command(flatten)]
        common: Common,
        /// Audit to run (repeatable); defaults to the config list.
        #[arg(long = "audit")]
        audits: Vec<String>,
        #[arg(long)]
        margin: Option<f64>,
    },
    /// Constant tables for N particles with coupling bound c0.
    Bounds {
        #[arg(long, short = 'n', default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        c0: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Quadrature form of the local error against the direct difference.
    ErrrepCheck {
        #[command(flatten)]
        common: Common,
    },
    /// H² norm ratio along the exact flow.
    H2Trace {
        #[command(flatten)]
        common: Common,
    },
    /// Print a bundled preset.
    Preset { name: String },
}

/// Applies the thread-count variable to the global pool.
pub fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().map_err(|_| invalid(format!("{THREADS_ENV}={v:?} is not a thread count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| invalid(format!("thread pool: {e}")))?;
    }
    Ok(())
}

/// Runs a parsed command and returns its outcome.
pub fn execute(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::RateStudy { common, svg } => {
            let mut cfg = common.load()?;
            cfg.output.svg |= svg;
            Ok(cmd_rate_study(&cfg, &common.out_dir)?.outcome)
        }
        Command::Audit { common, audits, margin } => Ok(cmd_audit(&common.load()?, &audits, margin, &common.out_dir)?.outcome),
        Command::Bounds { n, c0, seed, out_dir } => {
            let cfg = RunConfig {
                name: Some("bounds".into()),
                seed: seed.unwrap_or(0),
                grid: None,
                potential: None,
                state: None,
                rate_study: None,
                h2_trace: Vec::new(),
                errrep: None,
                audit: None,
                bounds: Some(BoundsSection { n, c0, sweep: default_sweep() }),
                output: OutputSection::default(),
            };
            let section = cfg.bounds.clone().expect("set above");
            cmd_bounds(&cfg, &section, &out_dir)
        }
        Command::ErrrepCheck { common } => Ok(cmd_errrep_check(&common.load()?, &common.out_dir)?.outcome),
        Command::H2Trace { common } => Ok(cmd_h2_trace(&common.load()?, &common.out_dir)?.outcome),
        Command::Preset { name } => {
            let (_, text) = PRESETS
                .iter()
                .find(|(n, _)| *n == name)
                .ok_or_else(|| invalid(format!("unknown preset {name:?}")))?;
            Ok(Outcome { exit: Exit::Success, lines: vec![text.trim_end().to_string()], manifest: None })
        }
    }
}

/// Entry point used by the binary: prints the report and returns the exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return 1;
    }
    match execute(cli) {
        Ok(o) => {
            for l in &o.lines {
                println!("{l}");
            }
            if let Some(m) = &o.manifest {
                println!("manifest {}", m.display());
            }
            o.exit.code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        for (name, _) in PRESETS {
            let c = RunConfig::preset(name).unwrap();
            assert_eq!(c.name.as_deref(), Some(name));
        }
    }

    #[test]
    fn schema_errors_carry_the_field_path() {
        let bad = r#"{"grid": {"kind": "radial", "points": [64], "extent": [8.0], "ofset": true}}"#;
        match RunConfig::from_json(bad) {
            Err(Error::Config { path, message }) => {
                assert_eq!(path, "grid.ofset");
                assert!(message.contains("ofset"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let bad = r#"{"rate_study": {"total_time": "one"}}"#;
        match RunConfig::from_json(bad) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "rate_study.total_time"),
            other => panic!("{other:?}"),
        }
        let bad = r#"{"potential": {"kind": "coulomb", "c": -2, "z": 1}}"#;
        assert!(RunConfig::from_json(bad).is_err());
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let a = RunConfig::preset("hydrogen_s_wave").unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn growth_bound_for_hydrogen_is_46() {
        let g = GridSpec::new(GridKind::Radial, &[64], &[8.0], true).unwrap();
        assert_eq!(growth_bound(&sample_coulomb_one_body(-2.0, &g).unwrap()), Some(46.0));
    }

    #[test]
    fn errrep_zero_step_is_exact() {
        let g = GridSpec::new(GridKind::Radial, &[64], &[8.0], true).unwrap();
        let h = DiscreteHamiltonian::new(sample_coulomb_one_body(-2.0, &g).unwrap());
        let psi = StateConfig::HydrogenGround.build(&h, 0).unwrap();
        let d = errrep_discrepancy(&h, 0.0, &psi, &[8, 16], &KrylovPropagator::default()).unwrap();
        assert_eq!(d, vec![0.0, 0.0]);
    }

    #[test]
    fn bounds_rejects_one_particle() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::from_json("{}").unwrap();
        let e = cmd_bounds(&cfg, &BoundsSection { n: 1, ..BoundsSection::default() }, dir.path()).unwrap_err();
        assert!(e.to_string().contains("N >= 2"));
    }
}
