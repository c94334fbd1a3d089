//! Acceptance run: one line per criterion, non-zero exit if any fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use splitop::audit::{AuditName, AuditStatus, AuditSuite};
use splitop::bounds::{certified_cf1, certified_cf2, tilde_cf, tilde_cn_slope};
use splitop::cli::{cmd_errrep_check, cmd_h2_trace, cmd_rate_study, RateStudyRun, RunConfig};
use splitop::cutoff::{cutoff_constants, stated_c0_bound, stated_cf1_bound, vsin_l2_norm, CutoffProfile, MIN_RESOLUTION};
use splitop::lab::{ErrorKind, FitOutcome};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn global_fit(run: &RateStudyRun) -> Option<(f64, f64)> {
    match run.result.fit_for(ErrorKind::Global)?.outcome? {
        FitOutcome::Reliable(f) | FitOutcome::Unreliable(f) => Some((f.slope, f.r_squared)),
        FitOutcome::Exact => None,
    }
}

fn slope_criterion(run: &RateStudyRun, secs: f64, lo: f64, hi: f64) -> Verdict {
    match global_fit(run) {
        Some((slope, r2)) => verdict(
            (lo..=hi).contains(&slope) && r2 >= 0.9 && secs <= 120.0,
            format!("slope {slope:.4} (want [{lo}, {hi}]), R² {r2:.4}, {secs:.1} s"),
        ),
        None => verdict(false, "no fit"),
    }
}

fn errrep(dir: &Path, preset: &str, min_nodes: usize, tol: f64) -> Result<(bool, String), String> {
    let cfg = RunConfig::preset(preset).map_err(|e| e.to_string())?;
    let run = cmd_errrep_check(&cfg, dir).map_err(|e| e.to_string())?;
    let section = cfg.errrep.as_ref().ok_or("no errrep section")?;
    let worst = run.rows.iter().filter(|r| r.nodes >= min_nodes).map(|r| r.max_relative).fold(0.0, f64::max);
    let ok = section.states >= 20 && run.rows.iter().any(|r| r.nodes >= min_nodes) && worst <= tol;
    Ok((ok, format!("{preset}: {} states, worst {worst:.2e} at >= {min_nodes} nodes (tol {tol:.0e})", section.states)))
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut results: Vec<(usize, &str, Verdict)> = Vec::new();

    // 1, 2, 4: rate studies.
    let run_preset = |name: &str| {
        let cfg = RunConfig::preset(name).expect("preset");
        let t = Instant::now();
        let run = cmd_rate_study(&cfg, &dir.path().join(name)).expect("rate study");
        (run, t.elapsed().as_secs_f64())
    };
    let (hydrogen, h_secs) = run_preset("hydrogen_s_wave");
    let (control, c_secs) = run_preset("gaussian_control");
    results.push((1, "quarter-rate reproduction (hydrogen)", slope_criterion(&hydrogen, h_secs, 0.15, 0.40)));
    results.push((2, "first-order control (gaussian well)", slope_criterion(&control, c_secs, 0.9, 1.1)));

    // 3: error representation.
    let v3 = match (
        errrep(&dir.path().join("e1"), "gaussian_control", 16, 1e-6),
        errrep(&dir.path().join("e2"), "hydrogen_s_wave", 32, 1e-3),
    ) {
        (Ok(a), Ok(b)) => verdict(a.0 && b.0, format!("{}; {}", a.1, b.1)),
        (a, b) => verdict(false, format!("{a:?} {b:?}")),
    };
    results.push((3, "error-representation oracle", v3));

    // 4: bound domination across the bundled rate-study presets.
    let rows: Vec<_> = hydrogen.result.rows.iter().chain(&control.result.rows).collect();
    let worst = rows.iter().map(|r| r.error / r.bound).fold(0.0, f64::max);
    let v4 = verdict(rows.iter().all(|r| r.error <= r.bound), format!("{} rows, max error/bound {worst:.3e}", rows.len()));
    results.push((4, "bound domination", v4));

    // 5: constants.
    let t = Instant::now();
    let profile = CutoffProfile::build(MIN_RESOLUTION * 10).expect("profile");
    let k = cutoff_constants(&profile);
    let vsin: Vec<(f64, f64, f64)> = [1.0, 0.25, 1.0 / 16.0, 1.0 / 64.0]
        .iter()
        .map(|&s| (s, vsin_l2_norm(&profile, s, 0.5).expect("vsin"), 2.0 * std::f64::consts::PI.sqrt() * s.powf(0.25)))
        .collect();
    let secs = t.elapsed().as_secs_f64();
    let c0_ok = k.c0 <= stated_c0_bound();
    let f1_ok = k.c_f1 <= stated_cf1_bound();
    let f2_ok = k.c_f2 <= 1.0 + k.c0;
    let vs_ok = vsin.iter().all(|&(_, v, b)| v <= b);
    let v5 = verdict(
        c0_ok && f1_ok && f2_ok && vs_ok && secs <= 30.0,
        format!(
            "C0 {:.6e} <= {:.6e}: {c0_ok}; C_F1 {:.4} <= {:.4e}: {f1_ok}; C_F2 {:.4} <= 1 + C0: {f2_ok}; vsin within 2√π s^(1/4) for s in {{1, 1/4, 1/16, 1/64}}: {vs_ok}; {secs:.1} s",
            k.c0,
            stated_c0_bound(),
            k.c_f1,
            stated_cf1_bound(),
            k.c_f2
        ),
    );
    results.push((5, "constant certification", v5));

    // 6: inequality audits.
    let t = Instant::now();
    let suite = AuditSuite { seed: 1, samples: 500, margin: 1.05, ..AuditSuite::default() };
    let run = |a: AuditName| suite.run(a).expect("audit");
    let hardy = run(AuditName::Hardy);
    let mixed = run(AuditName::MixedDerivative);
    let counting = run(AuditName::MomentumCounting);
    let nbody = run(AuditName::NbodyPotential);
    let secs = t.elapsed().as_secs_f64();
    let h = hardy.summary("hardy").expect("hardy");
    let n = nbody.summary("nbody_potential").expect("nbody");
    let exact_ok = mixed.records.iter().chain(&counting.records).all(|r| r.status == AuditStatus::Pass);
    let nbound = 1.05 * 2.0 * 2f64.powf(1.5);
    let v6 = verdict(
        h.samples == 500 && h.max_ratio <= 2.1 && exact_ok && n.max_ratio <= nbound && secs <= 300.0,
        format!(
            "hardy max {:.4} over {} on 32³; lemma audits margin 1 on {} samples: {exact_ok}; N=2 max {:.4} <= {nbound:.4}; {secs:.1} s",
            h.max_ratio,
            h.samples,
            mixed.records.len() + counting.records.len(),
            n.max_ratio
        ),
    );
    results.push((6, "inequality audits", v6));

    // 7: H² growth.
    let cfg = RunConfig::preset("hydrogen_s_wave").expect("preset");
    let v7 = match cmd_h2_trace(&cfg, &dir.path().join("h2")) {
        Ok(run) => {
            let get = |l: &str| run.traces.iter().find(|(n, _)| n == l).map(|(_, t)| t.clone());
            match (get("wave_packet"), get("eigenstate")) {
                (Some(w), Some(e)) => {
                    let dev = e.ratios.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
                    verdict(
                        w.max_ratio <= 46.0 && dev <= 1e-8 && w.ratios.len() > 20,
                        format!("wave packet max {:.6} <= 46; eigenstate max |ratio − 1| {dev:.2e}", w.max_ratio),
                    )
                }
                _ => verdict(false, "missing traces"),
            }
        }
        Err(e) => verdict(false, e.to_string()),
    };
    results.push((7, "H² growth", v7));

    // 8: C̃_N scaling.
    let tcf = tilde_cf(certified_cf1(), certified_cf2());
    let v8 = match tilde_cn_slope(&[2, 4, 8, 16, 32, 64], 1.0, tcf) {
        Ok(o) => match o.fit() {
            Some(f) => verdict((4.3..=4.6).contains(&f.slope), format!("slope {:.4} at c0 = 1 (want [4.3, 4.6])", f.slope)),
            None => verdict(false, "no fit"),
        },
        Err(e) => verdict(false, e.to_string()),
    };
    results.push((8, "C̃_N scaling", v8));

    // 9: determinism through the binary.
    let bin = env!("CARGO_BIN_EXE_splitop");
    let csv: Vec<Option<Vec<u8>>> = ["d1", "d2"]
        .iter()
        .map(|d| {
            let out = dir.path().join(d);
            let status = Command::new(bin)
                .args(["rate-study", "--preset", "hydrogen_s_wave", "--seed", "7", "--out-dir"])
                .arg(&out)
                .output()
                .ok()?;
            (status.status.code() == Some(0)).then(|| std::fs::read(out.join("rate_study.csv")).ok()).flatten()
        })
        .collect();
    let v9 = match (&csv[0], &csv[1]) {
        (Some(a), Some(b)) => verdict(a == b, format!("two runs with seed 7, {} bytes, identical: {}", a.len(), a == b)),
        _ => verdict(false, "rate-study run failed"),
    };
    results.push((9, "determinism", v9));

    let mut failed = 0;
    for (n, name, v) in &results {
        println!("criterion {n} {name}: {} | {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
