use std::fs::File;
use std::io::{BufWriter, Write};
use std::time::Instant;

use serde::Serialize;

use super::checks::{energy_check, liouville_check, metric_identity_check, tangent_check, CheckReport, Residual};
use super::{exit_code, OutputDir, RunConfig, RunManifest, StageStatus};
use crate::cho_model::{attractor_sample, io, random_state, simulate, GridSpec, Nonlinearity, PhysParams, Stepper};
use crate::error::{Error, Result};
use crate::lyapunov::{lyapunov_spectrum, LyapunovOptions};
use crate::metric3::{dimension_bound, resolve_metric, DimensionOptions, DimensionStatus, MetricParams};

/// Result of a command: the process exit code and the manifest, when one was written.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub manifest: Option<RunManifest>,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckKind {
    Energy,
    Tangent,
    Liouville,
    MetricIdentity,
}

impl CheckKind {
    pub fn name(&self) -> &'static str {
        match self {
            CheckKind::Energy => "energy",
            CheckKind::Tangent => "tangent",
            CheckKind::Liouville => "liouville",
            CheckKind::MetricIdentity => "metric-identity",
        }
    }
}

#[derive(Serialize)]
struct Failure<'a> {
    schema_version: u32,
    command: &'a str,
    exit_code: i32,
    error: String,
    time: Option<f64>,
}

/// Writes a diagnostic JSON for `e` into the output directory and finishes the manifest.
fn fail(out: OutputDir, command: &str, cfg: &RunConfig, start: Instant, mut stages: Vec<StageStatus>, e: Error) -> Result<Outcome> {
    let code = exit_code(&e);
    let time = match &e {
        Error::BlowUp { time, .. } | Error::SplittingViolated { time, .. } => Some(*time),
        _ => None,
    };
    let mut out = out;
    out.write_json("error.json", &Failure { schema_version: super::SCHEMA_VERSION, command, exit_code: code, error: e.to_string(), time })?;
    if let Error::SplittingViolated { direction, excess, .. } = &e {
        out.write_json("splitting_witness.json", &serde_json::json!({ "excess": excess, "direction": direction }))?;
    }
    stages.push(StageStatus { name: command.into(), status: format!("failed: {e}") });
    let manifest = out.finish(command, cfg, start.elapsed().as_secs_f64(), stages)?;
    Ok(Outcome { code, manifest: Some(manifest), message: e.to_string() })
}

fn steps(duration: f64, dt: f64) -> usize {
    (duration / dt).round() as usize
}

/// Integrates from the seeded initial state through the transient and the
/// sampling window, writing an energy CSV and one snapshot per sample.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Outcome> {
    let start = Instant::now();
    let mut out = OutputDir::create(&cfg.output_dir)?;
    let model = cfg.model()?;
    let stepper = Stepper::new(model.clone(), cfg.integrate.dt)?;
    let i = &cfg.integrate;
    let x0 = random_state(&model, i.initial_amplitude, cfg.seed);
    let transient = steps(i.t_transient, i.dt);
    let gap = steps(i.t_sample, i.dt).max(1);
    let total = transient + gap * (i.n_samples - 1);
    let record_every = (total / 2000).max(1);
    let mut stages = Vec::new();
    let run = (|| -> Result<_> {
        let (mut x, mut traj) = simulate(&stepper, &x0, transient, record_every, false)?;
        let mut snapshots = vec![(transient as f64 * i.dt, x.clone())];
        let mut t_done = transient;
        for _ in 1..i.n_samples {
            let offset = t_done as f64 * i.dt;
            let (y, part) = simulate(&stepper, &x, gap, record_every, false).map_err(|e| match e {
                Error::BlowUp { time, what } => Error::BlowUp { time: offset + time, what },
                other => other,
            })?;
            let base_diss = *traj.dissipation_integral.last().expect("nonempty");
            for k in 1..part.times.len() {
                traj.times.push(offset + part.times[k]);
                traj.energy.push(part.energy[k]);
                traj.energy_space_norm.push(part.energy_space_norm[k]);
                traj.dissipation_integral.push(base_diss + part.dissipation_integral[k]);
            }
            t_done += gap;
            x = y;
            snapshots.push((t_done as f64 * i.dt, x.clone()));
        }
        Ok((x, traj, snapshots))
    })();
    let (x, traj, snapshots) = match run {
        Ok(r) => r,
        Err(e) => return fail(out, "simulate", cfg, start, stages, e),
    };
    let mut csv = BufWriter::new(File::create(out.path("energy.csv"))?);
    traj.write_csv(&mut csv)?;
    csv.flush()?;
    drop(csv);
    out.record("energy.csv");
    for (j, (t, s)) in snapshots.iter().enumerate() {
        let name = format!("state_{j:03}.bin");
        io::write_snapshot(&out.path(&name), model.grid(), &cfg.phys, s, *t)?;
        out.record(&name);
        out.record(&format!("state_{j:03}.json"));
    }
    let summary = serde_json::json!({
        "schema_version": super::SCHEMA_VERSION,
        "final_time": total as f64 * i.dt,
        "final_energy": model.energy(&x)?,
        "final_energy_space_norm": model.energy_space_norm(&x),
        "energy_drift": traj.energy_drift(),
    });
    out.write_json("simulate.json", &summary)?;
    stages.push(StageStatus { name: "simulate".into(), status: "ok".into() });
    let manifest = out.finish("simulate", cfg, start.elapsed().as_secs_f64(), stages)?;
    Ok(Outcome { code: 0, manifest: Some(manifest), message: format!("final energy-space norm {:e}", model.energy_space_norm(&x)) })
}

/// Step used by the residual checks: the configured one, capped at 1e-3.
fn check_dt(cfg: &RunConfig) -> f64 {
    cfg.integrate.dt.min(1e-3)
}

fn run_check(cfg: &RunConfig, kind: CheckKind) -> Result<Vec<Residual>> {
    let model = cfg.model()?;
    let dt = check_dt(cfg);
    let amp = cfg.integrate.initial_amplitude;
    match kind {
        CheckKind::Energy => energy_check(&model, dt, amp, cfg.seed),
        CheckKind::Tangent => tangent_check(&model, dt, amp, cfg.seed),
        CheckKind::Liouville => liouville_check(1e-3, cfg.seed, 12),
        CheckKind::MetricIdentity => metric_identity_check(&model, &cfg.metric, dt, amp, cfg.seed),
    }
}

/// Runs one residual suite and writes `check_<kind>.json`; exit 3 when any residual fails.
pub fn cmd_check(cfg: &RunConfig, kind: CheckKind) -> Result<Outcome> {
    let start = Instant::now();
    let mut out = OutputDir::create(&cfg.output_dir)?;
    let residuals = match run_check(cfg, kind) {
        Ok(r) => r,
        Err(e) => return fail(out, kind.name(), cfg, start, Vec::new(), e),
    };
    let report = CheckReport::new(kind.name(), residuals);
    out.write_json(&format!("check_{}.json", kind.name().replace('-', "_")), &report)?;
    let status = if report.passed { "passed" } else { "failed" };
    let stages = vec![StageStatus { name: kind.name().into(), status: status.into() }];
    let manifest = out.finish(&format!("check {}", kind.name()), cfg, start.elapsed().as_secs_f64(), stages)?;
    let failed: Vec<String> = report.residuals.iter().filter(|r| !r.passed).map(|r| r.name.clone()).collect();
    Ok(Outcome {
        code: if report.passed { 0 } else { 3 },
        manifest: Some(manifest),
        message: if failed.is_empty() { format!("{} check passed", kind.name()) } else { format!("failed: {}", failed.join(", ")) },
    })
}

/// Dimension pipeline. Exit 0 when contracting, 2 when inconclusive, 3 when the
/// splitting or the measured bound fails.
pub fn cmd_dimension(cfg: &RunConfig, parallel: bool) -> Result<Outcome> {
    let start = Instant::now();
    let mut out = OutputDir::create(&cfg.output_dir)?;
    let model = cfg.model()?;
    let mut opts = DimensionOptions::new(cfg.integrate.dt, cfg.sample_options(), cfg.liouville.d_max, cfg.liouville.t_contract);
    opts.reorth_every = cfg.liouville.reorth_every;
    opts.parallel = parallel;
    opts.splitting.seed = cfg.seed;
    let report = match dimension_bound(model, &cfg.metric, &opts) {
        Ok(r) => r,
        Err(e) => return fail(out, "dimension", cfg, start, Vec::new(), e),
    };
    out.write_json("dimension.json", &report)?;
    let mut csv = BufWriter::new(File::create(out.path("dimension.csv"))?);
    report.write_csv(&mut csv)?;
    csv.flush()?;
    drop(csv);
    out.record("dimension.csv");
    let (code, status) = if report.splitting_failure.is_some() {
        (3, "splitting failed")
    } else {
        match report.status {
            DimensionStatus::Contracting => (0, "contracting"),
            DimensionStatus::Inconclusive => (2, "inconclusive"),
            DimensionStatus::BoundViolated => (3, "bound violated"),
        }
    };
    let stages = vec![StageStatus { name: "dimension".into(), status: status.into() }];
    let manifest = out.finish("dimension", cfg, start.elapsed().as_secs_f64(), stages)?;
    Ok(Outcome { code, manifest: Some(manifest), message: format!("{status}: chosen_d = {:?}", report.chosen_d) })
}

/// Lyapunov exponents from the first attractor sample. Exit 2 when the
/// estimate has not converged, 3 when the trace inequality fails.
pub fn cmd_lyapunov(cfg: &RunConfig, parallel: bool) -> Result<Outcome> {
    let start = Instant::now();
    let mut out = OutputDir::create(&cfg.output_dir)?;
    let run = (|| -> Result<_> {
        let model = cfg.model()?;
        let stepper = Stepper::new(model.clone(), cfg.integrate.dt)?;
        let sample = attractor_sample(&stepper, &cfg.sample_options())?;
        let forms = resolve_metric(&model, &cfg.metric, &sample.states)?;
        let y = &cfg.lyapunov;
        let k = y.n_exponents.min(forms.dim());
        let opts = LyapunovOptions {
            reorth_every: cfg.liouville.reorth_every,
            trace_every: y.trace_every,
            d_max: k.min(cfg.liouville.d_max),
            seed: cfg.seed,
            parallel,
            ..LyapunovOptions::new(y.t_run, k)
        };
        lyapunov_spectrum(&forms, &stepper, &sample.states[0], &opts)
    })();
    let report = match run {
        Ok(r) => r,
        Err(e) => return fail(out, "lyapunov", cfg, start, Vec::new(), e),
    };
    out.write_json("lyapunov.json", &report)?;
    let mut csv = String::from("index,exponent\n");
    for (i, l) in report.exponents.iter().enumerate() {
        csv.push_str(&format!("{},{}\n", i + 1, l));
    }
    out.write("lyapunov.csv", csv.as_bytes())?;
    let (code, status) = if !report.all_hold() {
        (3, "trace inequality violated")
    } else if report.not_converged {
        (2, "not converged")
    } else {
        (0, "ok")
    };
    let stages = vec![StageStatus { name: "lyapunov".into(), status: status.into() }];
    let manifest = out.finish("lyapunov", cfg, start.elapsed().as_secs_f64(), stages)?;
    Ok(Outcome { code, manifest: Some(manifest), message: format!("{status}: leading exponent {:?}", report.exponents.first()) })
}

/// Small built-in configuration used by `selftest`.
pub fn selftest_config(output_dir: std::path::PathBuf) -> RunConfig {
    RunConfig {
        grid: GridSpec::new(1, 16, 2.0),
        phys: PhysParams::new(1.0, Nonlinearity::Cubic),
        metric: MetricParams::default(),
        integrate: super::IntegrateConfig { dt: 1e-3, t_transient: 1.0, t_sample: 0.5, n_samples: 2, initial_amplitude: 0.5 },
        liouville: super::LiouvilleConfig { d_max: 4, reorth_every: 10, t_contract: 1.0 },
        lyapunov: super::LyapunovConfig::default(),
        seed: 1,
        output_dir,
    }
}

/// Every residual suite on a small built-in configuration.
pub fn cmd_selftest(output_dir: &std::path::Path) -> Result<Outcome> {
    let cfg = selftest_config(output_dir.to_path_buf());
    let start = Instant::now();
    let mut out = OutputDir::create(output_dir)?;
    let mut stages = Vec::new();
    let mut reports = Vec::new();
    for kind in [CheckKind::Energy, CheckKind::Tangent, CheckKind::Liouville, CheckKind::MetricIdentity] {
        let report = match run_check(&cfg, kind) {
            Ok(r) => CheckReport::new(kind.name(), r),
            Err(e) => return fail(out, "selftest", &cfg, start, stages, e),
        };
        stages.push(StageStatus { name: kind.name().into(), status: if report.passed { "passed" } else { "failed" }.into() });
        reports.push(report);
    }
    out.write_json("selftest.json", &reports)?;
    let passed = reports.iter().all(|r| r.passed);
    let manifest = out.finish("selftest", &cfg, start.elapsed().as_secs_f64(), stages)?;
    Ok(Outcome { code: if passed { 0 } else { 3 }, manifest: Some(manifest), message: if passed { "selftest passed".into() } else { "selftest failed".into() } })
}
