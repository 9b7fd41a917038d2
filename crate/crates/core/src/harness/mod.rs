//! Configuration, persistence and the verification suite.
//!
//! A run writes one CSV file per data table and a `manifest.json` holding the
//! configuration, the seed, the wall time and every judged metric.

pub mod config;
pub mod experiments;
pub mod manifest;
pub mod oracle;
pub mod verify;

use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{ExperimentConfig, ExperimentKind, Thresholds};
pub use manifest::{Comparison, Metric, Outcome, RunManifest, Table};
pub use verify::{verify, CriterionReport, Scale, VerifyConfig, VerifyReport};

use crate::error::{Error, Result};
use crate::fan::{sample_fan, write_fan_json, AncestorTag, FanParams};
use crate::hitting::GGrid;
use crate::rng::RngStream;
use crate::row;

/// Runs the experiment named by `cfg.kind` and writes its files into `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let start = Instant::now();
    let rng = RngStream::new(cfg.seed);
    let th = &cfg.thresholds;
    let outcome = match cfg.kind {
        ExperimentKind::Unbiasedness => experiments::unbiasedness(cfg.a, cfg.eps, cfg.t, cfg.dist, cfg.m, cfg.replicas, th, &rng)?,
        ExperimentKind::MeanCount => experiments::mean_count(cfg.a, cfg.eps, cfg.t, cfg.dist, cfg.m * cfg.replicas, th, &rng)?,
        ExperimentKind::FanMean => experiments::fan_mean(cfg.a, cfg.t, &cfg.gammas, cfg.n_max, cfg.fan_h(), cfg.replicas, th, &rng)?,
        ExperimentKind::GIdentity => experiments::g_identity(cfg.dist, cfg.g_gamma, cfg.replicas, cfg.ds, th, &rng)?,
        ExperimentKind::RateConstant => experiments::rate_constant(cfg.a, cfg.gamma, cfg.t, cfg.eps, cfg.dist, cfg.replicas, th, &rng)?,
        ExperimentKind::Moments => {
            let mut o = experiments::moments(cfg.a, cfg.t, &cfg.eps_schedule, cfg.dist, cfg.replicas, th, &rng.child(0))?;
            let fine = cfg.eps_schedule.iter().copied().fold(f64::INFINITY, f64::min);
            o.extend(experiments::generation_decay(cfg.a, cfg.t, fine, cfg.dist, cfg.n_max, cfg.replicas, th, &rng.child(1))?);
            o
        }
        ExperimentKind::Kolmogorov => {
            experiments::kolmogorov(cfg.a, cfg.t, cfg.eps, &[(cfg.p, cfg.q)], 5, cfg.dist, cfg.replicas, th, &rng)?
        }
        ExperimentKind::LawCompare => {
            experiments::law_compare(cfg.a, cfg.t, cfg.eps, cfg.gamma, cfg.n_max, cfg.fan_h(), cfg.replicas, th, &rng)?
        }
        ExperimentKind::ExcursionCompare => {
            experiments::excursion_compare(1.0, cfg.gamma, cfg.t, cfg.eps, cfg.replicas, &cfg.eps_schedule, cfg.replicas, th, &rng)?
        }
        ExperimentKind::Distance => experiments::distance_checks(cfg.replicas, 100, th, &rng)?,
    };
    let passed = outcome.passed();
    finish(cfg, out, outcome, passed, start)
}

/// Samples one fan with the configured truncation and writes `fan.json` and the
/// series `t, N_t, W_t` on roughly a thousand grid points.
pub fn run_fan(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let start = Instant::now();
    let params = FanParams { a: cfg.a, gamma: cfg.gamma, n_max: cfg.n_max, horizon: cfg.t, h: cfg.fan_h() };
    let fan = sample_fan(0.0, AncestorTag::Random, &params, &RngStream::new(cfg.seed))?;
    prepare(out)?;
    write_fan_json(&fan, &out.join("fan.json"))?;
    let stride = ((cfg.t / params.h / 1000.0).round() as usize).max(1);
    let w = fan.workload(stride)?;
    let mut table = Table::new(&["t", "N_t", "W_t"]);
    for ((t, n), c) in w.times.iter().zip(&w.counts).zip(&w.cumulative) {
        table.push(row![t, n, c]);
    }
    let mut outcome = Outcome::default();
    outcome.tables.push(("fan".into(), table));
    let mut manifest = finish(cfg, out, outcome, true, start)?;
    manifest.files.push("fan.json".into());
    manifest.write(&out.join("manifest.json"))?;
    Ok(manifest)
}

/// Tabulates `Ĝ` on `[0, 8]` and checks the half identity for `cfg.dist`.
pub fn run_hitting(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let start = Instant::now();
    let rng = RngStream::new(cfg.seed);
    let grid = GGrid::build(cfg.dist, cfg.g_gamma, 8.0, cfg.ds.max(0.01), cfg.replicas.max(100), u64::MAX, &rng.child(0))?;
    let outcome = experiments::g_identity(cfg.dist, cfg.g_gamma, cfg.replicas, cfg.ds, &cfg.thresholds, &rng.child(1))?;
    prepare(out)?;
    grid.write_csv(&out.join("g_grid.csv"))?;
    let passed = outcome.passed();
    let mut manifest = finish(cfg, out, outcome, passed, start)?;
    manifest.files.push("g_grid.csv".into());
    manifest.write(&out.join("manifest.json"))?;
    Ok(manifest)
}

fn prepare(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn finish(cfg: &ExperimentConfig, out: &Path, outcome: Outcome, passed: bool, start: Instant) -> Result<RunManifest> {
    prepare(out)?;
    let mut files = Vec::new();
    for (name, table) in &outcome.tables {
        let file = format!("{name}.csv");
        table.write(&out.join(&file))?;
        files.push(file);
    }
    let manifest = RunManifest {
        config: cfg.clone(),
        version: manifest::VERSION.to_string(),
        wall_time_s: start.elapsed().as_secs_f64(),
        seed: cfg.seed,
        metrics: outcome.metrics,
        files,
        passed,
    };
    manifest.write(&out.join("manifest.json"))?;
    Ok(manifest)
}

/// Output directory: the explicit argument, else `cfg.output`, else `./out`.
pub fn output_dir(explicit: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    explicit.map(Path::to_path_buf).or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"))
}
