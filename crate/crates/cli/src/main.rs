use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use tdmcfan::harness::experiments::calibrate_ks;
use tdmcfan::harness::{self, ExperimentConfig, Metric, RunManifest, Scale, VerifyConfig};
use tdmcfan::lp::{lp_distance, BoundaryForm, Geometry, PointMeasure};
use tdmcfan::RngStream;

#[derive(Parser)]
#[command(name = "tdmcfan", version, about = "Ticketed diffusion Monte Carlo and Brownian fan experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: the config's `output`, else ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; TDMCFAN_JOBS takes precedence when set.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named by the config's `kind`.
    Run,
    /// Sample one fan and write its path data and workload series.
    Fan,
    /// Tabulate G and check the half identity.
    Hitting,
    /// Distance between two point measures stored as CSV (x, v, n).
    Distance {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        /// Measure boundary distance horizontally to the barrier.
        #[arg(long)]
        barrier: bool,
    },
    /// Run the acceptance criteria and write verify.json.
    Verify {
        /// Comma-separated criterion numbers; all when omitted.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u8>,
        /// Smoke-test sample sizes.
        #[arg(long)]
        quick: bool,
    },
    /// Null rejection rate and power of the two-sample KS test.
    CalibrateKs {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 500)]
        trials: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn jobs(flag: Option<usize>) -> Result<Option<usize>> {
    match std::env::var("TDMCFAN_JOBS") {
        Ok(v) if !v.trim().is_empty() => Ok(Some(v.trim().parse().with_context(|| format!("TDMCFAN_JOBS={v:?} is not a thread count"))?)),
        _ => Ok(flag),
    }
}

fn experiment_config(common: &Common) -> Result<ExperimentConfig> {
    let path = common.config.as_deref().context("--config is required for this subcommand")?;
    let mut cfg = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn print_metrics(metrics: &[Metric]) {
    for m in metrics {
        let verdict = if m.passed { "ok  " } else { "FAIL" };
        println!("{verdict} {}: {} (se {}, {:?} {})", m.name, m.value, m.stderr, m.comparison, m.threshold);
    }
}

fn report(m: &RunManifest, out: &Path) -> bool {
    print_metrics(&m.metrics);
    println!("wrote {} ({:.1}s)", out.join("manifest.json").display(), m.wall_time_s);
    m.passed
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = jobs(cli.common.jobs)? {
        if n == 0 {
            bail!("thread count must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let common = &cli.common;
    match cli.command {
        Command::Run => {
            let cfg = experiment_config(common)?;
            let out = harness::output_dir(common.out.as_deref(), &cfg);
            let m = harness::run_experiment(&cfg, &out)?;
            Ok(report(&m, &out))
        }
        Command::Fan => {
            let cfg = experiment_config(common)?;
            let out = harness::output_dir(common.out.as_deref(), &cfg);
            let m = harness::run_fan(&cfg, &out)?;
            Ok(report(&m, &out))
        }
        Command::Hitting => {
            let cfg = experiment_config(common)?;
            let out = harness::output_dir(common.out.as_deref(), &cfg);
            let m = harness::run_hitting(&cfg, &out)?;
            Ok(report(&m, &out))
        }
        Command::Distance { mu, nu, a, p, barrier } => {
            let mut geom = Geometry::new(a, p)?;
            if barrier {
                geom = geom.with_boundary(BoundaryForm::Barrier)?;
            }
            let x = PointMeasure::read_csv(&mu)?;
            let y = PointMeasure::read_csv(&nu)?;
            let d = lp_distance(&x, &y, &geom);
            let value = serde_json::json!({
                "mu": mu,
                "nu": nu,
                "geometry": geom,
                "distance": d,
                "norm_mu": x.norm(&geom),
                "norm_nu": y.norm(&geom),
            });
            println!("{}", serde_json::to_string_pretty(&value)?);
            if let Some(out) = &common.out {
                std::fs::create_dir_all(out)?;
                write_json(&out.join("distance.json"), &value)?;
            }
            Ok(true)
        }
        Command::Verify { criteria, quick } => {
            let mut cfg: VerifyConfig = match &common.config {
                Some(path) => {
                    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
                }
                None => VerifyConfig::default(),
            };
            if quick {
                cfg.scale = Scale::quick();
            }
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            let out = common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            std::fs::create_dir_all(&out)?;
            let report = harness::verify(&cfg, &criteria)?;
            for c in &report.criteria {
                println!("{}", c.line());
            }
            write_json(&out.join("verify.json"), &serde_json::to_value(&report)?)?;
            Ok(report.passed)
        }
        Command::CalibrateKs { n, trials } => {
            let (thresholds, seed) = match &common.config {
                Some(_) => {
                    let cfg = experiment_config(common)?;
                    (cfg.thresholds, cfg.seed)
                }
                None => (Default::default(), common.seed.unwrap_or(0)),
            };
            let outcome = calibrate_ks(n, trials, &thresholds, &RngStream::new(seed))?;
            let out = common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            std::fs::create_dir_all(&out)?;
            for (name, table) in &outcome.tables {
                table.write(&out.join(format!("{name}.csv")))?;
            }
            let passed = outcome.passed();
            write_json(&out.join("calibration.json"), &serde_json::json!({ "seed": seed, "n": n, "trials": trials, "metrics": outcome.metrics, "passed": passed }))?;
            print_metrics(&outcome.metrics);
            Ok(passed)
        }
    }
}
