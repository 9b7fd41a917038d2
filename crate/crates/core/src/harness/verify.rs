//! The fourteen acceptance criteria, each a fixed composition of experiments.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::chain::StepDistribution;
use crate::error::{Error, Result};
use crate::harness::config::Thresholds;
use crate::harness::experiments as ex;
use crate::harness::manifest::{Metric, Outcome};
use crate::rng::RngStream;

pub const CRITERIA: [(u8, &str); 14] = [
    (1, "unbiasedness against weighted Monte Carlo"),
    (2, "mean particle count identity"),
    (3, "fan mean count"),
    (4, "G half identity"),
    (5, "exact lattice hitting probabilities"),
    (6, "quantitative G convergence"),
    (7, "offspring rate constant"),
    (8, "moment stability in eps"),
    (9, "generation decay"),
    (10, "Kolmogorov modulus"),
    (11, "excursion law convergence"),
    (12, "fixed-time law agreement"),
    (13, "metric correctness"),
    (14, "workload modulus stability"),
];

/// Sample sizes of the suite. The defaults are the full sizes; [`Scale::quick`]
/// is a smoke-test size whose verdicts carry no statistical weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scale {
    pub unbiasedness_replicas: usize,
    pub mean_count_replicas: usize,
    pub fans: usize,
    pub g_samples: usize,
    pub lattice_samples: usize,
    pub convergence_samples: usize,
    pub convergence_gamma_ref: f64,
    pub rate_replicas: usize,
    pub moment_replicas: usize,
    pub generation_replicas: usize,
    pub kolmogorov_replicas: usize,
    pub excursion_samples: usize,
    pub excursion_trend_samples: usize,
    pub law_samples: usize,
    pub brute_instances: usize,
    pub contraction_instances: usize,
    pub workload_fans: usize,
}

impl Default for Scale {
    fn default() -> Self {
        Self {
            unbiasedness_replicas: 100_000,
            mean_count_replicas: 100_000,
            fans: 40_000,
            g_samples: 400_000,
            lattice_samples: 20_000,
            convergence_samples: 400_000,
            convergence_gamma_ref: 256.0,
            rate_replicas: 20_000,
            moment_replicas: 100_000,
            generation_replicas: 100_000,
            kolmogorov_replicas: 20_000,
            excursion_samples: 2000,
            excursion_trend_samples: 20_000,
            law_samples: 2000,
            brute_instances: 1000,
            contraction_instances: 100,
            workload_fans: 100,
        }
    }
}

impl Scale {
    pub fn quick() -> Self {
        Self {
            unbiasedness_replicas: 2000,
            mean_count_replicas: 2000,
            fans: 200,
            g_samples: 5000,
            lattice_samples: 2000,
            convergence_samples: 5000,
            convergence_gamma_ref: 64.0,
            rate_replicas: 200,
            moment_replicas: 2000,
            generation_replicas: 2000,
            kolmogorov_replicas: 200,
            excursion_samples: 100,
            excursion_trend_samples: 100,
            law_samples: 100,
            brute_instances: 50,
            contraction_instances: 20,
            workload_fans: 10,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub seed: u64,
    pub scale: Scale,
    pub thresholds: Thresholds,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: String,
    pub passed: bool,
    pub wall_time_s: f64,
    pub metrics: Vec<Metric>,
}

impl CriterionReport {
    /// One-line summary, `PASS`/`FAIL` first.
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let worst = self.metrics.iter().find(|m| !m.passed).or(self.metrics.first());
        let detail = worst
            .map(|m| format!("{}: {:.6} (se {:.2e}, {:?} {:.6})", m.name, m.value, m.stderr, m.comparison, m.threshold))
            .unwrap_or_default();
        format!("{verdict} criterion {:>2} {} [{:.1}s] {detail}", self.id, self.title, self.wall_time_s)
    }
}

pub fn run_criterion(id: u8, cfg: &VerifyConfig) -> Result<(CriterionReport, Outcome)> {
    let title = CRITERIA
        .iter()
        .find(|c| c.0 == id)
        .ok_or_else(|| Error::invalid("id", format!("no criterion {id}")))?
        .1;
    let start = Instant::now();
    let rng = RngStream::new(cfg.seed).child(u64::from(id));
    let outcome = criterion_outcome(id, &cfg.scale, &cfg.thresholds, &rng)?;
    let report = CriterionReport {
        id,
        title: title.to_string(),
        passed: outcome.passed(),
        wall_time_s: start.elapsed().as_secs_f64(),
        metrics: outcome.metrics.clone(),
    };
    Ok((report, outcome))
}

fn criterion_outcome(id: u8, sc: &Scale, th: &Thresholds, rng: &RngStream) -> Result<Outcome> {
    use StepDistribution::*;
    let mut out = Outcome::default();
    match id {
        1 => {
            for (k, eps) in [0.01, 0.002].into_iter().enumerate() {
                out.extend(ex::unbiasedness(1.0, eps, 0.5, StandardNormal, 1, sc.unbiasedness_replicas, th, &rng.child(k as u64))?);
            }
        }
        2 => {
            for (k, d) in StepDistribution::ALL.into_iter().enumerate() {
                out.extend(ex::mean_count(1.0, 0.01, 0.5, d, sc.mean_count_replicas, th, &rng.child(k as u64))?);
            }
        }
        3 => out = ex::fan_mean(1.0, 0.5, &[0.2, 0.1, 0.05], 6, 6.25e-6, sc.fans, th, rng)?,
        4 => {
            out.extend(ex::g_identity(StandardNormal, 64.0, sc.g_samples, 0.05, th, &rng.child(0))?);
            out.extend(ex::g_identity(CenteredUniform, 64.0, sc.g_samples, 0.05, th, &rng.child(1))?);
            out.extend(ex::g_identity(Rademacher, 64.0, sc.g_samples, 0.01, th, &rng.child(2))?);
        }
        5 => {
            let pairs = [
                (0.0, 1.0),
                (0.0, 4.0),
                (0.5, 2.0),
                (0.5, 5.0),
                (1.0, 5.0),
                (1.0, 10.0),
                (1.5, 3.0),
                (2.0, 2.0),
                (2.5, 7.0),
                (3.0, 6.0),
                (4.0, 12.0),
                (6.0, 20.0),
            ];
            out = ex::lattice_hitting(&pairs, sc.lattice_samples, th, rng)?;
        }
        6 => out = ex::g_convergence(StandardNormal, &[0.5, 2.5], &[8.0, 16.0, 32.0, 64.0], sc.convergence_gamma_ref, sc.convergence_samples, th, rng)?,
        7 => out = ex::rate_constant(1.0, 0.5, 1.0, 1e-3, StandardNormal, sc.rate_replicas, th, rng)?,
        8 => out = ex::moments(1.0, 0.5, &[0.01, 0.002], StandardNormal, sc.moment_replicas, th, rng)?,
        9 => out = ex::generation_decay(1.0, 0.5, 0.002, StandardNormal, 6, sc.generation_replicas, th, rng)?,
        10 => out = ex::kolmogorov(1.0, 0.25, 1e-3, &[(0.5, 2.0), (1.0, 2.0)], 5, StandardNormal, sc.kolmogorov_replicas, th, rng)?,
        11 => {
            out = ex::excursion_compare(1.0, 0.5, 1.0, 1e-4, sc.excursion_samples, &[1e-2, 1e-3, 1e-4], sc.excursion_trend_samples, th, rng)?
        }
        12 => out = ex::law_compare(1.0, 0.5, 1e-3, 0.05, 6, 2.5e-5, sc.law_samples, th, rng)?,
        13 => out = ex::distance_checks(sc.brute_instances, sc.contraction_instances, th, rng)?,
        14 => out = ex::workload_modulus(1.5, 1.0, 0.05, 6, 2.5e-5, 4, sc.workload_fans, th, rng)?,
        _ => return Err(Error::invalid("id", format!("no criterion {id}"))),
    }
    Ok(out)
}

/// Machine-readable summary of a suite run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub version: String,
    pub seed: u64,
    pub passed: bool,
    pub criteria: Vec<CriterionReport>,
}

/// Runs the listed criteria (all when `ids` is empty) in order.
pub fn verify(cfg: &VerifyConfig, ids: &[u8]) -> Result<VerifyReport> {
    cfg.thresholds.validate()?;
    let ids: Vec<u8> = if ids.is_empty() { CRITERIA.iter().map(|c| c.0).collect() } else { ids.to_vec() };
    let mut criteria = Vec::with_capacity(ids.len());
    for id in ids {
        criteria.push(run_criterion(id, cfg)?.0);
    }
    Ok(VerifyReport {
        version: crate::harness::manifest::VERSION.to_string(),
        seed: cfg.seed,
        passed: criteria.iter().all(|c| c.passed),
        criteria,
    })
}
