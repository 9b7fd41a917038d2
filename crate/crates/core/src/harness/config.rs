use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chain::StepDistribution;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Unbiasedness,
    MeanCount,
    FanMean,
    GIdentity,
    RateConstant,
    Moments,
    Kolmogorov,
    LawCompare,
    ExcursionCompare,
    Distance,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Unbiasedness => "unbiasedness",
            Self::MeanCount => "mean-count",
            Self::FanMean => "fan-mean",
            Self::GIdentity => "g-identity",
            Self::RateConstant => "rate-constant",
            Self::Moments => "moments",
            Self::Kolmogorov => "kolmogorov",
            Self::LawCompare => "law-compare",
            Self::ExcursionCompare => "excursion-compare",
            Self::Distance => "distance",
        }
    }
}

/// Pass/fail limits. Every verdict in the harness reads its limit from here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Largest accepted `|z|` for a mean comparison.
    pub z_max: f64,
    /// KS rejection level.
    pub ks_level: f64,
    /// Half-identity tolerance for Monte Carlo `G`.
    pub half_identity_tol: f64,
    /// Half-identity tolerance for the exact lattice `G`.
    pub lattice_tol: f64,
    pub rate_bias: f64,
    /// Smallest `|z|` against the naive rate.
    pub naive_z_min: f64,
    pub moment_ratio: f64,
    pub generation_ratio: f64,
    /// Allowed shortfall of the fitted modulus slope below `pq/2`.
    pub slope_slack: f64,
    pub brute_force_tol: f64,
    pub contraction_slack: f64,
    /// Largest accepted p99/median ratio of the workload modulus.
    pub workload_spread: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            z_max: 3.0,
            ks_level: 0.01,
            half_identity_tol: 0.03,
            lattice_tol: 1e-6,
            rate_bias: 0.1,
            naive_z_min: 3.0,
            moment_ratio: 2.0,
            generation_ratio: 0.75,
            slope_slack: 0.15,
            brute_force_tol: 1e-12,
            contraction_slack: 1e-9,
            workload_spread: 10.0,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("thresholds.z_max", self.z_max),
            ("thresholds.half_identity_tol", self.half_identity_tol),
            ("thresholds.lattice_tol", self.lattice_tol),
            ("thresholds.rate_bias", self.rate_bias),
            ("thresholds.naive_z_min", self.naive_z_min),
            ("thresholds.moment_ratio", self.moment_ratio),
            ("thresholds.generation_ratio", self.generation_ratio),
            ("thresholds.slope_slack", self.slope_slack),
            ("thresholds.brute_force_tol", self.brute_force_tol),
            ("thresholds.contraction_slack", self.contraction_slack),
            ("thresholds.workload_spread", self.workload_spread),
        ];
        for (field, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config_error(field, format!("must be positive and finite, got {v}")));
            }
        }
        if !(self.ks_level > 0.0 && self.ks_level < 1.0) {
            return Err(config_error("thresholds.ks_level", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// One experiment run. Fields not used by `kind` are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub a: f64,
    pub eps: f64,
    pub t: f64,
    pub gamma: f64,
    /// Height schedule for extrapolation in `γ`.
    pub gammas: Vec<f64>,
    pub n_max: u32,
    /// Fan grid step; `γ²/100` at the smallest height when absent.
    pub h: Option<f64>,
    pub p: f64,
    pub q: f64,
    /// Walkers per replica.
    pub m: usize,
    pub replicas: usize,
    pub dist: StepDistribution,
    /// Step sizes compared by `moments` and `excursion-compare`.
    pub eps_schedule: Vec<f64>,
    /// Walk height for Monte Carlo `G`.
    pub g_gamma: f64,
    /// Quadrature cell width for the half identity.
    pub ds: f64,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub thresholds: Thresholds,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Unbiasedness,
            a: 1.0,
            eps: 0.01,
            t: 0.5,
            gamma: 0.05,
            gammas: vec![0.2, 0.1, 0.05],
            n_max: 6,
            h: None,
            p: 0.5,
            q: 2.0,
            m: 1,
            replicas: 100_000,
            dist: StepDistribution::StandardNormal,
            eps_schedule: vec![0.01, 0.002],
            g_gamma: 64.0,
            ds: 0.05,
            seed: 0,
            output: None,
            thresholds: Thresholds::default(),
        }
    }
}

pub(crate) fn config_error(field: &str, reason: impl Into<String>) -> Error {
    Error::Config { field: field.to_string(), reason: reason.into() }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_error(field, format!("must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        Self { kind, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        positive("eps", self.eps)?;
        positive("t", self.t)?;
        positive("gamma", self.gamma)?;
        positive("g_gamma", self.g_gamma)?;
        positive("ds", self.ds)?;
        positive("q", self.q)?;
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return Err(config_error("a", format!("must be finite and ≥ 0, got {}", self.a)));
        }
        let steps = self.t / self.eps;
        if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) {
            return Err(config_error("t", format!("must be a multiple of eps = {}", self.eps)));
        }
        if self.gammas.is_empty() {
            return Err(config_error("gammas", "schedule is empty"));
        }
        for g in &self.gammas {
            positive("gammas", *g)?;
        }
        if !(1..=64).contains(&self.n_max) {
            return Err(config_error("n_max", format!("must lie in 1..=64, got {}", self.n_max)));
        }
        if let Some(h) = self.h {
            positive("h", h)?;
            let g_min = self.gammas.iter().chain([&self.gamma]).fold(f64::INFINITY, |m, g| m.min(*g));
            if h > g_min * g_min / 100.0 * (1.0 + 1e-12) {
                return Err(config_error("h", format!("must not exceed γ²/100 = {}", g_min * g_min / 100.0)));
            }
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(config_error("p", format!("must lie in (0, 1], got {}", self.p)));
        }
        if self.m == 0 {
            return Err(config_error("m", "need at least one walker per replica"));
        }
        if self.replicas < 2 {
            return Err(config_error("replicas", "need at least two replicas"));
        }
        if self.eps_schedule.is_empty() {
            return Err(config_error("eps_schedule", "schedule is empty"));
        }
        for e in &self.eps_schedule {
            positive("eps_schedule", *e)?;
        }
        self.thresholds.validate()
    }

    /// Smallest height that the fan grid has to resolve.
    pub fn fan_h(&self) -> f64 {
        let g_min = self.gammas.iter().chain([&self.gamma]).fold(f64::INFINITY, |m, g| m.min(*g));
        self.h.unwrap_or(g_min * g_min / 100.0)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn bad_eps_names_field() {
        let cfg = ExperimentConfig { eps: 0.0, ..Default::default() };
        match cfg.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "eps"),
            other => panic!("{other:?}"),
        }
        let err = ExperimentConfig::from_json(r#"{"kind": "unbiasedness", "eps": -1}"#).unwrap_err();
        assert!(err.to_string().contains("`eps`"), "{err}");
    }

    #[test]
    fn misaligned_horizon() {
        let cfg = ExperimentConfig { t: 0.505, eps: 0.01, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(Error::Config { field, .. }) if field == "t"));
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"kind": "g-identity", "dist": "rademacher"}"#).unwrap();
        assert_eq!(cfg.kind, ExperimentKind::GIdentity);
        assert_eq!(cfg.dist, StepDistribution::Rademacher);
        assert_eq!(cfg.eps, 0.01);
        assert!(ExperimentConfig::from_json(r#"{"kind": "moments", "bogus": 1}"#).is_err());
    }

    #[test]
    fn threshold_field_path() {
        let mut cfg = ExperimentConfig::default();
        cfg.thresholds.ks_level = 1.5;
        assert!(matches!(cfg.validate(), Err(Error::Config { field, .. }) if field == "thresholds.ks_level"));
    }
}
