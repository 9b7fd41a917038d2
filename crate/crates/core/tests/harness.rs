use tdmcfan::chain::StepDistribution;
use tdmcfan::harness::experiments::calibrate_ks;
use tdmcfan::harness::{run_experiment, run_fan, verify, ExperimentConfig, ExperimentKind, RunManifest, Scale, Thresholds, VerifyConfig};
use tdmcfan::{Error, RngStream};

#[test]
fn unbiasedness_run_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { replicas: 20_000, seed: 4, ..ExperimentConfig::new(ExperimentKind::Unbiasedness) };
    let m = run_experiment(&cfg, dir.path()).unwrap();
    assert!(m.passed, "{:?}", m.metrics);
    assert_eq!(RunManifest::read(&dir.path().join("manifest.json")).unwrap(), m);
    for f in &m.files {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn rademacher_half_identity_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { dist: StepDistribution::Rademacher, ds: 0.01, ..ExperimentConfig::new(ExperimentKind::GIdentity) };
    let m = run_experiment(&cfg, dir.path()).unwrap();
    assert_eq!(m.metrics.len(), 1);
    assert!(m.metrics[0].value.abs() < 1e-6, "{:?}", m.metrics);
}

#[test]
fn malformed_config_names_the_field() {
    let err = ExperimentConfig::from_json(r#"{"kind": "fan-mean", "eps": -1}"#).and_then(|c| c.validate().map(|_| c)).unwrap_err();
    assert!(matches!(&err, Error::Config { field, .. } if field == "eps"), "{err}");
    let err = ExperimentConfig::from_json(r#"{"kind": "moments", "thresholds": {"ks_level": 2}}"#).and_then(|c| c.validate().map(|_| c)).unwrap_err();
    assert!(err.to_string().contains("thresholds.ks_level"), "{err}");
    assert!(ExperimentConfig::from_json(r#"{"kind": "moments", "epsilon": 0.1}"#).is_err());
}

#[test]
fn same_seed_same_bytes() {
    let cfg = ExperimentConfig { t: 0.2, gamma: 0.1, seed: 12, ..ExperimentConfig::new(ExperimentKind::FanMean) };
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_fan(&cfg, d1.path()).unwrap();
    run_fan(&cfg, d2.path()).unwrap();
    for f in ["fan.csv", "fan.json"] {
        assert_eq!(std::fs::read(d1.path().join(f)).unwrap(), std::fs::read(d2.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn ks_test_is_calibrated() {
    let out = calibrate_ks(2000, 500, &Thresholds::default(), &RngStream::new(8)).unwrap();
    assert!(out.passed(), "{:?}", out.metrics);
}

#[test]
fn selected_criteria_report() {
    let cfg = VerifyConfig { seed: 1, scale: Scale::quick(), thresholds: Thresholds::default() };
    let report = verify(&cfg, &[5, 13]).unwrap();
    assert_eq!(report.criteria.len(), 2);
    assert!(report.passed, "{report:?}");
    assert!(report.criteria.iter().all(|c| c.line().starts_with("PASS criterion")));
}
