//! Full-size run of the fourteen acceptance criteria.
//!
//! Prints one `PASS`/`FAIL` line per criterion and exits non-zero if any fails.
//! Tolerances are written out here rather than taken from `Thresholds::default()`
//! so that a change to the library defaults cannot silently loosen the suite.

use std::process::ExitCode;

use tdmcfan::harness::verify::{run_criterion, CRITERIA};
use tdmcfan::harness::{Scale, Thresholds, VerifyConfig};

const SEED: u64 = 0;

fn pinned() -> Thresholds {
    Thresholds {
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

fn main() -> ExitCode {
    let cfg = VerifyConfig { seed: SEED, scale: Scale::default(), thresholds: pinned() };
    let mut failed = 0;
    for (id, title) in CRITERIA {
        match run_criterion(id, &cfg) {
            Ok((report, _)) => {
                println!("{}", report.line());
                if !report.passed {
                    failed += 1;
                }
            }
            Err(e) => {
                println!("FAIL criterion {id:>2} {title}: {e}");
                failed += 1;
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", CRITERIA.len() - failed, CRITERIA.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
