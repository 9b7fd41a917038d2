use tdmcfan::chain::StepDistribution::{self, StandardNormal};
use tdmcfan::hitting::{check_renewal, estimate_g, hit_prob_mc_capped, GGrid, GMethod, HittingQuery};
use tdmcfan::RngStream;

#[test]
fn normal_passage_matches_gambler_ruin_ratio() {
    let q = HittingQuery::new(20.0, 100.0, StandardNormal).unwrap();
    let p = hit_prob_mc_capped(&q, 20_000, u64::MAX, &RngStream::new(1)).unwrap();
    assert!((p.mean - 1.0 / 6.0).abs() < 3.0 * p.stderr + 0.02, "{p:?}");
}

#[test]
fn g_grows_like_the_identity() {
    let q = HittingQuery::new(50.0, 200.0, StandardNormal).unwrap();
    let g = hit_prob_mc_capped(&q, 5000, u64::MAX, &RngStream::new(2)).unwrap().scale(250.0);
    let ratio = g.mean / 50.0;
    assert!((0.9..=1.1).contains(&ratio), "{g:?}");
}

#[test]
fn g_is_monotone() {
    for (k, dist) in [StandardNormal, StepDistribution::TwoSidedExponential].into_iter().enumerate() {
        let grid = GGrid::build(dist, 32.0, 6.0, 0.25, 20_000, u64::MAX, &RngStream::new(10 + k as u64)).unwrap();
        for w in grid.g.windows(2) {
            let slack = 3.0 * w[0].stderr.hypot(w[1].stderr);
            assert!(w[1].mean >= w[0].mean - slack, "{dist}: {w:?}");
        }
    }
}

#[test]
fn normal_renewal_equation() {
    for s in [0.5, 2.0] {
        let r = check_renewal(s, StandardNormal, GMethod::MonteCarlo { gamma: 32.0, samples: 40_000 }, 40_000, &RngStream::new(4)).unwrap();
        assert!(r.residual < 3.0 * r.rhs.stderr + 0.05, "s = {s}: {r:?}");
    }
}

#[test]
fn estimates_settle_as_height_grows() {
    let (g, diag) = estimate_g(1.0, StandardNormal, &[4.0, 8.0, 16.0, 32.0], 40_000, u64::MAX, &RngStream::new(6)).unwrap();
    let seq = &diag.sequence;
    let n = seq.len();
    let last = (seq[n - 1].mean - seq[n - 2].mean).abs();
    let se = seq[n - 1].stderr.hypot(seq[n - 2].stderr);
    assert!(last < 3.0 * se + 0.05, "{diag:?}");
    assert_eq!(g, seq[n - 1]);
    assert_eq!(diag.differences.len(), n - 1);
}
