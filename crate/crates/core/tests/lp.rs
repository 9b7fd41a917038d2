use proptest::prelude::*;
use tdmcfan::lp::{dp, interpolate, lp_distance, Geometry, PointMeasure, TaggedPoint};

fn point(a: f64) -> impl Strategy<Value = TaggedPoint> {
    (-1.0f64..1.0, 1e-3f64..2.0, 0u32..3).prop_map(move |(x, d, n)| TaggedPoint::new(x, -a * x + d, n))
}

fn measure(a: f64, max: usize) -> impl Strategy<Value = PointMeasure> {
    prop::collection::vec(point(a), 0..=max).prop_map(PointMeasure::new)
}

fn instance(max: usize) -> impl Strategy<Value = (Geometry, PointMeasure, PointMeasure)> {
    (0.1f64..2.5, prop::sample::select(vec![0.25, 0.5, 0.75, 1.0]))
        .prop_flat_map(move |(a, p)| (Just(Geometry::new(a, p).unwrap()), measure(a, max), measure(a, max)))
}

// Independent oracle: minimise over every injection of μ into ν ∪ Δ and ν's leftovers.
fn brute(mu: &PointMeasure, nu: &PointMeasure, g: &Geometry) -> f64 {
    fn go(i: usize, mu: &[TaggedPoint], nu: &[TaggedPoint], used: &mut Vec<bool>, g: &Geometry) -> f64 {
        if i == mu.len() {
            return nu.iter().zip(used.iter()).filter(|(_, u)| !**u).map(|(y, _)| dp(None, Some(y), g)).sum();
        }
        let mut best = dp(Some(&mu[i]), None, g) + go(i + 1, mu, nu, used, g);
        for j in 0..nu.len() {
            if !used[j] {
                used[j] = true;
                best = best.min(dp(Some(&mu[i]), Some(&nu[j]), g) + go(i + 1, mu, nu, used, g));
                used[j] = false;
            }
        }
        best
    }
    go(0, mu.points(), nu.points(), &mut vec![false; nu.len()], g)
}

proptest! {
    #[test]
    fn matches_exhaustive_search((g, mu, nu) in instance(7)) {
        let fast = lp_distance(&mu, &nu, &g);
        let slow = brute(&mu, &nu, &g);
        prop_assert!((fast - slow).abs() <= 1e-12 * (1.0 + slow), "{fast} vs {slow}");
    }

    #[test]
    fn symmetric_and_normed((g, mu, nu) in instance(10)) {
        prop_assert_eq!(lp_distance(&mu, &nu, &g), lp_distance(&nu, &mu, &g));
        prop_assert_eq!(lp_distance(&mu, &mu, &g), 0.0);
        let norm = lp_distance(&mu, &PointMeasure::empty(), &g);
        prop_assert!((norm - mu.norm(&g)).abs() < 1e-12 * (1.0 + norm));
    }

    #[test]
    fn interpolation_endpoints_and_contraction((g, mu, nu) in instance(6), u in 0.0f64..1.0, w in 0.0f64..1.0) {
        let d = lp_distance(&mu, &nu, &g);
        let at = |t| interpolate(&mu, &nu, t, &g).unwrap();
        prop_assert!(lp_distance(&at(0.0), &mu, &g) < 1e-9);
        prop_assert!(lp_distance(&at(1.0), &nu, &g) < 1e-9);
        let (s, t) = (u.min(w), u.max(w));
        let lhs = lp_distance(&at(s), &at(t), &g);
        prop_assert!(lhs <= (t - s).powf(g.p) * d + 1e-9, "{lhs} > {}", (t - s).powf(g.p) * d);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]
    #[test]
    fn triangle_inequality(a in 0.1f64..2.5, p in prop::sample::select(vec![0.25, 0.5, 1.0]), (x, y, z) in (measure(1.0, 5), measure(1.0, 5), measure(1.0, 5))) {
        // The measures are drawn for a = 1 and kept only where they lie in the domain for `a`.
        let keep = |m: &PointMeasure| PointMeasure::new(m.points().iter().copied().filter(|q| q.in_domain(a)).collect());
        let (x, y, z) = (keep(&x), keep(&y), keep(&z));
        let g = Geometry::new(a, p).unwrap();
        let (xy, yz, xz) = (lp_distance(&x, &y, &g), lp_distance(&y, &z, &g), lp_distance(&x, &z, &g));
        prop_assert!(xz <= xy + yz + 1e-9, "{xz} > {xy} + {yz}");
    }
}
