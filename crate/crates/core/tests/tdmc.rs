use proptest::prelude::*;
use tdmcfan::chain::{weighted_mc_estimate, ChainParams, Potential, StepDistribution};
use tdmcfan::tdmc::{branch_decision, run_estimator, run_replicas, spawn_tickets, Start, Tdmc};
use tdmcfan::RngStream;

#[test]
fn unbiased_for_every_step_law() {
    let (a, eps, t, m) = (1.0, 0.02, 0.5, 40_000);
    let f = |x: f64| (x - 0.2).cos() + 0.5 * x;
    for (k, dist) in StepDistribution::ALL.into_iter().enumerate() {
        let root = RngStream::new(11).child(k as u64);
        let dynamics = Tdmc::linear(a, eps, dist).unwrap();
        let est = run_estimator(f, 0.0, t, m, &dynamics, &root.child(0)).unwrap();
        let oracle = weighted_mc_estimate(f, 0.0, t, m, &Potential::linear(a), &ChainParams::new(eps).unwrap(), dist, &root.child(1)).unwrap();
        let z = est.z_against(&oracle);
        assert!(z.abs() < 3.0, "{dist}: tdmc {est:?} vs weighted {oracle:?}, z = {z}");
    }
}

// Midpoint grid over (θ, u) ∈ (0,1)²: E[N_off 1{survive}] must equal P.
#[test]
fn offspring_mean_on_a_grid() {
    let k = 1000;
    for p in [0.3, 1.0, 1.7, 2.5] {
        let mut total = 0.0;
        for i in 0..k {
            for j in 0..k {
                let theta = (i as f64 + 0.5) / k as f64;
                let u = (j as f64 + 0.5) / k as f64;
                let (alive, n) = branch_decision(p, theta, u).unwrap();
                if alive {
                    total += n as f64;
                }
            }
        }
        let mean = total / (k * k) as f64;
        assert!((mean - p).abs() < 2e-3, "P = {p}: grid mean {mean}");
    }
}

#[test]
fn generations_thin_out() {
    let dynamics = Tdmc::linear(1.0, 0.01, StepDistribution::StandardNormal).unwrap();
    let counts = run_replicas(0.0, 0.5, 20_000, &dynamics, Start::Immortal, &RngStream::new(5), |e| {
        (0..6).map(|n| e.count_generation(n) as f64).collect::<Vec<_>>()
    })
    .unwrap();
    let means: Vec<f64> = (0..6).map(|n| counts.iter().map(|c| c[n]).sum::<f64>() / counts.len() as f64).collect();
    assert_eq!(means[0], 1.0);
    for n in 2..5 {
        let r = means[n + 1] / means[n];
        assert!(r <= 0.75, "generation {} over {n}: {r} (means {means:?})", n + 1);
    }
}

#[test]
fn same_seed_same_population() {
    let dynamics = Tdmc::linear(1.2, 0.01, StepDistribution::Rademacher).unwrap();
    let observe = |e: &tdmcfan::tdmc::Ensemble| e.particles.iter().map(|p| (p.x, p.ticket, p.generation)).collect::<Vec<_>>();
    let a = run_replicas(0.0, 0.3, 50, &dynamics, Start::UniformTicket, &RngStream::new(9), observe).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let b = pool.install(|| run_replicas(0.0, 0.3, 50, &dynamics, Start::UniformTicket, &RngStream::new(9), observe).unwrap());
    assert_eq!(a, b);
}

proptest! {
    #[test]
    fn tickets_stay_in_range(p in 1.0001f64..40.0, theta in 0.0f64..=1.0, u in 0.0f64..1.0, seed: u64) {
        prop_assume!(theta <= p);
        let (alive, n) = branch_decision(p, theta, u).unwrap();
        prop_assert!(alive);
        prop_assert!(n >= 1 && n as f64 <= p + 1.0);
        let tickets = spawn_tickets(p, theta, n, &mut RngStream::new(seed)).unwrap();
        prop_assert_eq!(tickets.len(), n as usize);
        prop_assert_eq!(tickets[0], theta / p);
        for t in &tickets[1..] {
            prop_assert!(*t >= 1.0 / p && *t <= 1.0);
        }
    }

    #[test]
    fn small_weight_never_branches(p in 1e-6f64..=1.0, theta in 1e-9f64..=1.0, u in 0.0f64..1.0) {
        let (alive, n) = branch_decision(p, theta, u).unwrap();
        prop_assert_eq!(alive, p >= theta);
        if alive {
            prop_assert_eq!(n, 1);
        }
    }
}
