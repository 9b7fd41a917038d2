//! The numerical experiments behind the verification suite.
//!
//! Each function runs one experiment at the given size and returns its judged
//! metrics together with plot-ready tables.

use rayon::prelude::*;

use crate::chain::{exact_exponential_moment, weighted_endpoints, ChainParams, Potential, StepDistribution};
use crate::error::{Error, Result};
use crate::fan::{sample_excursion_geq, sample_fan, AncestorTag, Excursion, FanParams};
use crate::harness::config::Thresholds;
use crate::harness::manifest::{Comparison, Metric, Outcome, Table};
use crate::harness::oracle::brute_force_distance;
use crate::hitting::{
    g_profile, half_identity_from_minima, hit_prob_exact_rademacher, hit_prob_mc_capped, passage_maxima, passage_minima,
    HittingQuery,
};
use crate::lp::{interpolate, lp_distance, Geometry, PointMeasure, TaggedPoint};
use crate::rng::RngStream;
use crate::row;
use crate::stats::{linear_fit, loglog_slope, quantile, two_sample_ks, Estimate};
use crate::tdmc::{initial_ensemble, offspring_rate_experiment, run_replicas, simulate, Start, Tdmc};

/// Total step budget for walk batches; large enough never to bind at desk scale.
const WALK_BUDGET: u64 = 100_000_000_000;

/// Stand-in for "finite" in verdicts, since JSON has no infinity.
const FINITE_CEILING: f64 = 1e12;

fn f_min_sq(x: f64) -> f64 {
    (x * x).min(10.0)
}

/// `a - b` judged against `z_max` combined standard errors.
fn agreement(name: impl Into<String>, a: Estimate, b: Estimate, z_max: f64) -> Metric {
    let se = a.stderr.hypot(b.stderr);
    Metric::judge(name, a.mean - b.mean, se, Comparison::AbsAtMost, z_max * se)
}

/// Means over consecutive groups of `m`.
fn group_means(xs: &[f64], m: usize) -> Vec<f64> {
    xs.chunks(m).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
}

/// Ticketed estimate of `f ∈ {1, x, min(x², 10)}` against weighted Monte Carlo on
/// the same law; `m · replicas` independent walkers in each method.
#[allow(clippy::too_many_arguments)]
pub fn unbiasedness(a: f64, eps: f64, t: f64, dist: StepDistribution, m: usize, replicas: usize, th: &Thresholds, rng: &RngStream) -> Result<Outcome> {
    let dynamics = Tdmc::linear(a, eps, dist)?;
    let n = m * replicas;
    let sums = run_replicas(0.0, t, n, &dynamics, Start::UniformTicket, &rng.child(0), |ens| {
        let mut s = [0.0; 3];
        for p in &ens.particles {
            s[0] += 1.0;
            s[1] += p.x;
            s[2] += f_min_sq(p.x);
        }
        s
    })?;
    let oracle = weighted_endpoints(0.0, t, n, &Potential::linear(a), &ChainParams::new(eps)?, dist, &rng.child(1))?;
    let fs: [(&str, fn(f64) -> f64); 3] = [("1", |_| 1.0), ("x", |x| x), ("min(x^2,10)", f_min_sq)];
    let mut out = Outcome::default();
    let mut table = Table::new(&["replica", "f", "estimate"]);
    for (k, (name, f)) in fs.iter().enumerate() {
        let per_walker: Vec<f64> = sums.iter().map(|s| s[k]).collect();
        let grouped = group_means(&per_walker, m);
        for (i, v) in grouped.iter().enumerate() {
            table.push(row![i, name, v]);
        }
        let tdmc = Estimate::from_samples(&grouped);
        let reference: Vec<f64> = oracle.iter().map(|(y, w)| f(*y) * w).collect();
        let reference = Estimate::from_samples(&group_means(&reference, m));
        out.metrics.push(agreement(format!("{} eps={eps} f={name}: tdmc - weighted", dist.name()), tdmc, reference, th.z_max));
    }
    out.tables.push(("unbiasedness".into(), table));
    Ok(out)
}

/// `E N_t` from the ticketed algorithm against the exact `E e^{a y_t}`.
#[allow(clippy::too_many_arguments)]
pub fn mean_count(a: f64, eps: f64, t: f64, dist: StepDistribution, replicas: usize, th: &Thresholds, rng: &RngStream) -> Result<Outcome> {
    let dynamics = Tdmc::linear(a, eps, dist)?;
    let steps = dynamics.params.steps_for(t)?;
    let exact = exact_exponential_moment(dist, a, eps, steps)
        .ok_or_else(|| Error::invalid("a", format!("E e^(a y_t) is infinite for the {} law", dist.name())))?;
    let counts: Vec<f64> = run_replicas(0.0, t, replicas, &dynamics, Start::UniformTicket, rng, |e| e.len() as f64)?;
    let mut table = Table::new(&["replica", "N_t"]);
    for (i, c) in counts.iter().enumerate() {
        table.push(row![i, c]);
    }
    let est = Estimate::from_samples(&counts);
    Ok(Outcome {
        metrics: vec![agreement(format!("{} eps={eps}: E N_t - exact {exact:.6}", dist.name()), est, Estimate::exact(exact), th.z_max)],
        tables: vec![("mean_count".into(), table)],
    })
}

/// Per-fan particle counts at `t` for each height in `gammas`, from fans sampled
/// at the smallest height and thinned.
pub fn fan_counts(a: f64, t: f64, gammas: &[f64], n_max: u32, h: f64, fans: usize, rng: &RngStream) -> Result<Vec<Vec<f64>>> {
    let g_min = gammas.iter().copied().fold(f64::INFINITY, f64::min);
    let params = FanParams { a, gamma: g_min, n_max, horizon: t, h };
    params.validate()?;
    (0..fans as u64)
        .into_par_iter()
        .map(|i| {
            let fan = sample_fan(0.0, AncestorTag::Random, &params, &rng.child(i))?;
            gammas.iter().map(|g| Ok(fan.restrict(*g, n_max)?.particle_count(t)? as f64)).collect()
        })
        .collect()
}

/// `γ → 0` extrapolated fan mean against `e^{a² t / 2}`. The extrapolation is a
/// per-fan least-squares intercept in `γ`, so its spread gives the standard error.
#[allow(clippy::too_many_arguments)]
pub fn fan_mean(a: f64, t: f64, gammas: &[f64], n_max: u32, h: f64, fans: usize, th: &Thresholds, rng: &RngStream) -> Result<Outcome> {
    let rows = fan_counts(a, t, gammas, n_max, h, fans, rng)?;
    let mut table = Table::new(&["fan", "gamma", "N_t"]);
    for (i, r) in rows.iter().enumerate() {
        for (g, n) in gammas.iter().zip(r) {
            table.push(row![i, g, n]);
        }
    }
    let est = if gammas.len() >= 2 {
        let per_fan: Vec<f64> = rows.iter().map(|r| linear_fit(gammas, r).map(|f| f.intercept)).collect::<Result<_>>()?;
        Estimate::from_samples(&per_fan)
    } else {
        Estimate::from_samples(&rows.iter().map(|r| r[0]).collect::<Vec<_>>())
    };
    let exact = (a * a * t / 2.0).exp();
    Ok(Outcome {
        metrics: vec![agreement(format!("extrapolated E N_t - {exact:.6}"), est, Estimate::exact(exact), th.z_max)],
        tables: vec![("fan_mean".into(), table)],
    })
}

/// `∫ ν([s, ∞)) Ĝ(s) ds` against 1/2. The lattice law uses the exact `G`;
/// other laws one coupled batch of walks at height `g_gamma`.
#[allow(clippy::too_many_arguments)]
pub fn g_identity(dist: StepDistribution, g_gamma: f64, samples: usize, ds: f64, th: &Thresholds, rng: &RngStream) -> Result<Outcome> {
    // Cells cover the support of ν([s, ∞)) down to a negligible tail.
    let mut n = 1usize;
    while dist.tail(n as f64 * ds) > 1e-7 {
        n += 1;
    }
    let edges: Vec<f64> = (0..=n).map(|i| i as f64 * ds).collect();
    let mids: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let mut table = Table::new(&["s", "G", "stderr"]);
    let (value, tol, label) = if dist == StepDistribution::Rademacher {
        let mut total = 0.0;
        for (m, w) in mids.iter().zip(edges.windows(2)) {
            let g = crate::hitting::g_rademacher_exact(*m)?;
            table.push(row![m, g, 0.0]);
            total += (w[1] - w[0]) * dist.tail(*m) * g;
        }
        (Estimate::exact(total), th.lattice_tol, "exact G")
    } else {
        let minima = passage_minima(g_gamma, *mids.last().unwrap(), dist, samples, WALK_BUDGET, rng)?;
        for (m, g) in mids.iter().zip(g_profile(g_gamma, &mids, &minima)) {
            table.push(row![m, g.mean, g.stderr]);
        }
        (half_identity_from_minima(dist, &edges, g_gamma, &minima), th.half_identity_tol, "monte carlo G")
    };
    Ok(Outcome {
        metrics: vec![Metric::judge(
            format!("{} half identity ({label}) - 1/2", dist.name()),
            value.mean - 0.5,
            value.stderr,
            Comparison::AbsAtMost,
            tol,
        )],
        tables: vec![("g_profile".into(), table)],
    })
}

/// Monte Carlo `P_{s,γ}` for the ±1 walk against the absorbing-chain solve.
pub fn lattice_hitting(pairs: &[(f64, f64)], samples: usize, th: &Thresholds, rng: &RngStream) -> Result<Outcome> {
    let mut out = Outcome::default();
    let mut table = Table::new(&["s", "gamma", "mc", "stderr", "exact"]);
    for (k, &(s, g)) in pairs.iter().enumerate() {
        let q = HittingQuery::new(s, g, StepDistribution::Rademacher)?;
        let mc = hit_prob_mc_capped(&q, samples, WALK_BUDGET, &rng.child(k as u64))?;
        let exact = hit_prob_exact_rademacher(s, g)?;
        table.push(row![s, g, mc.mean, mc.stderr, exact]);
        out.metrics.push(agreement(format!("P(s={s}, gamma={g}): mc - exact"), mc, Estimate::exact(exact), th.z_max));
    }
    let p15 = hit_prob_exact_rademacher(1.0, 5.0)?;
    out.metrics.push(Metric::judge("P(s=1, gamma=5) - 1/6", p15 - 1.0 / 6.0, 0.0, Comparison::AbsAtMost, 1e-12));
    out.tables.push(("lattice_hitting".into(), table));
    Ok(out)
}

/// Scaled error `|(γ+s) P̂_{s,γ} - Ĝ(s)| γ^{0.4}` along `gammas`, with `Ĝ(s)` taken
/// at `gamma_ref` from the same coupled batch of walks. The error must not
/// increase by more than `z_max` combined standard errors between neighbours.
#[allow(clippy::too_many_arguments)]
pub fn g_convergence(
    dist: StepDistribution,
    s_values: &[f64],
    gammas: &[f64],
    gamma_ref: f64,
    samples: usize,
    th: &Thresholds,
    rng: &RngStream,
) -> Result<Outcome> {
    let mut out = Outcome::default();
    let mut table = Table::new(&["s", "gamma", "scaled_error", "stderr"]);
    for (k, &s) in s_values.iter().enumerate() {
        let maxima = passage_maxima(s, gamma_ref, dist, samples, WALK_BUDGET, &rng.child(k as u64))?;
        let reached = |g: f64| -> Vec<f64> { maxima.iter().map(|m| if *m >= g { 1.0 } else { 0.0 }).collect() };
        let at_ref = reached(gamma_ref);
        let mut seq = Vec::with_capacity(gammas.len());
        for &g in gammas {
            let diffs: Vec<f64> = reached(g).iter().zip(&at_ref).map(|(x, r)| (g + s) * x - (gamma_ref + s) * r).collect();
            let e = Estimate::from_samples(&diffs);
            let scale = g.powf(0.4);
            let q = Estimate::new(e.mean.abs() * scale, e.stderr * scale);
            table.push(row![s, g, q.mean, q.stderr]);
            seq.push((g, q));
        }
        for w in seq.windows(2) {
            let ((g0, a), (g1, b)) = (w[0], w[1]);
            let se = a.stderr.hypot(b.stderr);
            out.metrics.push(Metric::judge(
                format!("s={s}: scaled error increase gamma {g0} -> {g1}"),
                b.mean - a.mean,
                se,
                Comparison::AtMost,
                th.z_max * se,
            ));
        }
    }
    out.tables.push(("g_convergence".into(), table));
    Ok(out)
}

/// Rate of `γ`-reaching first-generation offspring of an immortal ancestor,
/// against the value `a/(2γ)` and the naive `a/(4γ)`, heights measured in `x`.
#[allow(clippy::too_many_arguments)]
pub fn rate_constant(a: f64, gamma: f64, t_end: f64, eps: f64, dist: StepDistribution, replicas: usize, th: &Thresholds, rng: &RngStream) -> Result<Outcome> {
    let est = offspring_rate_experiment(a, gamma, t_end, eps, dist, replicas, rng)?;
    let target = a / (2.0 * gamma);
    let naive = a / (4.0 * gamma);
    let mut table = Table::new(&["quantity", "value", "stderr"]);
    table.push(row!["rate", est.mean, est.stderr]);
    table.push(row!["target", target, 0.0]);
    table.push(row!["naive", naive, 0.0]);
    Ok(Outcome {
        metrics: vec![
            Metric::judge(format!("rate - {target}"), est.mean - target, est.stderr, Comparison::AbsAtMost, th.rate_bias),
            Metric::judge(format!("z against naive {naive}"), est.z_exact(naive), 1.0, Comparison::AbsAbove, th.naive_z_min),
        ],
        tables: vec![("rate_constant".into(), table)],
    })
}

/// `E N_t^p`, `p = 1..=4`, for each step size; the largest and smallest value of
/// each moment across step sizes must differ by less than `moment_ratio`.
#[allow(clippy::too_many_arguments)]
pub fn moments(a: f64, t: f64, eps_schedule: &[f64], dist: StepDistribution, replicas: usize, th: &Thresholds, rng: &RngStream) -> Result<Outcome> {
    let mut table = Table::new(&["eps", "p", "moment", "stderr"]);
    let mut by_p = vec![Vec::new(); 4];
    for (k, &eps) in eps_schedule.iter().enumerate() {
        let dynamics = Tdmc::linear(a, eps, dist)?;
        let counts = run_replicas(0.0, t, replicas, &dynamics, Start::UniformTicket, &rng.child(k as u64), |e| e.len() as f64)?;
        for (p, slot) in by_p.iter_mut().enumerate() {
            let xs: Vec<f64> = counts.iter().map(|n| n.powi(p as i32 + 1)).collect();
            let e = Estimate::from_samples(&xs);
            table.push(row![eps, p + 1, e.mean, e.stderr]);
            slot.push(e);
        }
    }
    let metrics = by_p
        .iter()
        .enumerate()
        .map(|(p, es)| {
            let hi = es.iter().copied().fold(es[0], |m, e| if e.mean > m.mean { e } else { m });
            let lo = es.iter().copied().fold(es[0], |m, e| if e.mean < m.mean { e } else { m });
            let r = hi.mean / lo.mean;
            let se = r * (hi.stderr / hi.mean).hypot(lo.stderr / lo.mean);
            Metric::judge(format!("E N^{} max/min over eps", p + 1), r, se, Comparison::Below, th.moment_ratio)
        })
        .collect();
    Ok(Outcome { metrics, tables: vec![("moments".into(), table)] })
}

/// Mean number of generation-`n` descendants of an immortal ancestor at `t`,
/// `n = 1..=n_max`; successive ratios from `n = 2` on must stay below `generation_ratio`.
#[allow(clippy::too_many_arguments)]
pub fn generation_decay(a: f64, t: f64, eps: f64, dist: StepDistribution, n_max: u32, replicas: usize, th: &Thresholds, rng: &RngStream) -> Result<Outcome> {
    let dynamics = Tdmc::linear(a, eps, dist)?;
    let n_max = n_max.max(3) as usize;
    let counts = run_replicas(0.0, t, replicas, &dynamics, Start::Immortal, rng, |e| {
        let mut c = vec![0.0; n_max + 1];
        for p in &e.particles {
            if (p.generation as usize) <= n_max {
                c[p.generation as usize] += 1.0;
            }
        }
        c
    })?;
    let means: Vec<Estimate> = (0..=n_max).map(|n| Estimate::from_samples(&counts.iter().map(|c| c[n]).collect::<Vec<_>>())).collect();
    let mut table = Table::new(&["generation", "mean", "stderr"]);
    for (n, e) in means.iter().enumerate() {
        table.push(row![n, e.mean, e.stderr]);
    }
    let metrics = (2..n_max)
        .map(|n| {
            let (lo, hi) = (means[n], means[n + 1]);
            let r = hi.mean / lo.mean;
            let se = r * (hi.stderr / hi.mean).hypot(lo.stderr / lo.mean);
            Metric::judge(format!("E N^{} / E N^{n}", n + 1), r, se, Comparison::AtMost, th.generation_ratio)
        })
        .collect();
    Ok(Outcome { metrics, tables: vec![("generation_decay".into(), table)] })
}

/// `E ‖μ_{t0+δ} - μ_{t0}‖_p^q` for `δ = ε 2^k`, `k = 0..=k_max`, and the slope of
/// its log against `log δ`, which must reach `pq/2 - slope_slack`.
#[allow(clippy::too_many_arguments)]
pub fn kolmogorov(
    a: f64,
    t0: f64,
    eps: f64,
    pq: &[(f64, f64)],
    k_max: u32,
    dist: StepDistribution,
    replicas: usize,
    th: &Thresholds,
    rng: &RngStream,
) -> Result<Outcome> {
    let dynamics = Tdmc::linear(a, eps, dist)?;
    let s0 = dynamics.params.steps_for(t0)?;
    let offsets: Vec<u64> = (0..=k_max).map(|k| 1u64 << k).collect();
    let geoms: Vec<Geometry> = pq.iter().map(|(p, _)| Geometry::new(a, *p)).collect::<Result<_>>()?;
    let last = s0 + *offsets.last().unwrap();
    // values[replica][geometry][k]
    let values: Vec<Vec<Vec<f64>>> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| -> Result<Vec<Vec<f64>>> {
            let ens = initial_ensemble(0.0, Start::UniformTicket, rng.child(i))?;
            let mut snaps: Vec<Option<PointMeasure>> = vec![None; offsets.len() + 1];
            let mut failure = None;
            simulate(ens, last, &dynamics, |e| {
                let slot = if e.step == s0 { Some(0) } else { offsets.iter().position(|o| e.step == s0 + o).map(|k| k + 1) };
                if let Some(k) = slot {
                    match PointMeasure::from_ensemble(e, a) {
                        Ok(m) => snaps[k] = Some(m),
                        Err(err) => failure = Some(err),
                    }
                }
            })?;
            if let Some(err) = failure {
                return Err(err);
            }
            let base = snaps[0].as_ref().expect("snapshot at t0");
            Ok(geoms
                .iter()
                .zip(pq)
                .map(|(g, (_, q))| snaps[1..].iter().map(|m| lp_distance(base, m.as_ref().expect("snapshot"), g).powf(*q)).collect())
                .collect())
        })
        .collect::<Result<_>>()?;
    let deltas: Vec<f64> = offsets.iter().map(|o| *o as f64 * eps).collect();
    let mut out = Outcome::default();
    let mut table = Table::new(&["p", "q", "delta", "value", "stderr"]);
    for (j, &(p, q)) in pq.iter().enumerate() {
        let means: Vec<Estimate> =
            (0..deltas.len()).map(|k| Estimate::from_samples(&values.iter().map(|v| v[j][k]).collect::<Vec<_>>())).collect();
        for (d, e) in deltas.iter().zip(&means) {
            table.push(row![p, q, d, e.mean, e.stderr]);
        }
        let fit = loglog_slope(&deltas, &means.iter().map(|e| e.mean).collect::<Vec<_>>())?;
        out.metrics.push(Metric::judge(
            format!("log-log slope p={p} q={q}"),
            fit.slope,
            fit.stderr,
            Comparison::AtLeast,
            p * q / 2.0 - th.slope_slack,
        ));
    }
    out.tables.push(("kolmogorov".into(), table));
    Ok(out)
}

fn ks_metric(name: String, x: &[f64], y: &[f64], level: f64) -> Result<Metric> {
    let ks = two_sample_ks(x, y)?;
    let (n, m) = (x.len() as f64, y.len() as f64);
    // Reported with the statistic's null fluctuation scale as its error.
    let mut metric = Metric::judge(name, ks.p_value, ((n + m) / (n * m)).sqrt(), Comparison::AtLeast, level);
    metric.name = format!("{} (D = {:.4})", metric.name, ks.statistic);
    Ok(metric)
}

/// KS comparison of `N_t` between the ticketed algorithm at step `eps` and the
/// truncated fan at height `gamma`.
#[allow(clippy::too_many_arguments)]
pub fn law_compare(
    a: f64,
    t: f64,
    eps: f64,
    gamma: f64,
    n_max: u32,
    h: f64,
    samples: usize,
    th: &Thresholds,
    rng: &RngStream,
) -> Result<Outcome> {
    let dynamics = Tdmc::linear(a, eps, StepDistribution::StandardNormal)?;
    let walk: Vec<f64> = run_replicas(0.0, t, samples, &dynamics, Start::UniformTicket, &rng.child(0), |e| e.len() as f64)?;
    let fan: Vec<f64> = fan_counts(a, t, &[gamma], n_max, h, samples, &rng.child(1))?.into_iter().map(|r| r[0]).collect();
    let mut table = Table::new(&["source", "sample", "N_t"]);
    for (i, n) in walk.iter().enumerate() {
        table.push(row!["tdmc", i, n]);
    }
    for (i, n) in fan.iter().enumerate() {
        table.push(row!["fan", i, n]);
    }
    Ok(Outcome {
        metrics: vec![ks_metric("KS p-value, N_t tdmc vs fan".into(), &walk, &fan, th.ks_level)?],
        tables: vec![("law_compare".into(), table)],
    })
}

/// Lifetime clipped at the horizon and position at `probe` (0 once dead).
fn excursion_features(ex: &Excursion, horizon: f64, probe: f64) -> (f64, f64) {
    let life = ex.end.map_or(horizon, |e| e.min(horizon));
    let pos = if ex.alive_at(probe) { ex.value_at(probe).unwrap_or(0.0) } else { 0.0 };
    (life, pos)
}

fn walk_excursions(z: f64, gamma: f64, eps: f64, horizon: f64, probe: f64, samples: usize, rng: &RngStream) -> Result<Vec<(f64, f64)>> {
    (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let ex = crate::hitting::conditioned_excursion_sample(z, gamma, eps, StepDistribution::StandardNormal, horizon, &mut rng.child(i))?;
            Ok(excursion_features(&ex, horizon, probe))
        })
        .collect()
}

fn bessel_excursions(gamma: f64, h: f64, horizon: f64, probe: f64, samples: usize, rng: &RngStream) -> Result<Vec<(f64, f64)>> {
    (0..samples as u64)
        .into_par_iter()
        .map(|i| Ok(excursion_features(&sample_excursion_geq(gamma, h, horizon, &mut rng.child(i))?, horizon, probe)))
        .collect()
}

/// Conditioned walk excursions against the Bessel-3 construction of `Q_γ`.
///
/// At `eps` both the lifetime and the position at `horizon / 4` are compared
/// with `samples` draws on each side. For the trend, each step size in
/// `eps_schedule` is compared on lifetime with one shared reference sample of
/// size `trend_samples`, and the KS statistic must decrease along the schedule.
#[allow(clippy::too_many_arguments)]
pub fn excursion_compare(
    z: f64,
    gamma: f64,
    horizon: f64,
    eps: f64,
    samples: usize,
    eps_schedule: &[f64],
    trend_samples: usize,
    th: &Thresholds,
    rng: &RngStream,
) -> Result<Outcome> {
    let probe = horizon / 4.0;
    let h_ref = eps_schedule.iter().chain([&eps]).fold(gamma * gamma / 100.0, |m, e| m.min(*e));
    let walk = walk_excursions(z, gamma, eps, horizon, probe, samples, &rng.child(0))?;
    let bessel = bessel_excursions(gamma, h_ref, horizon, probe, samples, &rng.child(1))?;
    let mut table = Table::new(&["source", "eps", "lifetime", "position"]);
    for (l, x) in &walk {
        table.push(row!["walk", eps, l, x]);
    }
    for (l, x) in &bessel {
        table.push(row!["bessel", h_ref, l, x]);
    }
    let col = |v: &[(f64, f64)], k: usize| -> Vec<f64> { v.iter().map(|r| if k == 0 { r.0 } else { r.1 }).collect() };
    let mut out = Outcome::default();
    out.metrics.push(ks_metric(format!("KS p-value, lifetime, eps={eps}"), &col(&walk, 0), &col(&bessel, 0), th.ks_level)?);
    out.metrics.push(ks_metric(format!("KS p-value, position at t={probe}, eps={eps}"), &col(&walk, 1), &col(&bessel, 1), th.ks_level)?);

    let reference = col(&bessel_excursions(gamma, h_ref, horizon, probe, trend_samples, &rng.child(2))?, 0);
    let mut stats = Vec::with_capacity(eps_schedule.len());
    for (k, &e) in eps_schedule.iter().enumerate() {
        let w = col(&walk_excursions(z, gamma, e, horizon, probe, trend_samples, &rng.child(3 + k as u64))?, 0);
        let ks = two_sample_ks(&w, &reference)?;
        table.push(row!["trend", e, ks.statistic, ks.p_value]);
        stats.push((e, ks.statistic));
    }
    let scale = (2.0 / trend_samples as f64).sqrt();
    for w in stats.windows(2) {
        out.metrics.push(Metric::judge(
            format!("KS statistic change eps {} -> {} ({:.4} -> {:.4})", w[0].0, w[1].0, w[0].1, w[1].1),
            w[1].1 - w[0].1,
            scale,
            Comparison::Below,
            0.0,
        ));
    }
    out.tables.push(("excursion_compare".into(), table));
    Ok(out)
}

/// Random point in `{v > -a x}` with generation in `0..gens`.
pub fn random_point(a: f64, gens: u32, rng: &mut RngStream) -> TaggedPoint {
    let x = 2.0 * rng.unit() - 1.0;
    let v = -a * x + 2.0 * rng.open01();
    let n = (rng.unit() * gens as f64) as u32;
    TaggedPoint::new(x, v, n.min(gens - 1))
}

pub fn random_measure(len: usize, a: f64, gens: u32, rng: &mut RngStream) -> PointMeasure {
    PointMeasure::new((0..len).map(|_| random_point(a, gens, rng)).collect())
}

/// Assignment distance against factorial enumeration on random small instances,
/// and the interpolation bound `‖L_s - L_t‖ ≤ |t - s|^p ‖μ - ν‖` on further instances.
pub fn distance_checks(brute_instances: usize, contraction_instances: usize, th: &Thresholds, rng: &RngStream) -> Result<Outcome> {
    let mut table = Table::new(&["check", "instance", "n", "m", "p", "lhs", "rhs"]);
    let mut worst_gap = 0.0f64;
    let mut r = rng.child(0);
    for i in 0..brute_instances {
        let total = 1 + (r.unit() * 7.0) as usize;
        let n = (r.unit() * (total + 1) as f64) as usize;
        let (n, m) = (n.min(total), total - n.min(total));
        let a = 0.25 + 2.0 * r.unit();
        let p = [0.25, 0.5, 1.0][i % 3];
        let geom = Geometry::new(a, p)?;
        let mu = random_measure(n, a, 3, &mut r);
        let nu = random_measure(m, a, 3, &mut r);
        let fast = lp_distance(&mu, &nu, &geom);
        let slow = brute_force_distance(&mu, &nu, &geom)?;
        worst_gap = worst_gap.max((fast - slow).abs());
        table.push(row!["assignment", i, n, m, p, fast, slow]);
    }
    let mut worst_excess = f64::NEG_INFINITY;
    let mut r = rng.child(1);
    for i in 0..contraction_instances {
        let a = 0.25 + 2.0 * r.unit();
        let p = [0.25, 0.5, 1.0][i % 3];
        let geom = Geometry::new(a, p)?;
        let mu = random_measure((r.unit() * 7.0) as usize, a, 3, &mut r);
        let nu = random_measure((r.unit() * 7.0) as usize, a, 3, &mut r);
        let (u0, u1) = (r.unit(), r.unit());
        let (s, t) = (u0.min(u1), u0.max(u1));
        let lhs = lp_distance(&interpolate(&mu, &nu, s, &geom)?, &interpolate(&mu, &nu, t, &geom)?, &geom);
        let rhs = (t - s).powf(p) * lp_distance(&mu, &nu, &geom);
        worst_excess = worst_excess.max(lhs - rhs);
        table.push(row!["contraction", i, mu.len(), nu.len(), p, lhs, rhs]);
    }
    Ok(Outcome {
        metrics: vec![
            Metric::judge("max |assignment - brute force|", worst_gap, 0.0, Comparison::AtMost, th.brute_force_tol),
            Metric::judge("max interpolation excess over bound", worst_excess, 0.0, Comparison::AtMost, th.contraction_slack),
        ],
        tables: vec![("distance".into(), table)],
    })
}

/// Workload modulus statistic over independent fans; finite, with a 99th
/// percentile below `workload_spread` medians.
#[allow(clippy::too_many_arguments)]
pub fn workload_modulus(a: f64, horizon: f64, gamma: f64, n_max: u32, h: f64, stride: usize, fans: usize, th: &Thresholds, rng: &RngStream) -> Result<Outcome> {
    let params = FanParams { a, gamma, n_max, horizon, h };
    let moduli: Vec<f64> = (0..fans as u64)
        .into_par_iter()
        .map(|i| Ok(sample_fan(0.0, AncestorTag::Random, &params, &rng.child(i))?.workload(stride)?.modulus))
        .collect::<Result<_>>()?;
    let mut table = Table::new(&["fan", "modulus"]);
    for (i, m) in moduli.iter().enumerate() {
        table.push(row![i, m]);
    }
    let max = moduli.iter().copied().fold(0.0, f64::max);
    let median = quantile(&moduli, 0.5);
    let p99 = quantile(&moduli, 0.99);
    let ratio = if median > 0.0 { p99 / median } else { f64::INFINITY };
    Ok(Outcome {
        metrics: vec![
            Metric::judge("max modulus (finite)", max, 0.0, Comparison::Below, FINITE_CEILING),
            Metric::judge(format!("p99/median (median {median:.4}, p99 {p99:.4})"), ratio, 0.0, Comparison::Below, th.workload_spread),
        ],
        tables: vec![("workload".into(), table)],
    })
}

/// Rejection rate of the KS test at `level` for equal uniform samples, and the
/// p-value for a shifted alternative.
pub fn calibrate_ks(n: usize, trials: usize, th: &Thresholds, rng: &RngStream) -> Result<Outcome> {
    let level = th.ks_level;
    let pvals: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng.child(i);
            let x: Vec<f64> = (0..n).map(|_| r.unit()).collect();
            let y: Vec<f64> = (0..n).map(|_| r.unit()).collect();
            Ok(two_sample_ks(&x, &y)?.p_value)
        })
        .collect::<Result<_>>()?;
    let rate = pvals.iter().filter(|p| **p < level).count() as f64 / trials as f64;
    let se = (level * (1.0 - level) / trials as f64).sqrt();
    let mut r = rng.child(trials as u64);
    let x: Vec<f64> = (0..n).map(|_| r.unit()).collect();
    let y: Vec<f64> = (0..n).map(|_| 0.2 + r.unit()).collect();
    let power = two_sample_ks(&x, &y)?;
    let mut table = Table::new(&["trial", "p_value"]);
    for (i, p) in pvals.iter().enumerate() {
        table.push(row![i, p]);
    }
    Ok(Outcome {
        metrics: vec![
            Metric::judge(format!("null rejection rate - {level}"), rate - level, se, Comparison::AbsAtMost, th.z_max * se),
            Metric::judge("p-value, U(0,1) vs U(0.2,1.2)", power.p_value, 0.0, Comparison::Below, 1e-6),
        ],
        tables: vec![("ks_calibration".into(), table)],
    })
}
