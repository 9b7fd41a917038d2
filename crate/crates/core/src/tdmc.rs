//! Ticketed diffusion Monte Carlo.
//!
//! Each particle carries a ticket `θ ∈ (0, 1]`. After a step `x → x̃` the weight
//! `P = exp(-χ(x, x̃))` is compared with the ticket: the particle is removed when
//! `P < θ`, otherwise it continues with ticket `θ / P` and `max(⌊P + u⌋, 1) - 1`
//! copies are created at `x̃` with fresh tickets drawn from `U(1/P, 1)`.
//!
//! Equivalently a particle born at `x` with ticket `θ` carries the tag
//! `v = V(x) - ln θ` for its whole life and dies as soon as `V(y) > v`.
//! A ticket of exactly 0 marks an immortal particle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{ChainParams, Potential, StepDistribution};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::stats::Estimate;

pub const DEFAULT_POPULATION_CAP: usize = 10_000_000;

#[derive(Clone, Debug)]
pub struct Particle {
    pub x: f64,
    pub ticket: f64,
    pub generation: u32,
    pub birth_time: f64,
    /// Key of the particle's own random stream.
    pub lineage: u64,
    rng: RngStream,
}

impl Particle {
    pub fn new(x: f64, ticket: f64, rng: RngStream) -> Self {
        Self { x, ticket, generation: 0, birth_time: 0.0, lineage: rng.key(), rng }
    }

    pub fn immortal(x: f64, rng: RngStream) -> Self {
        Self::new(x, 0.0, rng)
    }

    pub fn is_immortal(&self) -> bool {
        self.ticket == 0.0
    }

    /// `v = V(x) - ln θ`; `+∞` for an immortal particle.
    pub fn tag(&self, potential: &Potential) -> f64 {
        potential.value(self.x) - self.ticket.ln()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub births: u64,
    pub deaths: u64,
    /// Σ N over completed steps.
    pub work: u64,
}

#[derive(Clone, Debug)]
pub struct Ensemble {
    pub particles: Vec<Particle>,
    pub time: f64,
    pub step: u64,
    pub stats: EnsembleStats,
}

impl Ensemble {
    pub fn new(particles: Vec<Particle>) -> Self {
        Self { particles, time: 0.0, step: 0, stats: EnsembleStats::default() }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn count_generation(&self, n: u32) -> usize {
        self.particles.iter().filter(|p| p.generation == n).count()
    }
}

/// How the single particle of each replica is started.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Start {
    /// `θ0 ~ U(0, 1)`, the unbiased initialisation.
    UniformTicket,
    Ticket(f64),
    Immortal,
}

/// Dynamics and guards shared by every step of a run.
#[derive(Clone, Debug)]
pub struct Tdmc {
    pub potential: Potential,
    pub params: ChainParams,
    pub dist: StepDistribution,
    pub population_cap: usize,
}

impl Tdmc {
    pub fn new(potential: Potential, params: ChainParams, dist: StepDistribution) -> Self {
        Self { potential, params, dist, population_cap: DEFAULT_POPULATION_CAP }
    }

    /// Linear potential `V(x) = -a x` on the plain walk with step `eps`.
    pub fn linear(a: f64, eps: f64, dist: StepDistribution) -> Result<Self> {
        Ok(Self::new(Potential::linear(a), ChainParams::new(eps)?, dist))
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.population_cap = cap;
        self
    }
}

/// Survival flag and offspring count (survivor included) for one particle.
pub fn branch_decision(p: f64, theta: f64, u: f64) -> Result<(bool, u32)> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::invalid("P", format!("weight must be positive and finite, got {p}")));
    }
    if p < theta {
        return Ok((false, 0));
    }
    let n = (p + u).floor().max(1.0);
    if n > u32::MAX as f64 {
        return Err(Error::invalid("P", format!("offspring count {n} overflows")));
    }
    Ok((true, n as u32))
}

/// Tickets for a survivor and its `n_off - 1` new offspring.
pub fn spawn_tickets(p: f64, theta: f64, n_off: u32, rng: &mut RngStream) -> Result<Vec<f64>> {
    if n_off == 0 {
        return Err(Error::invalid("n_off", "a surviving particle has at least one offspring"));
    }
    if n_off >= 2 && p <= 1.0 {
        return Err(Error::Unreachable(format!("{n_off} offspring requested with P = {p} ≤ 1")));
    }
    let mut out = Vec::with_capacity(n_off as usize);
    out.push(theta / p);
    let lo = 1.0 / p;
    for _ in 1..n_off {
        out.push(lo + (1.0 - lo) * rng.open01());
    }
    Ok(out)
}

/// Advance every particle by one step, in ascending index order.
pub fn tdmc_step(mut ens: Ensemble, dynamics: &Tdmc) -> Result<Ensemble> {
    let eps = dynamics.params.eps;
    let step = ens.step;
    let new_time = ens.time + eps;
    let mut next = Vec::with_capacity(ens.particles.len() + ens.particles.len() / 4 + 1);
    let mut births = 0u64;
    let mut deaths = 0u64;
    for mut particle in ens.particles.drain(..) {
        let y = dynamics.params.advance(particle.x, dynamics.dist, &mut particle.rng);
        let p = (-dynamics.potential.chi(particle.x, y)).exp();
        let u = particle.rng.unit();
        let (survives, n_off) = branch_decision(p, particle.ticket, u)?;
        if !survives {
            deaths += 1;
            continue;
        }
        particle.x = y;
        if n_off == 1 {
            particle.ticket /= p;
            next.push(particle);
            continue;
        }
        let tickets = spawn_tickets(p, particle.ticket, n_off, &mut particle.rng)?;
        particle.ticket = tickets[0];
        for (i, &ticket) in tickets.iter().enumerate().skip(1) {
            assert!(ticket > 0.0 && ticket <= 1.0, "offspring ticket {ticket} outside (0, 1]");
            let rng = particle.rng.descend(&[step, i as u64]);
            next.push(Particle {
                x: y,
                ticket,
                generation: particle.generation + 1,
                birth_time: new_time,
                lineage: rng.key(),
                rng,
            });
        }
        births += u64::from(n_off - 1);
        next.push(particle);
        if next.len() > dynamics.population_cap {
            return Err(Error::PopulationExplosion { population: next.len(), cap: dynamics.population_cap, time: new_time });
        }
    }
    ens.stats.work += next.len() as u64;
    ens.stats.births += births;
    ens.stats.deaths += deaths;
    ens.particles = next;
    ens.time = new_time;
    ens.step += 1;
    Ok(ens)
}

/// Run `steps` steps, calling `hook` on the initial ensemble and after every step.
pub fn simulate(mut ens: Ensemble, steps: u64, dynamics: &Tdmc, mut hook: impl FnMut(&Ensemble)) -> Result<Ensemble> {
    hook(&ens);
    for _ in 0..steps {
        if ens.is_empty() {
            // Nothing left to evolve; keep the clock consistent.
            ens.time += dynamics.params.eps;
            ens.step += 1;
        } else {
            ens = tdmc_step(ens, dynamics)?;
        }
        hook(&ens);
    }
    Ok(ens)
}

/// Single-particle initial ensemble for one replica.
pub fn initial_ensemble(x0: f64, start: Start, rng: RngStream) -> Result<Ensemble> {
    let mut rng = rng;
    let ticket = match start {
        Start::UniformTicket => rng.open01(),
        Start::Ticket(t) if t > 0.0 && t <= 1.0 => t,
        Start::Ticket(t) => return Err(Error::invalid("ticket", format!("initial ticket must lie in (0, 1], got {t}"))),
        Start::Immortal => 0.0,
    };
    Ok(Ensemble::new(vec![Particle::new(x0, ticket, rng)]))
}

/// Runs `m` independent replicas to time `t` and maps each final ensemble
/// through `observe`. Replica `i` uses `rng.child(i)`; results are in replica order.
pub fn run_replicas<T: Send>(
    x0: f64,
    t: f64,
    m: usize,
    dynamics: &Tdmc,
    start: Start,
    rng: &RngStream,
    observe: impl Fn(&Ensemble) -> T + Sync,
) -> Result<Vec<T>> {
    let steps = dynamics.params.steps_for(t)?;
    (0..m as u64)
        .into_par_iter()
        .map(|i| {
            let ens = initial_ensemble(x0, start, rng.child(i))?;
            let ens = simulate(ens, steps, dynamics, |_| {})?;
            Ok(observe(&ens))
        })
        .collect()
}

/// `f̂_t = Σ_j f(x_t^{(j)})` per replica, averaged over `m` replicas started with `θ0 ~ U(0,1)`.
pub fn run_estimator(
    f: impl Fn(f64) -> f64 + Sync,
    x0: f64,
    t: f64,
    m: usize,
    dynamics: &Tdmc,
    rng: &RngStream,
) -> Result<Estimate> {
    if m < 2 {
        return Err(Error::invalid("m", "need at least two replicas"));
    }
    let values = run_replicas(x0, t, m, dynamics, Start::UniformTicket, rng, |ens| {
        ens.particles.iter().map(|p| f(p.x)).sum::<f64>()
    })?;
    Ok(Estimate::from_samples(&values))
}

/// Like [`run_estimator`] but records the ensemble after every step of every replica.
pub fn run_estimator_traced(
    f: impl Fn(f64) -> f64 + Sync,
    x0: f64,
    t: f64,
    m: usize,
    dynamics: &Tdmc,
    rng: &RngStream,
) -> Result<(Estimate, Vec<Vec<Ensemble>>)> {
    let steps = dynamics.params.steps_for(t)?;
    let runs: Vec<(f64, Vec<Ensemble>)> = (0..m as u64)
        .into_par_iter()
        .map(|i| {
            let mut trace = Vec::with_capacity(steps as usize + 1);
            let ens = initial_ensemble(x0, Start::UniformTicket, rng.child(i))?;
            let ens = simulate(ens, steps, dynamics, |e| trace.push(e.clone()))?;
            Ok((ens.particles.iter().map(|p| f(p.x)).sum::<f64>(), trace))
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = runs.iter().map(|r| r.0).collect();
    Ok((Estimate::from_samples(&values), runs.into_iter().map(|r| r.1).collect()))
}

/// Rate of first-generation offspring that climb `γ` above their own barrier.
///
/// One immortal ancestor walks over `[0, T]` under `V(x) = -a x`. Every offspring
/// it creates is followed as a single walk (its own descendants are irrelevant)
/// until it falls below its barrier `x + ln θ / a` or climbs `γ` above it;
/// offspring born before `T` are followed to absorption regardless of the horizon.
/// Returns the per-replica count divided by `T`.
pub fn offspring_rate_experiment(
    a: f64,
    gamma: f64,
    t_end: f64,
    eps: f64,
    dist: StepDistribution,
    replicas: usize,
    rng: &RngStream,
) -> Result<Estimate> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::invalid("gamma", format!("height must lie in (0, 1], got {gamma}")));
    }
    if !(eps > 0.0 && eps <= gamma * gamma / 10.0) {
        return Err(Error::invalid("eps", format!("need 0 < eps ≤ γ²/10 = {}", gamma * gamma / 10.0)));
    }
    if a < 0.0 {
        return Err(Error::invalid("a", "slope must be non-negative"));
    }
    if replicas < 2 {
        return Err(Error::invalid("replicas", "need at least two replicas"));
    }
    if a == 0.0 {
        return Ok(Estimate::exact(0.0));
    }
    let params = ChainParams::new(eps)?;
    let steps = params.steps_for(t_end)?;
    let se = eps.sqrt();
    // A follower that never resolves would indicate a broken walk; the budget is generous.
    let follow_cap = (1e4 * gamma * gamma / eps).ceil() as u64 + 1_000_000;
    let counts: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut r = rng.child(i);
            let mut x = 0.0f64;
            let mut hits = 0u64;
            for k in 0..steps {
                let y = x + se * dist.sample(&mut r);
                let p = (a * (y - x)).exp();
                let u = r.unit();
                let (_, n_off) = branch_decision(p, 0.0, u)?;
                if n_off >= 2 {
                    let tickets = spawn_tickets(p, 0.0, n_off, &mut r)?;
                    for (j, &theta) in tickets.iter().enumerate().skip(1) {
                        let barrier = y + theta.ln() / a;
                        let mut child = r.descend(&[k, j as u64]);
                        if climbs(y, barrier, gamma, se, dist, &mut child, follow_cap)? {
                            hits += 1;
                        }
                    }
                }
                x = y;
            }
            Ok(hits as f64 / t_end)
        })
        .collect::<Result<_>>()?;
    Ok(Estimate::from_samples(&counts))
}

fn climbs(mut y: f64, barrier: f64, gamma: f64, se: f64, dist: StepDistribution, rng: &mut RngStream, cap: u64) -> Result<bool> {
    let target = barrier + gamma;
    for _ in 0..cap {
        if y >= target {
            return Ok(true);
        }
        y += se * dist.sample(rng);
        if y < barrier {
            return Ok(false);
        }
    }
    Err(Error::StepCapExhausted { cap })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_examples() {
        assert_eq!(branch_decision(0.5, 0.7, 0.9).unwrap(), (false, 0));
        assert_eq!(branch_decision(1f64.exp(), 0.3, 0.5).unwrap(), (true, 3));
        assert_eq!(branch_decision(0.8, 0.8, 0.0).unwrap(), (true, 1));
        assert_eq!(branch_decision(0.2, 0.0, 0.99).unwrap(), (true, 1));
        assert!(branch_decision(0.0, 0.5, 0.5).is_err());
        assert!(branch_decision(-1.0, 0.5, 0.5).is_err());
        assert!(branch_decision(f64::NAN, 0.5, 0.5).is_err());
    }

    #[test]
    fn spawn_examples() {
        let mut rng = RngStream::new(1);
        assert_eq!(spawn_tickets(1.3, 0.6, 1, &mut rng).unwrap(), vec![0.6 / 1.3]);
        let t = spawn_tickets(2.0, 0.5, 4, &mut rng).unwrap();
        assert_eq!(t[0], 0.25);
        assert!(t[1..].iter().all(|x| *x > 0.5 && *x < 1.0));
        assert!(spawn_tickets(2.0, 0.5, 0, &mut rng).is_err());
        assert!(matches!(spawn_tickets(0.9, 0.5, 2, &mut rng), Err(Error::Unreachable(_))));
    }

    #[test]
    fn mean_offspring_ticket() {
        let mut rng = RngStream::new(2);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| spawn_tickets(2.0, 0.5, 3, &mut rng).unwrap()[1]).collect();
        let e = Estimate::from_samples(&xs);
        assert!(e.z_exact(0.75).abs() < 3.0, "{e:?}");
    }

    #[test]
    fn expected_offspring_is_p() {
        let mut rng = RngStream::new(3);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                let theta = rng.open01();
                let u = rng.unit();
                branch_decision(0.5, theta, u).unwrap().1 as f64
            })
            .collect();
        let e = Estimate::from_samples(&xs);
        assert!(e.z_exact(0.5).abs() < 3.0, "{e:?}");
    }

    #[test]
    fn zero_potential_keeps_population() {
        let d = Tdmc::linear(0.0, 0.01, StepDistribution::StandardNormal).unwrap();
        let ens = initial_ensemble(0.0, Start::UniformTicket, RngStream::new(4)).unwrap();
        let ens = simulate(ens, 100, &d, |e| assert_eq!(e.len(), 1)).unwrap();
        assert!((ens.time - 1.0).abs() < 1e-12);
        assert_eq!(ens.stats.births + ens.stats.deaths, 0);
    }

    #[test]
    fn unit_ticket_dies_on_down_step() {
        let d = Tdmc::linear(1.0, 0.01, StepDistribution::StandardNormal).unwrap();
        for seed in 0..200 {
            let ens = initial_ensemble(0.0, Start::Ticket(1.0), RngStream::new(seed)).unwrap();
            let mut probe = ens.particles[0].rng.clone();
            let up = 0.1 * StepDistribution::StandardNormal.sample(&mut probe) >= 0.0;
            let next = tdmc_step(ens, &d).unwrap();
            assert_eq!(next.is_empty(), !up);
        }
    }

    #[test]
    fn tag_is_constant_over_life() {
        let a = 1.0;
        let d = Tdmc::linear(a, 0.01, StepDistribution::StandardNormal).unwrap();
        let ens = initial_ensemble(0.0, Start::UniformTicket, RngStream::new(8)).unwrap();
        let mut tags = std::collections::HashMap::new();
        simulate(ens, 200, &d, |e| {
            for p in &e.particles {
                assert!(p.ticket > 0.0 && p.ticket <= 1.0);
                let v = p.tag(&d.potential);
                let prev = *tags.entry(p.lineage).or_insert(v);
                assert!((prev - v).abs() < 1e-9 * (1.0 + v.abs()), "tag drift {prev} -> {v}");
                // Alive means above the barrier -v/a.
                assert!(p.x >= -v / a - 1e-12);
            }
        })
        .unwrap();
    }

    #[test]
    fn trivial_estimator_cases() {
        let rng = RngStream::new(9);
        let d = Tdmc::linear(1.0, 0.01, StepDistribution::StandardNormal).unwrap();
        let e = run_estimator(|_| 0.0, 0.0, 0.5, 100, &d, &rng).unwrap();
        assert_eq!((e.mean, e.stderr), (0.0, 0.0));
        let flat = Tdmc::linear(0.0, 0.01, StepDistribution::StandardNormal).unwrap();
        let e = run_estimator(|_| 1.0, 0.0, 0.5, 100, &flat, &rng).unwrap();
        assert_eq!((e.mean, e.stderr), (1.0, 0.0));
    }

    #[test]
    fn explosion_guard_fires() {
        let d = Tdmc::linear(30.0, 0.01, StepDistribution::StandardNormal).unwrap().with_cap(50);
        let ens = initial_ensemble(0.0, Start::Immortal, RngStream::new(10)).unwrap();
        let r = simulate(ens, 1000, &d, |_| {});
        assert!(matches!(r, Err(Error::PopulationExplosion { cap: 50, .. })));
    }

    #[test]
    fn order_independent_streams() {
        let d = Tdmc::linear(1.0, 0.01, StepDistribution::Rademacher).unwrap();
        let rng = RngStream::new(11);
        let a = run_replicas(0.0, 0.5, 64, &d, Start::UniformTicket, &rng, |e| e.len()).unwrap();
        let b: Vec<usize> = (0..64u64)
            .rev()
            .map(|i| {
                let ens = initial_ensemble(0.0, Start::UniformTicket, rng.child(i)).unwrap();
                simulate(ens, 50, &d, |_| {}).unwrap().len()
            })
            .collect();
        assert_eq!(a, b.into_iter().rev().collect::<Vec<_>>());
    }

    #[test]
    fn rate_trivial_and_rejections() {
        let rng = RngStream::new(12);
        let dist = StepDistribution::StandardNormal;
        assert_eq!(offspring_rate_experiment(0.0, 0.5, 1.0, 1e-3, dist, 10, &rng).unwrap().mean, 0.0);
        assert!(offspring_rate_experiment(1.0, 0.5, 1.0, 0.05, dist, 10, &rng).is_err());
        assert!(offspring_rate_experiment(1.0, 1.5, 1.0, 1e-3, dist, 10, &rng).is_err());
    }
}
