//! First-passage statistics of the unit-step walk (`ε = 1`).
//!
//! `P_{s,γ}` is the probability that the walk started at 0 reaches `[γ, ∞)`
//! before `(-∞, -s]`; the starting point itself is never absorbed. `G(s)` is the
//! limit of `γ P_{s,γ}`, estimated here as `(γ + s) P̂_{s,γ}` at the largest
//! `γ` of a schedule, which removes the leading finite-γ bias.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::StepDistribution;
use crate::error::{Error, Result};
use crate::fan::Excursion;
use crate::rng::RngStream;
use crate::stats::Estimate;

pub const DEFAULT_STEP_CAP: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HittingQuery {
    pub s: f64,
    pub gamma: f64,
    pub dist: StepDistribution,
}

impl HittingQuery {
    pub fn new(s: f64, gamma: f64, dist: StepDistribution) -> Result<Self> {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::invalid("s", format!("barrier depth must be finite and ≥ 0, got {s}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid("gamma", format!("target must be finite and > 0, got {gamma}")));
        }
        Ok(Self { s, gamma, dist })
    }
}

/// Runs one walk until it reaches `[γ, ∞)` or `(-∞, -s_max]`.
/// Returns the number of steps and, on success, the minimum over the visited
/// points after the start (`+∞` if the first step already succeeds).
fn passage(gamma: f64, s_max: f64, dist: StepDistribution, rng: &mut RngStream, cap: u64) -> Result<(u64, Option<f64>)> {
    let mut y = 0.0;
    let mut min = f64::INFINITY;
    for k in 1..=cap {
        y += dist.sample(rng);
        if y >= gamma {
            return Ok((k, Some(min)));
        }
        if y <= -s_max {
            return Ok((k, None));
        }
        min = min.min(y);
    }
    Err(Error::StepCapExhausted { cap })
}

/// Passage minima for `samples` walks, sample `i` on `rng.child(i)`.
/// The total number of steps across all walks is bounded by `cap`.
pub fn passage_minima(gamma: f64, s_max: f64, dist: StepDistribution, samples: usize, cap: u64, rng: &RngStream) -> Result<Vec<Option<f64>>> {
    let runs: Vec<(u64, Option<f64>)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| passage(gamma, s_max, dist, &mut rng.child(i), cap))
        .collect::<Result<_>>()?;
    let total: u64 = runs.iter().map(|r| r.0).sum();
    if total > cap {
        return Err(Error::StepCapExhausted { cap });
    }
    Ok(runs.into_iter().map(|r| r.1).collect())
}

/// Highest point reached before the walk enters `(-∞, -s]`, stopping early once
/// `gamma_max` is reached. One batch serves every `γ ≤ gamma_max` at depth `s`:
/// `P_{s,γ}` is the fraction of maxima `≥ γ`.
pub fn passage_maxima(s: f64, gamma_max: f64, dist: StepDistribution, samples: usize, cap: u64, rng: &RngStream) -> Result<Vec<f64>> {
    HittingQuery::new(s, gamma_max, dist)?;
    let runs: Vec<(u64, f64)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng.child(i);
            let mut y = 0.0f64;
            let mut max = f64::NEG_INFINITY;
            for k in 1..=cap {
                y += dist.sample(&mut r);
                if y <= -s {
                    return Ok((k, max));
                }
                max = max.max(y);
                if y >= gamma_max {
                    return Ok((k, max));
                }
            }
            Err(Error::StepCapExhausted { cap })
        })
        .collect::<Result<_>>()?;
    let total: u64 = runs.iter().map(|r| r.0).sum();
    if total > cap {
        return Err(Error::StepCapExhausted { cap });
    }
    Ok(runs.into_iter().map(|r| r.1).collect())
}

/// Survives barrier depth `s` given the passage minimum.
#[inline]
fn survives(min: Option<f64>, s: f64) -> bool {
    matches!(min, Some(m) if m > -s)
}

pub fn hit_prob_mc(q: &HittingQuery, samples: usize, rng: &RngStream) -> Result<Estimate> {
    hit_prob_mc_capped(q, samples, DEFAULT_STEP_CAP, rng)
}

pub fn hit_prob_mc_capped(q: &HittingQuery, samples: usize, cap: u64, rng: &RngStream) -> Result<Estimate> {
    if samples < 100 {
        return Err(Error::invalid("samples", "need at least 100 samples"));
    }
    let minima = passage_minima(q.gamma, q.s, q.dist, samples, cap, rng)?;
    Ok(bernoulli(minima.iter().filter(|m| survives(**m, q.s)).count(), samples))
}

fn bernoulli(hits: usize, n: usize) -> Estimate {
    let p = hits as f64 / n as f64;
    Estimate::new(p, (p * (1.0 - p) / (n - 1) as f64).sqrt())
}

/// Exact `P_{s,γ}` for the ±1 walk by solving the absorbing chain.
pub fn hit_prob_exact_rademacher(s: f64, gamma: f64) -> Result<f64> {
    if !(gamma >= 1.0 && gamma.fract() == 0.0 && gamma < 1e8) {
        return Err(Error::invalid("gamma", format!("lattice target must be a positive integer, got {gamma}")));
    }
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::invalid("s", format!("barrier depth must be finite and ≥ 0, got {s}")));
    }
    let top = gamma as i64;
    let low = -(s.ceil() as i64);
    // Interior states low+1 ..= top-1 with h(k) = (h(k-1) + h(k+1)) / 2.
    let n = (top - low - 1).max(0) as usize;
    let h = solve_harmonic(n);
    let value = |k: i64| -> f64 {
        if k >= top {
            1.0
        } else if k <= low {
            0.0
        } else {
            h[(k - low - 1) as usize]
        }
    };
    // The start is not absorbed, so condition on the first step.
    Ok(0.5 * value(1) + 0.5 * value(-1))
}

/// Thomas algorithm for `-h[i-1]/2 + h[i] - h[i+1]/2 = 0`, `h[-1] = 0`, `h[n] = 1`.
fn solve_harmonic(n: usize) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let (a, b, up) = (-0.5, 1.0, -0.5);
    let rhs = |i: usize| if i + 1 == n { 0.5 } else { 0.0 };
    c[0] = up / b;
    d[0] = rhs(0) / b;
    for i in 1..n {
        let m = b - a * c[i - 1];
        c[i] = up / m;
        d[i] = (rhs(i) - a * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Closed form of the lattice answer, used only as a cross-check of the solve.
pub fn rademacher_closed_form(s: f64, gamma: f64) -> f64 {
    if s == 0.0 {
        0.5 / gamma
    } else {
        let c = s.ceil();
        c / (c + gamma)
    }
}

/// `G(s)` for the ±1 walk: `(γ + ⌈s⌉) P_{s,γ}` from the linear solve, which is
/// independent of `γ`.
pub fn g_rademacher_exact(s: f64) -> Result<f64> {
    let gamma = 64.0;
    let shift = if s == 0.0 { 0.0 } else { s.ceil() };
    Ok((gamma + shift) * hit_prob_exact_rademacher(s, gamma)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GDiagnostics {
    pub gammas: Vec<f64>,
    /// `(γ + s) P̂_{s,γ}` along the schedule.
    pub sequence: Vec<Estimate>,
    /// Successive differences of `sequence`.
    pub differences: Vec<f64>,
}

/// `Ĝ(s) = (γ_max + s) P̂_{s,γ_max}` together with the whole schedule.
pub fn estimate_g(s: f64, dist: StepDistribution, schedule: &[f64], samples: usize, cap: u64, rng: &RngStream) -> Result<(Estimate, GDiagnostics)> {
    if schedule.len() < 3 {
        return Err(Error::invalid("schedule", "need at least three γ values"));
    }
    if schedule.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("schedule", "γ values must increase"));
    }
    let mut sequence = Vec::with_capacity(schedule.len());
    for (k, &g) in schedule.iter().enumerate() {
        let q = HittingQuery::new(s, g, dist)?;
        sequence.push(hit_prob_mc_capped(&q, samples, cap, &rng.child(k as u64))?.scale(g + s));
    }
    let differences = sequence.windows(2).map(|w| w[1].mean - w[0].mean).collect();
    let g = *sequence.last().unwrap();
    Ok((g, GDiagnostics { gammas: schedule.to_vec(), sequence, differences }))
}

/// `Ĝ` tabulated on a grid of `s`, all points estimated from one coupled batch of walks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GGrid {
    pub s: Vec<f64>,
    pub g: Vec<Estimate>,
    /// `G(s) - s` for `s` past the grid.
    pub tail_bias: f64,
}

impl GGrid {
    /// Grid `0, ds, 2 ds, ..., s_max` estimated at height `gamma`.
    pub fn build(dist: StepDistribution, gamma: f64, s_max: f64, ds: f64, samples: usize, cap: u64, rng: &RngStream) -> Result<Self> {
        if !(ds > 0.0 && s_max > ds) {
            return Err(Error::invalid("ds", "grid step must be positive and smaller than s_max"));
        }
        let n = (s_max / ds).round() as usize;
        let s: Vec<f64> = (0..=n).map(|i| i as f64 * ds).collect();
        Self::from_points(dist, gamma, s, samples, cap, rng)
    }

    pub fn from_points(dist: StepDistribution, gamma: f64, s: Vec<f64>, samples: usize, cap: u64, rng: &RngStream) -> Result<Self> {
        if s.is_empty() || s.windows(2).any(|w| !(w[1] > w[0])) || s[0] < 0.0 {
            return Err(Error::invalid("s", "grid must be non-empty, non-negative and increasing"));
        }
        if samples < 100 {
            return Err(Error::invalid("samples", "need at least 100 samples"));
        }
        let s_max = *s.last().unwrap();
        let minima = passage_minima(gamma, s_max, dist, samples, cap, rng)?;
        let g = g_profile(gamma, &s, &minima);
        let mut grid = Self { s, g, tail_bias: 0.0 };
        grid.tail_bias = grid.fit_tail_bias();
        Ok(grid)
    }

    fn fit_tail_bias(&self) -> f64 {
        let s_max = *self.s.last().unwrap();
        let ys: Vec<f64> = self.s.iter().zip(&self.g).filter(|(s, _)| **s >= 0.5 * s_max).map(|(s, g)| g.mean - s).collect();
        // G(s) - s is asymptotically constant, so fit an intercept only.
        if ys.is_empty() {
            self.g.last().map(|g| g.mean - s_max).unwrap_or(0.0)
        } else {
            ys.iter().sum::<f64>() / ys.len() as f64
        }
    }

    /// Linear interpolation; `0` for `s < 0` and `s + bias` past the grid.
    pub fn eval(&self, s: f64) -> f64 {
        if s < 0.0 {
            return 0.0;
        }
        let last = self.s.len() - 1;
        if s >= self.s[last] {
            return if s == self.s[last] { self.g[last].mean } else { s + self.tail_bias };
        }
        let i = self.s.partition_point(|x| *x <= s);
        if i == 0 {
            return self.g[0].mean;
        }
        let (x0, x1) = (self.s[i - 1], self.s[i]);
        let w = (s - x0) / (x1 - x0);
        (1.0 - w) * self.g[i - 1].mean + w * self.g[i].mean
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["s", "G", "stderr"])?;
        for (s, g) in self.s.iter().zip(&self.g) {
            w.write_record([s.to_string(), g.mean.to_string(), g.stderr.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut s = Vec::new();
        let mut g = Vec::new();
        for row in r.deserialize() {
            let (si, gi, se): (f64, f64, f64) = row?;
            s.push(si);
            g.push(Estimate::new(gi, se));
        }
        if s.is_empty() {
            return Err(Error::invalid("path", "empty G grid"));
        }
        let mut grid = Self { s, g, tail_bias: 0.0 };
        grid.tail_bias = grid.fit_tail_bias();
        Ok(grid)
    }
}

/// Source of `G` values for the identity checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum GMethod {
    MonteCarlo { gamma: f64, samples: usize },
    /// Linear solve of the ±1 chain; Rademacher only.
    LatticeExact,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenewalCheck {
    pub lhs: f64,
    pub rhs: Estimate,
    pub residual: f64,
}

/// Compares `G(s)` with `E[G(s + ξ); ξ > -s]`.
pub fn check_renewal(s: f64, dist: StepDistribution, method: GMethod, draws: usize, rng: &RngStream) -> Result<RenewalCheck> {
    if !(s >= 0.0) {
        return Err(Error::invalid("s", "barrier depth must be ≥ 0"));
    }
    if draws < 2 {
        return Err(Error::invalid("draws", "need at least two draws"));
    }
    let g: Box<dyn Fn(f64) -> f64 + Sync> = match method {
        GMethod::LatticeExact => {
            if dist != StepDistribution::Rademacher {
                return Err(Error::invalid("method", "lattice oracle needs the rademacher law"));
            }
            Box::new(|x: f64| if x <= 0.0 { 0.0 } else { x.ceil() })
        }
        GMethod::MonteCarlo { gamma, samples } => {
            let s_max = (s + 6.0).max(8.0);
            let grid = GGrid::build(dist, gamma, s_max, 0.1, samples, u64::MAX, &rng.child(0))?;
            Box::new(move |x: f64| grid.eval(x))
        }
    };
    let lhs = g(s);
    let mut r = rng.child(1);
    let vals: Vec<f64> = (0..draws)
        .map(|_| {
            let xi = dist.sample(&mut r);
            if xi > -s {
                g(s + xi)
            } else {
                0.0
            }
        })
        .collect();
    let rhs = Estimate::from_samples(&vals);
    Ok(RenewalCheck { lhs, rhs, residual: (lhs - rhs.mean).abs() })
}

/// `∫_0^∞ ν([s, ∞)) G(s) ds` by the composite midpoint rule on the cells of `edges`.
///
/// With Monte Carlo `G` every walk contributes one exact quadrature of its own
/// indicator function, so the standard error accounts for the coupling across `s`.
pub fn check_half_identity(dist: StepDistribution, edges: &[f64], method: GMethod, cap: u64, rng: &RngStream) -> Result<Estimate> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) || edges[0] < 0.0 {
        return Err(Error::invalid("edges", "need an increasing, non-negative grid with at least one cell"));
    }
    let cells: Vec<(f64, f64)> = edges.windows(2).map(|w| (0.5 * (w[0] + w[1]), w[1] - w[0])).collect();
    match method {
        GMethod::LatticeExact => {
            if dist != StepDistribution::Rademacher {
                return Err(Error::invalid("method", "lattice oracle needs the rademacher law"));
            }
            let mut total = 0.0;
            for (m, w) in &cells {
                total += w * dist.tail(*m) * g_rademacher_exact(*m)?;
            }
            Ok(Estimate::exact(total))
        }
        GMethod::MonteCarlo { gamma, samples } => {
            let s_max = cells.last().unwrap().0;
            let minima = passage_minima(gamma, s_max, dist, samples, cap, rng)?;
            Ok(half_identity_from_minima(dist, edges, gamma, &minima))
        }
    }
}

/// Midpoint-rule half-identity integral from an existing batch of passage minima
/// at height `gamma`; the batch must cover depths up to the last cell midpoint.
pub fn half_identity_from_minima(dist: StepDistribution, edges: &[f64], gamma: f64, minima: &[Option<f64>]) -> Estimate {
    let weights: Vec<(f64, f64)> = edges
        .windows(2)
        .map(|w| {
            let m = 0.5 * (w[0] + w[1]);
            (m, (w[1] - w[0]) * dist.tail(m) * (gamma + m))
        })
        .collect();
    let per_walk: Vec<f64> = minima
        .iter()
        .map(|min| weights.iter().filter(|(m, _)| survives(*min, *m)).map(|(_, w)| w).sum())
        .collect();
    Estimate::from_samples(&per_walk)
}

/// `Ĝ(s_j) = (γ + s_j) P̂_{s_j,γ}` from an existing batch of passage minima.
pub fn g_profile(gamma: f64, s: &[f64], minima: &[Option<f64>]) -> Vec<Estimate> {
    s.iter().map(|&si| bernoulli(minima.iter().filter(|m| survives(**m, si)).count(), minima.len()).scale(gamma + si)).collect()
}

/// Walk path from `z√ε` conditioned by rejection to reach `γ` before `(-∞, 0]`,
/// then continued until it enters `(-∞, 0]` or time `horizon` elapses.
/// The final point is clamped to the killing level 0.
pub fn conditioned_excursion_sample(z: f64, gamma: f64, eps: f64, dist: StepDistribution, horizon: f64, rng: &mut RngStream) -> Result<Excursion> {
    if !(z > 0.0 && gamma > 0.0 && eps > 0.0 && horizon > 0.0) {
        return Err(Error::invalid("z", "z, γ, ε and the horizon must be positive"));
    }
    let se = eps.sqrt();
    let y0 = z * se;
    let max_steps = (horizon / eps).round() as usize;
    let attempts = (1e3 / se).ceil() as u64;
    let mut values = Vec::new();
    for _ in 0..attempts {
        values.clear();
        values.push(y0);
        let mut y = y0;
        let mut reached = y >= gamma;
        while !reached {
            y += se * dist.sample(rng);
            if y <= 0.0 {
                break;
            }
            values.push(y);
            reached = y >= gamma;
        }
        if !reached {
            continue;
        }
        let mut end = None;
        while values.len() <= max_steps {
            y += se * dist.sample(rng);
            if y <= 0.0 {
                values.push(0.0);
                end = Some((values.len() - 1) as f64 * eps);
                break;
            }
            values.push(y);
        }
        return Ok(Excursion::new(0.0, end, eps, std::mem::take(&mut values), y0, 0.0, 0));
    }
    Err(Error::RetryCapExhausted { attempts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_examples() {
        assert!((hit_prob_exact_rademacher(1.0, 5.0).unwrap() - 1.0 / 6.0).abs() < 1e-14);
        assert!((hit_prob_exact_rademacher(0.5, 5.0).unwrap() - 1.0 / 6.0).abs() < 1e-14);
        assert!((hit_prob_exact_rademacher(2.5, 7.0).unwrap() - 0.3).abs() < 1e-14);
        assert!((hit_prob_exact_rademacher(0.0, 4.0).unwrap() - 0.125).abs() < 1e-14);
        assert_eq!(hit_prob_exact_rademacher(0.0, 1.0).unwrap(), 0.5);
        assert!(hit_prob_exact_rademacher(1.0, 2.5).is_err());
        assert!(hit_prob_exact_rademacher(1.0, 0.0).is_err());
    }

    #[test]
    fn solve_matches_closed_form() {
        for g in 1..40 {
            for s in [0.0, 0.2, 1.0, 1.7, 3.0, 9.5] {
                let a = hit_prob_exact_rademacher(s, g as f64).unwrap();
                assert!((a - rademacher_closed_form(s, g as f64)).abs() < 1e-12, "s={s} γ={g}");
            }
        }
    }

    #[test]
    fn exact_g_is_ceiling() {
        assert!((g_rademacher_exact(0.0).unwrap() - 0.5).abs() < 1e-12);
        for s in [0.1, 1.0, 1.5, 2.5, 4.0] {
            assert!((g_rademacher_exact(s).unwrap() - s.ceil()).abs() < 1e-12);
        }
    }

    #[test]
    fn mc_rademacher_one_sixth() {
        let q = HittingQuery::new(1.0, 5.0, StepDistribution::Rademacher).unwrap();
        let e = hit_prob_mc(&q, 100_000, &RngStream::new(1)).unwrap();
        assert!(e.z_exact(1.0 / 6.0).abs() < 3.0, "{e:?}");
    }

    #[test]
    fn far_target_is_rare() {
        let q = HittingQuery::new(1.0, 1e4, StepDistribution::StandardNormal).unwrap();
        let e = hit_prob_mc_capped(&q, 10_000, 1_000_000_000, &RngStream::new(2)).unwrap();
        assert!(e.mean < 0.01);
    }

    #[test]
    fn step_cap_is_reported() {
        let q = HittingQuery::new(100.0, 100.0, StepDistribution::StandardNormal).unwrap();
        let r = hit_prob_mc_capped(&q, 100, 1000, &RngStream::new(3));
        assert!(matches!(r, Err(Error::StepCapExhausted { cap: 1000 })));
    }

    #[test]
    fn schedule_validation() {
        let rng = RngStream::new(4);
        let d = StepDistribution::Rademacher;
        assert!(estimate_g(1.0, d, &[8.0, 16.0], 100, DEFAULT_STEP_CAP, &rng).is_err());
        assert!(estimate_g(1.0, d, &[8.0, 4.0, 16.0], 100, DEFAULT_STEP_CAP, &rng).is_err());
    }

    #[test]
    fn rademacher_g_estimate() {
        let (g, diag) = estimate_g(2.5, StepDistribution::Rademacher, &[8.0, 16.0, 32.0], 100_000, u64::MAX, &RngStream::new(5)).unwrap();
        assert!((g.mean - 3.0).abs() < 0.1, "{g:?}");
        assert_eq!(diag.differences.len(), 2);
    }

    #[test]
    fn grid_interpolation_and_csv() {
        let grid = GGrid::build(StepDistribution::StandardNormal, 16.0, 4.0, 0.5, 2000, u64::MAX, &RngStream::new(6)).unwrap();
        assert_eq!(grid.s.len(), 9);
        assert_eq!(grid.eval(-1.0), 0.0);
        let mid = grid.eval(0.75);
        assert!((mid - 0.5 * (grid.g[1].mean + grid.g[2].mean)).abs() < 1e-12);
        assert!((grid.eval(10.0) - 10.0 - grid.tail_bias).abs() < 1e-12);
        // Coupled walks make the grid monotone.
        let p: Vec<f64> = grid.s.iter().zip(&grid.g).map(|(s, g)| g.mean / (16.0 + s)).collect();
        assert!(p.windows(2).all(|w| w[1] >= w[0]));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        grid.write_csv(&path).unwrap();
        let back = GGrid::read_csv(&path).unwrap();
        assert_eq!(back.s, grid.s);
        for (a, b) in back.g.iter().zip(&grid.g) {
            assert_eq!(a.mean, b.mean);
        }
    }

    #[test]
    fn rademacher_renewal_exact() {
        let rng = RngStream::new(7);
        for s in [0.5, 1.5] {
            let c = check_renewal(s, StepDistribution::Rademacher, GMethod::LatticeExact, 100_000, &rng).unwrap();
            assert!(c.residual < 3.0 * c.rhs.stderr + 1e-12, "{s}: {c:?}");
        }
    }

    #[test]
    fn rademacher_half_identity_exact() {
        let edges: Vec<f64> = (0..=300).map(|i| i as f64 * 0.01).collect();
        let v = check_half_identity(StepDistribution::Rademacher, &edges, GMethod::LatticeExact, 0, &RngStream::new(0)).unwrap();
        assert!((v.mean - 0.5).abs() < 1e-6, "{v:?}");
    }

    #[test]
    fn maxima_agree_with_minima() {
        let rng = RngStream::new(9);
        let d = StepDistribution::Rademacher;
        let maxima = passage_maxima(1.0, 5.0, d, 20_000, u64::MAX, &rng).unwrap();
        let hits = maxima.iter().filter(|m| **m >= 5.0).count() as f64 / 20_000.0;
        let e = Estimate::new(hits, (hits * (1.0 - hits) / 20_000.0).sqrt());
        assert!(e.z_exact(1.0 / 6.0).abs() < 3.0, "{e:?}");
        // Lower targets are reached at least as often.
        let low = maxima.iter().filter(|m| **m >= 2.0).count() as f64 / 20_000.0;
        assert!(low >= hits);
        assert!((low - 1.0 / 3.0).abs() < 0.02);
    }

    #[test]
    fn conditioned_sample_reaches_target() {
        let mut rng = RngStream::new(8);
        for _ in 0..50 {
            let ex = conditioned_excursion_sample(1.0, 0.3, 1e-3, StepDistribution::StandardNormal, 1.0, &mut rng).unwrap();
            assert!(ex.height() >= 0.3);
            assert_eq!(ex.values[0], 1e-3f64.sqrt());
            assert!(ex.values[1..ex.values.len() - 1].iter().all(|v| *v > 0.0));
            if ex.end.is_some() {
                assert_eq!(*ex.values.last().unwrap(), 0.0);
            }
        }
    }
}
