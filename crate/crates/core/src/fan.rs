//! Height/depth truncated Brownian fan.
//!
//! Excursions live on a global time grid of spacing `h`. Each excursion is a
//! path above its own barrier; the ancestor starts at `x` with barrier `-v/a`,
//! and every later excursion is born at a point `(τ, w_τ)` of its parent with
//! barrier `w_τ`. Children are laid down along each parent's lifetime at rate
//! `a / (2γ)` and follow the law `Q_γ` of an excursion conditioned to reach `γ`.

use std::path::Path;

use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{PointMeasure, TaggedPoint};
use crate::rng::RngStream;

pub const DEFAULT_SAMPLE_LIMIT: usize = 100_000_000;

/// One branch of the fan, sampled at times `s, s + h, s + 2h, ...`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Excursion {
    pub s: f64,
    /// Death time; `None` when the excursion is still alive at the end of its stored path.
    #[serde(rename = "e")]
    pub end: Option<f64>,
    pub h: f64,
    pub generation: u32,
    pub values: Vec<f64>,
    pub birth_level: f64,
    pub barrier: f64,
    /// Maximum of the underlying continuous path; at least the largest stored value.
    pub peak: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<usize>,
}

impl Excursion {
    pub fn new(s: f64, end: Option<f64>, h: f64, values: Vec<f64>, birth_level: f64, barrier: f64, generation: u32) -> Self {
        let peak = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { s, end, h, generation, values, birth_level, barrier, peak, parent: None }
    }

    /// Time of the last stored sample.
    pub fn last_time(&self) -> f64 {
        self.s + (self.values.len() - 1) as f64 * self.h
    }

    /// End of the lifetime, with a still-alive excursion cut at its last sample.
    pub fn end_or_last(&self) -> f64 {
        self.end.unwrap_or_else(|| self.last_time())
    }

    pub fn lifetime(&self) -> f64 {
        self.end_or_last() - self.s
    }

    /// Maximal height of the path above the barrier.
    pub fn height(&self) -> f64 {
        self.peak - self.barrier
    }

    /// `s < t < e`; an excursion without end is alive up to its last sample.
    pub fn alive_at(&self, t: f64) -> bool {
        t > self.s && if self.end.is_some() { t < self.end_or_last() } else { t <= self.last_time() }
    }

    /// Linear interpolation between grid samples; `None` outside the stored range.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let u = (t - self.s) / self.h;
        if u < -1e-9 || u > (self.values.len() - 1) as f64 + 1e-9 {
            return None;
        }
        let u = u.clamp(0.0, (self.values.len() - 1) as f64);
        let i = u.floor() as usize;
        if i + 1 >= self.values.len() {
            return self.values.last().copied();
        }
        let w = u - i as f64;
        Some((1.0 - w) * self.values[i] + w * self.values[i + 1])
    }

    /// Moves the origin of a relative excursion to `(tau, level)`.
    fn shifted(mut self, tau: f64, level: f64, generation: u32, parent: usize) -> Self {
        for v in &mut self.values {
            *v += level;
        }
        self.s += tau;
        self.end = self.end.map(|e| e + tau);
        self.birth_level += level;
        self.barrier += level;
        self.peak += level;
        self.generation = generation;
        self.parent = Some(parent);
        self
    }
}

#[inline]
fn normal(rng: &mut RngStream) -> f64 {
    StandardNormal.sample(rng)
}

/// Whether a Brownian bridge over one grid step, with both endpoints at
/// distances `d0, d1 > 0` from a level, touches that level in between.
#[inline]
pub(crate) fn bridge_crosses(d0: f64, d1: f64, h: f64, rng: &mut RngStream) -> bool {
    let e = 2.0 * d0 * d1 / h;
    e < 40.0 && rng.unit() < (-e).exp()
}

/// Raises `peak` to the maximum of a Brownian bridge from `y0` to `y1` over one
/// grid step when that maximum exceeds it, sampling the maximum exactly.
#[inline]
fn bridge_peak(peak: &mut f64, y0: f64, y1: f64, h: f64, rng: &mut RngStream) {
    let e = 2.0 * (*peak - y0) * (*peak - y1) / h;
    if e < 40.0 {
        let u = rng.open01();
        if u < (-e).exp() {
            *peak = 0.5 * (y0 + y1 + ((y1 - y0).powi(2) - 2.0 * h * u.ln()).sqrt());
        }
    }
}

/// Draw from `Q_γ` starting at `(0, 0)`: a Bessel-3 path (norm of a 3-d grid
/// Brownian motion) up to its first passage of `γ`, then a Brownian motion from
/// there down to 0. The Brownian part stops after `budget` time units have
/// elapsed in total, leaving the excursion open; the Bessel part always completes.
///
/// Both passages are checked between grid points with the Brownian bridge
/// crossing probability `exp(-2 d0 d1 / h)`, so that lifetimes carry no
/// `O(√h)` monitoring bias.
pub fn sample_excursion_geq(gamma: f64, h: f64, budget: f64, rng: &mut RngStream) -> Result<Excursion> {
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma", "height must be positive"));
    }
    if !(h > 0.0 && h <= gamma * gamma / 100.0 * (1.0 + 1e-12)) {
        return Err(Error::invalid("h", format!("grid step must lie in (0, γ²/100 = {}], got {h}", gamma * gamma / 100.0)));
    }
    let sh = h.sqrt();
    let max_steps = (budget.max(0.0) / h).round() as usize;
    let mut values = Vec::with_capacity(((gamma * gamma / h) as usize).max(16));
    values.push(0.0);
    let mut b = [0.0f64; 3];
    let mut r = 0.0;
    loop {
        for c in &mut b {
            *c += sh * normal(rng);
        }
        let next = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
        let crossed = next >= gamma || bridge_crosses(gamma - r, gamma - next, h, rng);
        r = next;
        values.push(r);
        if crossed {
            break;
        }
    }
    let mut y = r;
    let mut peak = gamma.max(r);
    let mut end = None;
    while values.len() <= max_steps {
        let next = y + sh * normal(rng);
        if next <= 0.0 || bridge_crosses(y, next, h, rng) {
            values.push(0.0);
            end = Some((values.len() - 1) as f64 * h);
            break;
        }
        bridge_peak(&mut peak, y, next, h, rng);
        y = next;
        values.push(y);
    }
    let mut ex = Excursion::new(0.0, end, h, values, 0.0, 0.0, 0);
    ex.peak = ex.peak.max(peak);
    Ok(ex)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FanParams {
    pub a: f64,
    pub gamma: f64,
    pub n_max: u32,
    pub horizon: f64,
    pub h: f64,
}

impl FanParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return Err(Error::invalid("a", "slope must be finite and ≥ 0"));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::invalid("gamma", "height must be positive"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid("horizon", "horizon must be finite and positive"));
        }
        if !(self.h > 0.0 && self.h <= self.gamma * self.gamma / 100.0 * (1.0 + 1e-12)) {
            return Err(Error::invalid("h", format!("grid step must lie in (0, γ²/100], got {}", self.h)));
        }
        Ok(())
    }
}

/// Children of `w` at rate `a/(2γ)` along `𝔩(w) ∩ [0, T]`, births snapped to the grid.
/// `index` is the position of `w` in its realisation, recorded as the children's parent.
pub fn sample_kernel(w: &Excursion, index: usize, params: &FanParams, rng: &mut RngStream) -> Result<Vec<Excursion>> {
    let FanParams { a, gamma, horizon, h, .. } = *params;
    let hi = w.end_or_last().min(horizon);
    let len = hi - w.s;
    if a == 0.0 || len <= 0.0 {
        return Ok(Vec::new());
    }
    let mean = a / (2.0 * gamma) * len;
    let k = Poisson::new(mean).map_err(|e| Error::invalid("a", e.to_string()))?.sample(rng) as usize;
    // Grid indices strictly inside the lifetime.
    let last_alive = if w.end.is_some() { w.values.len().saturating_sub(2) } else { w.values.len() - 1 };
    let last_alive = last_alive.min(((horizon - w.s) / h + 1e-9).floor() as usize);
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let tau = w.s + len * rng.unit();
        if last_alive == 0 {
            continue;
        }
        let i = (((tau - w.s) / h).round() as usize).clamp(1, last_alive);
        let tau = w.s + i as f64 * h;
        let level = w.values[i];
        let child = sample_excursion_geq(gamma, h, horizon - tau, rng)?;
        out.push(child.shifted(tau, level, w.generation + 1, index));
    }
    Ok(out)
}

/// How the ancestor's tag is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum AncestorTag {
    Fixed(f64),
    /// `v ~ Exp(1)`, so the killing depth `v/a` has mean `1/a`.
    Random,
    /// Killing depth exponential with mean `a`.
    RandomDepthMeanA,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FanRealization {
    pub params: FanParams,
    /// Ancestor tag actually used.
    pub v: f64,
    /// Ordered by generation; the ancestor is at index 0.
    pub excursions: Vec<Excursion>,
}

/// Samples a fan rooted at `x` with tag `v` (barrier `-v/a`).
pub fn sample_fan(x: f64, tag: AncestorTag, params: &FanParams, rng: &RngStream) -> Result<FanRealization> {
    sample_fan_limited(x, tag, params, DEFAULT_SAMPLE_LIMIT, rng)
}

pub fn sample_fan_limited(x: f64, tag: AncestorTag, params: &FanParams, sample_limit: usize, rng: &RngStream) -> Result<FanRealization> {
    params.validate()?;
    let a = params.a;
    let mut root = rng.child(0);
    let v = match tag {
        AncestorTag::Fixed(v) => v,
        AncestorTag::Random => Exp1.sample(&mut root),
        AncestorTag::RandomDepthMeanA => {
            let depth: f64 = Exp1.sample(&mut root);
            a * a * depth
        }
    };
    if !(v > -a * x) {
        return Err(Error::invalid("v", format!("tag {v} must exceed -a x = {}", -a * x)));
    }
    let barrier = if a == 0.0 { f64::NEG_INFINITY } else { -v / a };
    let ancestor = ancestor_path(x, barrier, params, &mut root);
    let mut stored = ancestor.values.len();
    let mut excursions = vec![ancestor];
    let mut gen_start = 0;
    for g in 1..=params.n_max {
        let gen_end = excursions.len();
        if gen_start == gen_end {
            break;
        }
        for idx in gen_start..gen_end {
            let mut r = rng.descend(&[u64::from(g), idx as u64]);
            let children = sample_kernel(&excursions[idx], idx, params, &mut r)?;
            stored += children.iter().map(|c| c.values.len()).sum::<usize>();
            if stored > sample_limit {
                return Err(Error::MemoryGuard { requested: stored, limit: sample_limit });
            }
            excursions.extend(children);
        }
        gen_start = gen_end;
    }
    Ok(FanRealization { params: *params, v, excursions })
}

fn ancestor_path(x: f64, barrier: f64, params: &FanParams, rng: &mut RngStream) -> Excursion {
    let h = params.h;
    let sh = h.sqrt();
    let steps = (params.horizon / h).round() as usize;
    let mut values = Vec::with_capacity(steps.min(1 << 16) + 1);
    values.push(x);
    let mut y = x;
    let mut end = None;
    while values.len() <= steps {
        let next = y + sh * normal(rng);
        if next <= barrier || bridge_crosses(y - barrier, next - barrier, h, rng) {
            values.push(barrier);
            end = Some((values.len() - 1) as f64 * h);
            break;
        }
        y = next;
        values.push(y);
    }
    Excursion::new(0.0, end, h, values, x, barrier, 0)
}

impl FanRealization {
    /// Sub-fan with height cutoff `gamma ≥ params.gamma` and depth `n_max ≤ params.n_max`,
    /// obtained by thinning: the Poisson children reaching the higher cutoff are
    /// exactly a fan with the coarser truncation.
    pub fn restrict(&self, gamma: f64, n_max: u32) -> Result<FanRealization> {
        if gamma < self.params.gamma * (1.0 - 1e-12) {
            return Err(Error::invalid("gamma", "can only coarsen the height cutoff"));
        }
        let thin = gamma > self.params.gamma;
        let mut keep_index = vec![None; self.excursions.len()];
        let mut excursions = Vec::new();
        for (i, w) in self.excursions.iter().enumerate() {
            if w.generation > n_max {
                continue;
            }
            let parent = match w.parent {
                None => None,
                Some(p) => match keep_index[p] {
                    Some(np) if !thin || w.height() >= gamma => Some(np),
                    _ => continue,
                },
            };
            keep_index[i] = Some(excursions.len());
            let mut c = w.clone();
            c.parent = parent;
            excursions.push(c);
        }
        let mut params = self.params;
        params.gamma = gamma;
        params.n_max = n_max;
        Ok(FanRealization { params, v: self.v, excursions })
    }

    /// Alive excursions at `t` as tagged points `(w_t, -a·barrier, generation)`.
    pub fn evaluate(&self, t: f64) -> Result<PointMeasure> {
        self.check_time(t)?;
        let a = self.params.a;
        let points = self
            .excursions
            .iter()
            .filter(|w| w.alive_at(t))
            .filter_map(|w| w.value_at(t).map(|x| TaggedPoint::new(x, -a * w.barrier, w.generation)))
            .collect();
        Ok(PointMeasure::new(points))
    }

    pub fn particle_count(&self, t: f64) -> Result<usize> {
        self.check_time(t)?;
        Ok(self.excursions.iter().filter(|w| w.alive_at(t)).count())
    }

    pub fn generation_count(&self, t: f64, n: u32) -> usize {
        self.excursions.iter().filter(|w| w.generation == n && w.alive_at(t)).count()
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.params.horizon * (1.0 + 1e-12)).contains(&t) {
            return Err(Error::invalid("t", format!("time {t} outside [0, {}]", self.params.horizon)));
        }
        Ok(())
    }

    /// Counts on a uniform grid `0, Δ, ..., T` with `Δ = stride · h`, the
    /// trapezoid workload and the dyadic modulus statistic.
    pub fn workload(&self, stride: usize) -> Result<Workload> {
        if stride == 0 {
            return Err(Error::invalid("stride", "must be at least 1"));
        }
        let dt = stride as f64 * self.params.h;
        let n = (self.params.horizon / dt).round() as usize;
        let mut diff = vec![0i64; n + 2];
        for w in &self.excursions {
            // Grid points strictly inside (s, e), or up to the last sample when open.
            let first = (w.s / dt).floor() as usize + 1;
            let last = if w.end.is_some() {
                ((w.end_or_last() / dt).ceil() as usize).saturating_sub(1)
            } else {
                (w.last_time() / dt + 1e-9).floor() as usize
            };
            let last = last.min(n);
            if first <= last {
                diff[first] += 1;
                diff[last + 1] -= 1;
            }
        }
        let mut counts = Vec::with_capacity(n + 1);
        let mut running = 0i64;
        for d in diff.iter().take(n + 1) {
            running += d;
            counts.push(running as u64);
        }
        let times: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
        Ok(Workload::from_counts(times, counts))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub times: Vec<f64>,
    pub counts: Vec<u64>,
    /// `𝒲_t = ∫_0^t N_s ds` by the trapezoid rule.
    pub cumulative: Vec<f64>,
    /// `max |𝒲_{t+δ} - 𝒲_t| / (δ |ln δ|)` over dyadic `δ < 1`.
    pub modulus: f64,
}

impl Workload {
    pub fn from_counts(times: Vec<f64>, counts: Vec<u64>) -> Self {
        let mut cumulative = Vec::with_capacity(counts.len());
        cumulative.push(0.0);
        for i in 1..counts.len() {
            let dt = times[i] - times[i - 1];
            cumulative.push(cumulative[i - 1] + 0.5 * dt * (counts[i] + counts[i - 1]) as f64);
        }
        let modulus = dyadic_modulus(&times, &cumulative);
        Self { times, counts, cumulative, modulus }
    }
}

fn dyadic_modulus(times: &[f64], w: &[f64]) -> f64 {
    if times.len() < 2 {
        return 0.0;
    }
    let dt = times[1] - times[0];
    let mut best = 0.0f64;
    let mut m = 1usize;
    while m < times.len() {
        let delta = m as f64 * dt;
        if delta >= 1.0 {
            break;
        }
        let scale = delta * delta.ln().abs();
        for i in 0..times.len() - m {
            best = best.max((w[i + m] - w[i]).abs() / scale);
        }
        m *= 2;
    }
    best
}

/// Estimates `sup_w ∫F dQ(w, ·) / F(w)` for `F(w) = e^{-η 𝔰(w)} (1 - e^{-η |𝔩(w)|})`
/// and the untruncated kernel of intensity `a`.
///
/// Parents are drawn with `𝔰 ~ U(0, 1)` and heavy-tailed lifetimes. For each
/// parent, child birth times are drawn from the density proportional to
/// `e^{-ητ}` on the parent's lifetime and child lifetimes from a bounded-weight
/// importance proposal for the excursion lifetime measure `ℓ^{-3/2} dℓ / √(2π)`.
pub fn truncation_contraction_check(a: f64, eta: f64, samples: usize, rng: &RngStream) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::invalid("eta", "must be positive"));
    }
    if a < 0.0 {
        return Err(Error::invalid("a", "must be non-negative"));
    }
    if a == 0.0 {
        return Ok(0.0);
    }
    const PARENTS: usize = 16;
    let inner = (samples / PARENTS).max(100);
    let mut sup = 0.0f64;
    let inv_sqrt_2pi = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    for j in 0..PARENTS {
        let mut r = rng.child(j as u64);
        let s = r.unit();
        let ell = 1.0 / r.open01().powi(2) - 1.0 + 1e-3;
        let f_parent = (-eta * s).exp() * -(-eta * ell).exp_m1();
        let mut acc = 0.0;
        for _ in 0..inner {
            // Birth time with density η e^{-η(τ-s)} / (1 - e^{-ηℓ}) on (s, s + ℓ).
            let u = r.open01();
            let tau = s - (1.0 - u * -(-eta * ell).exp_m1()).ln() / eta;
            let birth_weight = f_parent / eta / (-eta * tau).exp();
            // Child lifetime ℓ' = W/η, W from the mixture of U² and U^{-2}.
            let v = r.open01();
            let wv = if r.unit() < 0.5 { v * v } else { 1.0 / (v * v) };
            let q_w = if wv < 1.0 { 0.25 / wv.sqrt() } else { 0.25 * wv.powf(-1.5) };
            let life = wv / eta;
            let density = inv_sqrt_2pi * life.powf(-1.5);
            let child_f = (-eta * tau).exp() * -(-eta * life).exp_m1();
            acc += child_f * birth_weight * density / (q_w * eta);
        }
        let ratio = 0.5 * a * acc / inner as f64 / f_parent;
        sup = sup.max(ratio);
    }
    Ok(sup)
}

/// Writes the realisation as `{params, v, excursions: [{s, e, h, generation, values, ...}]}`.
pub fn write_fan_json(fr: &FanRealization, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer(std::io::BufWriter::new(f), fr)?;
    Ok(())
}

pub fn read_fan_json(path: &Path) -> Result<FanRealization> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
}
