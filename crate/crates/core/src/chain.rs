//! Underlying Markov dynamics: unit-variance step laws, the rescaled random walk,
//! the Euler scheme and potentials, plus the direct weighted Monte Carlo
//! estimator of `E[f(y_t) exp(-Σ χ(y_k, y_{k+1}))]`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::stats::Estimate;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// One-step law ν of the walk. Every kind has mean 0 and variance 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepDistribution {
    StandardNormal,
    Rademacher,
    /// Uniform on `[-√3, √3]`.
    CenteredUniform,
    /// Laplace law with scale `1/√2`.
    TwoSidedExponential,
}

impl StepDistribution {
    pub const ALL: [StepDistribution; 4] = [
        StepDistribution::StandardNormal,
        StepDistribution::Rademacher,
        StepDistribution::CenteredUniform,
        StepDistribution::TwoSidedExponential,
    ];

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            StepDistribution::StandardNormal => StandardNormal.sample(rng),
            StepDistribution::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            StepDistribution::CenteredUniform => SQRT3 * (2.0 * rng.random::<f64>() - 1.0),
            StepDistribution::TwoSidedExponential => {
                let e = -(1.0 - rng.random::<f64>()).ln() * std::f64::consts::FRAC_1_SQRT_2;
                if rng.random::<bool>() {
                    e
                } else {
                    -e
                }
            }
        }
    }

    /// Upper tail `ν([s, ∞))` in closed form.
    pub fn tail(&self, s: f64) -> f64 {
        match self {
            StepDistribution::StandardNormal => 0.5 * statrs::function::erf::erfc(s / std::f64::consts::SQRT_2),
            StepDistribution::Rademacher => {
                if s <= -1.0 {
                    1.0
                } else if s <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
            StepDistribution::CenteredUniform => ((SQRT3 - s) / (2.0 * SQRT3)).clamp(0.0, 1.0),
            StepDistribution::TwoSidedExponential => {
                let r = std::f64::consts::SQRT_2;
                if s >= 0.0 {
                    0.5 * (-r * s).exp()
                } else {
                    1.0 - 0.5 * (r * s).exp()
                }
            }
        }
    }

    /// Moment generating function `E exp(c ξ)`; `None` where it diverges.
    pub fn mgf(&self, c: f64) -> Option<f64> {
        match self {
            StepDistribution::StandardNormal => Some((0.5 * c * c).exp()),
            StepDistribution::Rademacher => Some(c.cosh()),
            StepDistribution::CenteredUniform => {
                let z = SQRT3 * c;
                Some(if z.abs() < 1e-8 { 1.0 + z * z / 6.0 } else { z.sinh() / z })
            }
            StepDistribution::TwoSidedExponential => {
                let b2c2 = 0.5 * c * c;
                (b2c2 < 1.0).then(|| 1.0 / (1.0 - b2c2))
            }
        }
    }

    /// Right end of the support (`∞` for unbounded laws).
    pub fn upper_support(&self) -> f64 {
        match self {
            StepDistribution::Rademacher => 1.0,
            StepDistribution::CenteredUniform => SQRT3,
            _ => f64::INFINITY,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            StepDistribution::StandardNormal => "standard-normal",
            StepDistribution::Rademacher => "rademacher",
            StepDistribution::CenteredUniform => "centered-uniform",
            StepDistribution::TwoSidedExponential => "two-sided-exponential",
        }
    }
}

impl fmt::Display for StepDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StepDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StepDistribution::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::invalid("dist", format!("unknown step distribution `{s}`")))
    }
}

/// `sample_step`: one draw from ν.
#[inline]
pub fn sample_step(dist: StepDistribution, rng: &mut RngStream) -> f64 {
    dist.sample(rng)
}

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
/// Returns a row-major `d × d` matrix.
pub type MatrixField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Potential `V`, with `χ(x, y) = V(y) - V(x)`.
#[derive(Clone)]
pub enum Potential {
    /// `V(x) = -a x`.
    Linear { a: f64 },
    Custom(ScalarFn),
}

impl Potential {
    pub fn linear(a: f64) -> Self {
        Potential::Linear { a }
    }

    pub fn zero() -> Self {
        Potential::Linear { a: 0.0 }
    }

    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Potential::Custom(Arc::new(f))
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Potential::Linear { a } => -a * x,
            Potential::Custom(f) => f(x),
        }
    }

    #[inline]
    pub fn chi(&self, x: f64, y: f64) -> f64 {
        match self {
            Potential::Linear { a } => -a * (y - x),
            Potential::Custom(f) => f(y) - f(x),
        }
    }

    /// Slope `a` of a linear potential.
    pub fn slope(&self) -> Option<f64> {
        match self {
            Potential::Linear { a } => Some(*a),
            Potential::Custom(_) => None,
        }
    }
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Linear { a } => write!(f, "Linear {{ a: {a} }}"),
            Potential::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Step size and coefficients of `y' = y + ε F(y) + √ε Σ(y) ξ`.
/// Missing coefficients default to `F = 0`, `Σ = I`.
#[derive(Clone)]
pub struct ChainParams {
    pub eps: f64,
    pub dim: usize,
    pub drift: Option<VectorField>,
    pub diffusion: Option<MatrixField>,
}

impl ChainParams {
    pub fn new(eps: f64) -> Result<Self> {
        Self::with_dim(eps, 1)
    }

    pub fn with_dim(eps: f64, dim: usize) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::invalid("eps", format!("time step must be positive and finite, got {eps}")));
        }
        if dim == 0 {
            return Err(Error::invalid("dim", "dimension must be at least 1"));
        }
        Ok(Self { eps, dim, drift: None, diffusion: None })
    }

    pub fn drift(mut self, f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.drift = Some(Arc::new(f));
        self
    }

    pub fn diffusion(mut self, s: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.diffusion = Some(Arc::new(s));
        self
    }

    pub fn is_plain_walk(&self) -> bool {
        self.dim == 1 && self.drift.is_none() && self.diffusion.is_none()
    }

    /// Number of steps in `[0, t]`; errors unless `t` is a whole multiple of ε.
    pub fn steps_for(&self, t: f64) -> Result<u64> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::invalid("t", format!("horizon must be finite and non-negative, got {t}")));
        }
        let k = (t / self.eps).round();
        if (k * self.eps - t).abs() > 1e-9 * t.max(self.eps) {
            return Err(Error::invalid("t", format!("horizon {t} is not a multiple of eps = {}", self.eps)));
        }
        Ok(k as u64)
    }

    /// One-dimensional step; the fast path for the plain walk.
    #[inline]
    pub fn advance(&self, x: f64, dist: StepDistribution, rng: &mut RngStream) -> f64 {
        if self.is_plain_walk() {
            x + self.eps.sqrt() * dist.sample(rng)
        } else {
            euler_step(&[x], self, dist, rng)[0]
        }
    }
}

impl fmt::Debug for ChainParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChainParams")
            .field("eps", &self.eps)
            .field("dim", &self.dim)
            .field("drift", &self.drift.as_ref().map(|_| ".."))
            .field("diffusion", &self.diffusion.as_ref().map(|_| ".."))
            .finish()
    }
}

/// Euler step with a fresh ξ drawn coordinate-wise from `dist`.
pub fn euler_step(state: &[f64], params: &ChainParams, dist: StepDistribution, rng: &mut RngStream) -> Vec<f64> {
    let xi: Vec<f64> = (0..state.len()).map(|_| dist.sample(rng)).collect();
    euler_step_with(state, params, &xi)
}

/// Euler step for a given noise vector ξ.
pub fn euler_step_with(state: &[f64], params: &ChainParams, xi: &[f64]) -> Vec<f64> {
    let d = state.len();
    let eps = params.eps;
    let mut out = state.to_vec();
    if let Some(f) = &params.drift {
        for (o, fi) in out.iter_mut().zip(f(state)) {
            *o += eps * fi;
        }
    }
    let se = eps.sqrt();
    match &params.diffusion {
        None => {
            for (o, x) in out.iter_mut().zip(xi) {
                *o += se * x;
            }
        }
        Some(sigma) => {
            let m = sigma(state);
            for (i, o) in out.iter_mut().enumerate() {
                let row = &m[i * d..(i + 1) * d];
                *o += se * row.iter().zip(xi).map(|(s, x)| s * x).sum::<f64>();
            }
        }
    }
    out
}

/// `walk_path`: `n_steps + 1` points of the rescaled walk started at `x0`.
pub fn walk_path(x0: f64, params: &ChainParams, n_steps: usize, dist: StepDistribution, rng: &mut RngStream) -> Vec<f64> {
    let se = params.eps.sqrt();
    let mut path = Vec::with_capacity(n_steps + 1);
    let mut y = x0;
    path.push(y);
    for _ in 0..n_steps {
        y += se * dist.sample(rng);
        path.push(y);
    }
    path
}

/// Direct weighted Monte Carlo for `⟨f⟩_t`.
///
/// Each of the `m` paths starts at `x0` and evolves with [`ChainParams::advance`];
/// its log-weight `-Σ χ(y_k, y_{k+1})` is accumulated step by step. Sample `i`
/// uses `rng.child(i)`.
pub fn weighted_mc_estimate(
    f: impl Fn(f64) -> f64 + Sync,
    x0: f64,
    t: f64,
    m: usize,
    potential: &Potential,
    params: &ChainParams,
    dist: StepDistribution,
    rng: &RngStream,
) -> Result<Estimate> {
    let values = weighted_mc_samples(&f, x0, t, m, potential, params, dist, rng)?;
    Ok(Estimate::from_samples(&values))
}

/// Per-path values `f(y_t) exp(-Σχ)` behind [`weighted_mc_estimate`].
pub fn weighted_mc_samples(
    f: &(impl Fn(f64) -> f64 + Sync),
    x0: f64,
    t: f64,
    m: usize,
    potential: &Potential,
    params: &ChainParams,
    dist: StepDistribution,
    rng: &RngStream,
) -> Result<Vec<f64>> {
    Ok(weighted_endpoints(x0, t, m, potential, params, dist, rng)?.into_iter().map(|(y, w)| f(y) * w).collect())
}

/// Endpoint `y_t` and weight `exp(-Σχ)` of each of `m` paths; path `i` uses `rng.child(i)`.
pub fn weighted_endpoints(
    x0: f64,
    t: f64,
    m: usize,
    potential: &Potential,
    params: &ChainParams,
    dist: StepDistribution,
    rng: &RngStream,
) -> Result<Vec<(f64, f64)>> {
    if m < 2 {
        return Err(Error::invalid("m", "need at least two samples"));
    }
    let steps = params.steps_for(t)?;
    Ok((0..m as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng.child(i);
            let mut y = x0;
            let mut log_w = 0.0;
            for _ in 0..steps {
                let next = params.advance(y, dist, &mut r);
                log_w -= potential.chi(y, next);
                y = next;
            }
            (y, log_w.exp())
        })
        .collect())
}

/// `E exp(c · Σ_{k≤n} √ε ξ_k) = mgf(c√ε)^n`, the exact mean of the linear-potential weight.
pub fn exact_exponential_moment(dist: StepDistribution, c: f64, eps: f64, steps: u64) -> Option<f64> {
    dist.mgf(c * eps.sqrt()).map(|m| m.powf(steps as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(dist: StepDistribution, n: usize, seed: u64) -> (f64, f64) {
        let mut rng = RngStream::new(seed);
        let xs: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        (m, v)
    }

    #[test]
    fn supports() {
        let mut rng = RngStream::new(1);
        for _ in 0..10_000 {
            let r = sample_step(StepDistribution::Rademacher, &mut rng);
            assert!(r == 1.0 || r == -1.0);
            let u = sample_step(StepDistribution::CenteredUniform, &mut rng);
            assert!((-SQRT3..=SQRT3).contains(&u));
        }
    }

    #[test]
    fn unit_moments_all_laws() {
        // Kurtosis ≤ 6 for these laws, so Var(s²) ≤ 5 and 5 standard errors of the variance is 5·√(5/n).
        let n = 1_000_000;
        for (k, dist) in StepDistribution::ALL.into_iter().enumerate() {
            let (m, v) = moments(dist, n, 100 + k as u64);
            assert!(m.abs() < 5.0 / (n as f64).sqrt(), "{dist}: mean {m}");
            assert!((v - 1.0).abs() < 5.0 * (5.0 / n as f64).sqrt(), "{dist}: var {v}");
        }
    }

    #[test]
    fn normal_variance_tight() {
        let (_, v) = moments(StepDistribution::StandardNormal, 1_000_000, 9);
        assert!((v - 1.0).abs() < 0.005);
    }

    #[test]
    fn tails_decay_exponentially() {
        let n = 1_000_000;
        for dist in [StepDistribution::StandardNormal, StepDistribution::TwoSidedExponential] {
            let mut rng = RngStream::new(77);
            let xs: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng).abs()).collect();
            let ks = [2.0, 2.5, 3.0, 3.5, 4.0];
            let logs: Vec<f64> = ks
                .iter()
                .map(|k| ((xs.iter().filter(|x| **x >= *k).count() as f64 + 0.5) / n as f64).ln())
                .collect();
            let fit = crate::stats::linear_fit(&ks, &logs).unwrap();
            assert!(fit.slope < 0.0, "{dist}: slope {}", fit.slope);
        }
    }

    #[test]
    fn tail_closed_forms_match_sampling() {
        let n = 200_000;
        for dist in StepDistribution::ALL {
            let mut rng = RngStream::new(5);
            let xs: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
            for s in [0.3, 0.8, 1.5] {
                let emp = xs.iter().filter(|x| **x >= s).count() as f64 / n as f64;
                let p = dist.tail(s);
                assert!((emp - p).abs() < 5.0 * (p * (1.0 - p) / n as f64).sqrt() + 1e-12, "{dist} s={s}");
            }
        }
    }

    #[test]
    fn potential_telescopes() {
        let v = Potential::custom(|x| x.sin() + 0.3 * x * x);
        let (x, y, z) = (0.1, -1.7, 2.4);
        assert!((v.chi(x, y) + v.chi(y, z) - v.chi(x, z)).abs() < 1e-12);
        let lin = Potential::linear(1.5);
        assert_eq!(lin.value(2.0), -3.0);
        assert!((lin.chi(x, y) + lin.chi(y, z) - lin.chi(x, z)).abs() < 1e-12);
    }

    #[test]
    fn linear_weight_product_telescopes() {
        let a = 1.3;
        let v = Potential::linear(a);
        let p = ChainParams::new(0.01).unwrap();
        let path = walk_path(0.2, &p, 400, StepDistribution::StandardNormal, &mut RngStream::new(4));
        let prod: f64 = path.windows(2).map(|w| (-v.chi(w[0], w[1])).exp()).product();
        let expected = (a * (path[400] - path[0])).exp();
        assert!((prod / expected - 1.0).abs() < 1e-10);
    }

    #[test]
    fn walk_path_basics() {
        let p = ChainParams::new(1.0).unwrap();
        assert_eq!(walk_path(0.0, &p, 0, StepDistribution::StandardNormal, &mut RngStream::new(1)), vec![0.0]);
        let path = walk_path(0.0, &p, 50, StepDistribution::Rademacher, &mut RngStream::new(1));
        assert!(path.windows(2).all(|w| (w[1] - w[0]).abs() == 1.0));
        let again = walk_path(0.0, &p, 50, StepDistribution::Rademacher, &mut RngStream::new(1));
        assert_eq!(path, again);
    }

    #[test]
    fn walk_variance_additivity() {
        // n ε = 1, so Var(y_1) = 1; Var of the sample variance ≈ 2/R.
        let p = ChainParams::new(0.01).unwrap();
        let reps = 100_000;
        let root = RngStream::new(12);
        let ends: Vec<f64> = (0..reps)
            .map(|i| *walk_path(0.0, &p, 100, StepDistribution::StandardNormal, &mut root.child(i)).last().unwrap())
            .collect();
        let m = ends.iter().sum::<f64>() / reps as f64;
        let var = ends.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (reps - 1) as f64;
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn variance_scaling_each_law() {
        let p = ChainParams::new(0.05).unwrap();
        let reps = 20_000u64;
        for dist in StepDistribution::ALL {
            let root = RngStream::new(31);
            let ends: Vec<f64> = (0..reps).map(|i| walk_path(0.0, &p, 10, dist, &mut root.child(i))[10]).collect();
            let var = ends.iter().map(|x| x * x).sum::<f64>() / reps as f64;
            // t = 0.5; sd of the sample second moment is ≤ sqrt((3+κ) t² / R) with κ ≤ 3.
            assert!((var - 0.5).abs() < 5.0 * (6.0 * 0.25 / reps as f64).sqrt(), "{dist}: {var}");
        }
    }

    #[test]
    fn euler_defaults_and_formula() {
        let p = ChainParams::new(0.1).unwrap().drift(|y| vec![-y[0]]).diffusion(|_| vec![0.0]);
        assert!((euler_step_with(&[1.0], &p, &[0.7])[0] - 0.9).abs() < 1e-15);
        let p = ChainParams::new(0.25).unwrap().diffusion(|_| vec![2.0]);
        assert!((euler_step_with(&[3.0], &p, &[1.0])[0] - 4.0).abs() < 1e-15);
        // Defaults reduce to a walk increment with the same draw.
        let plain = ChainParams::new(0.04).unwrap();
        let a = euler_step(&[0.5], &plain, StepDistribution::StandardNormal, &mut RngStream::new(8))[0];
        let b = walk_path(0.5, &plain, 1, StepDistribution::StandardNormal, &mut RngStream::new(8))[1];
        assert_eq!(a, b);
    }

    #[test]
    fn euler_two_dimensional_smoke() {
        let p = ChainParams::with_dim(0.01, 2)
            .unwrap()
            .drift(|y| vec![-y[0], -y[1]])
            .diffusion(|_| vec![1.0, 0.0, 0.5, 1.0]);
        let y = euler_step(&[1.0, -1.0], &p, StepDistribution::StandardNormal, &mut RngStream::new(2));
        assert_eq!(y.len(), 2);
        assert!(y.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rejects_bad_eps_and_horizon() {
        assert!(ChainParams::new(0.0).is_err());
        assert!(ChainParams::new(-1.0).is_err());
        let p = ChainParams::new(0.01).unwrap();
        assert_eq!(p.steps_for(0.5).unwrap(), 50);
        assert!(p.steps_for(0.505).is_err());
        let r = weighted_mc_estimate(|_| 1.0, 0.0, 0.505, 10, &Potential::zero(), &p, StepDistribution::StandardNormal, &RngStream::new(0));
        assert!(matches!(r, Err(Error::InvalidArgument { name: "t", .. })));
    }

    #[test]
    fn weighted_mc_trivial_cases() {
        let p = ChainParams::new(0.01).unwrap();
        let root = RngStream::new(3);
        let e = weighted_mc_estimate(|_| 1.0, 0.0, 0.5, 1000, &Potential::zero(), &p, StepDistribution::StandardNormal, &root).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.stderr, 0.0);
        let e = weighted_mc_estimate(|x| x, 0.0, 0.5, 100_000, &Potential::zero(), &p, StepDistribution::StandardNormal, &root).unwrap();
        assert!(e.mean.abs() < 3.0 * e.stderr, "{e:?}");
    }

    #[test]
    fn weighted_mc_matches_gaussian_mgf() {
        // V(x) = -x: weight exp(y_t), E = exp(t/2) exactly for Gaussian steps.
        let p = ChainParams::new(0.01).unwrap();
        let e = weighted_mc_estimate(
            |_| 1.0,
            0.0,
            0.5,
            1_000_000,
            &Potential::linear(1.0),
            &p,
            StepDistribution::StandardNormal,
            &RngStream::new(21),
        )
        .unwrap();
        let exact = 0.25f64.exp();
        assert!((e.mean - exact).abs() < 3.0 * e.stderr, "{e:?} vs {exact}");
    }

    #[test]
    fn mgf_against_quadrature() {
        // Independent check of the closed forms by midpoint quadrature of the densities.
        let c = 0.37;
        let quad = |dens: &dyn Fn(f64) -> f64, lo: f64, hi: f64| {
            let n = 200_000;
            let h = (hi - lo) / n as f64;
            (0..n).map(|i| lo + (i as f64 + 0.5) * h).map(|x| (c * x).exp() * dens(x) * h).sum::<f64>()
        };
        let normal = quad(&|x| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(), -12.0, 12.0);
        let unif = quad(&|_| 1.0 / (2.0 * SQRT3), -SQRT3, SQRT3);
        let lap = quad(&|x| std::f64::consts::FRAC_1_SQRT_2 * (-std::f64::consts::SQRT_2 * x.abs()).exp(), -40.0, 40.0);
        assert!((StepDistribution::StandardNormal.mgf(c).unwrap() - normal).abs() < 1e-8);
        assert!((StepDistribution::CenteredUniform.mgf(c).unwrap() - unif).abs() < 1e-8);
        // Wider range and the density kink at 0 cost an order of magnitude in midpoint accuracy.
        assert!((StepDistribution::TwoSidedExponential.mgf(c).unwrap() - lap).abs() < 1e-7, "{lap}");
        assert_eq!(StepDistribution::Rademacher.mgf(c).unwrap(), c.cosh());
        assert!(StepDistribution::TwoSidedExponential.mgf(2.0).is_none());
    }

    #[test]
    fn names_round_trip() {
        for d in StepDistribution::ALL {
            assert_eq!(d.name().parse::<StepDistribution>().unwrap(), d);
            let json = serde_json::to_string(&d).unwrap();
            assert_eq!(json, format!("\"{}\"", d.name()));
        }
        assert!("cauchy".parse::<StepDistribution>().is_err());
    }
}
