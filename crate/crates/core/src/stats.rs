//! Statistical comparators shared by the estimators and the verification suite.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// A Monte Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn new(mean: f64, stderr: f64) -> Self {
        Self { mean, stderr }
    }

    pub fn exact(mean: f64) -> Self {
        Self { mean, stderr: 0.0 }
    }

    /// Sample mean and `sd / sqrt(n)`; the standard error of a single sample is reported as 0.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self::new(f64::NAN, f64::NAN);
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Self::exact(mean);
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Self::new(mean, (var / n as f64).sqrt())
    }

    pub fn scale(self, c: f64) -> Self {
        Self::new(self.mean * c, self.stderr * c.abs())
    }

    /// z-score of `self - other`, treating the two as independent.
    pub fn z_against(&self, other: &Estimate) -> f64 {
        z_score(self.mean - other.mean, (self.stderr.powi(2) + other.stderr.powi(2)).sqrt())
    }

    /// z-score of `self` against an exact value.
    pub fn z_exact(&self, value: f64) -> f64 {
        z_score(self.mean - value, self.stderr)
    }
}

/// `diff / se`, with the 0/0 case (exact agreement of exact quantities) mapped to 0.
pub fn z_score(diff: f64, se: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else if se == 0.0 {
        diff.signum() * f64::INFINITY
    } else {
        diff / se
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value.
///
/// Ties are handled by advancing both empirical distribution functions over a
/// shared value before comparing them, so integer-valued samples are fine
/// (the test is then conservative).
pub fn two_sample_ks(x: &[f64], y: &[f64]) -> Result<KsResult> {
    const MIN: usize = 20;
    if x.len() < MIN || y.len() < MIN {
        return Err(Error::invalid("samples", format!("two-sample KS needs at least {MIN} points per sample, got {} and {}", x.len(), y.len())));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::invalid("samples", "NaN in KS input"));
    }
    let mut a = x.to_vec();
    let mut b = y.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < n && a[i] <= v {
            i += 1;
        }
        while j < m && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok(KsResult { statistic: d, p_value: kolmogorov_q(lambda) })
}

/// Survival function of the Kolmogorov distribution,
/// `Q(λ) = 2 Σ_{k≥1} (-1)^{k-1} exp(-2 k² λ²)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    if lambda < 1.18 {
        // The alternating series converges slowly here; use the theta-function form.
        let y = (-std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda)).exp();
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * (y + y.powi(9) + y.powi(25) + y.powi(49));
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64).powi(2) * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-300 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slope {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
}

/// Ordinary least squares fit of `y = intercept + slope * x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<Slope> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::invalid("xs", "need at least two paired points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("xs", "abscissae are all equal"));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if xs.len() > 2 {
        let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(Slope { slope, stderr, intercept })
}

/// Least-squares slope of `log(values)` against `log(deltas)`.
pub fn loglog_slope(deltas: &[f64], values: &[f64]) -> Result<Slope> {
    if deltas.iter().chain(values).any(|v| !(*v > 0.0)) {
        return Err(Error::invalid("values", "log-log regression needs strictly positive inputs"));
    }
    let lx: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

/// Percentile bootstrap confidence interval for a statistic of one sample.
pub fn bootstrap_ci(xs: &[f64], statistic: impl Fn(&[f64]) -> f64, level: f64, resamples: usize, rng: &mut RngStream) -> Result<Interval> {
    if resamples < 1000 {
        return Err(Error::invalid("resamples", "bootstrap needs at least 1000 resamples"));
    }
    if xs.is_empty() {
        return Err(Error::invalid("xs", "empty sample"));
    }
    let mut buf = vec![0.0; xs.len()];
    let stats: Vec<f64> = (0..resamples)
        .map(|_| {
            for slot in buf.iter_mut() {
                *slot = xs[rng.random_range(0..xs.len())];
            }
            statistic(&buf)
        })
        .collect();
    let alpha = (1.0 - level) / 2.0;
    Ok(Interval { lower: quantile(&stats, alpha), upper: quantile(&stats, 1.0 - alpha) })
}
