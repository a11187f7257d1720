//! Small sample-statistics helpers shared by the estimators.

use serde::{Deserialize, Serialize};

/// Order-fixed pairwise summation. The result depends only on the input
/// order, never on how work was scheduled.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let dev: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&dev) / (xs.len() - 1) as f64
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Linear-interpolated quantile, `q` in [0, 1].
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Sample mean with its i.i.d. standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl MomentEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let samples = xs.len();
        let value = mean(xs);
        let std_error = if samples > 1 { (variance(xs) / samples as f64).sqrt() } else { f64::NAN };
        MomentEstimate { value, std_error, samples }
    }

    /// Number of standard errors separating the estimate from `target`.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.value - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }

    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        self.z_score(target) < sigmas
    }
}

/// Sample variance together with an estimate of its own standard error,
/// `sqrt((m4 - s^4) / M)` from the fourth central moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub variance: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl VarianceEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let m = xs.len();
        let var = variance(xs);
        let mu = mean(xs);
        let fourth: Vec<f64> = xs.iter().map(|x| (x - mu).powi(4)).collect();
        let m4 = mean(&fourth);
        let biased = var * (m as f64 - 1.0) / m as f64;
        let se = ((m4 - biased * biased).max(0.0) / m as f64).sqrt();
        VarianceEstimate { variance: var, std_error: se, samples: m }
    }
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
