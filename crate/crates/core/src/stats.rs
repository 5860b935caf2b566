//! Running moments for Monte-Carlo estimators.

use serde::{Deserialize, Serialize};

/// Welford accumulator; shards can be merged in any fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &RunningStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let total = self.count + other.count;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / total as f64;
        self.m2 += other.m2 + delta * delta * (self.count as f64 * other.count as f64) / total as f64;
        self.count = total;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance (zero with fewer than two samples).
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        (self.variance() / self.count as f64).sqrt()
    }

    pub fn estimate(&self) -> McEstimate {
        McEstimate {
            mean: self.mean(),
            std_error: self.std_error(),
            samples: self.count,
        }
    }
}

/// A Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
}

impl McEstimate {
    /// Number of standard errors separating the mean from zero.
    pub fn z_score(&self) -> f64 {
        if self.std_error == 0.0 {
            if self.mean == 0.0 {
                0.0
            } else {
                self.mean.signum() * f64::INFINITY
            }
        } else {
            self.mean / self.std_error
        }
    }
}

/// Binomial proportion `hits/total` with its standard error.
pub fn proportion(hits: u64, total: u64) -> McEstimate {
    let p = hits as f64 / total as f64;
    McEstimate {
        mean: p,
        std_error: (p * (1.0 - p) / total as f64).sqrt(),
        samples: total,
    }
}

/// Least-squares slope of `y` against `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_matches_single_pass() {
        let data: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1 - 3.0).collect();
        let mut all = RunningStats::new();
        data.iter().for_each(|&x| all.push(x));
        let mut a = RunningStats::new();
        let mut b = RunningStats::new();
        data[..313].iter().for_each(|&x| a.push(x));
        data[313..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert_eq!(a.count(), all.count());
        assert!((a.mean() - all.mean()).abs() < 1e-12);
        assert!((a.variance() - all.variance()).abs() < 1e-9);
    }

    #[test]
    fn slope_of_a_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| -0.5 * v + 2.0).collect();
        assert!((ols_slope(&x, &y) + 0.5).abs() < 1e-14);
    }
}
