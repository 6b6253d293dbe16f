//! Order-stable reductions for Monte Carlo output.

use serde::Serialize;

/// Neumaier-compensated sum; the result depends only on the input order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub estimate: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        let mean = compensated_sum(values.iter().copied()) / n as f64;
        let var = if n > 1 {
            compensated_sum(values.iter().map(|v| (v - mean).powi(2))) / (n - 1) as f64
        } else {
            0.0
        };
        Estimate { estimate: mean, se: (var / n as f64).sqrt(), n }
    }

    /// |estimate - target| in standard errors (0 when both agree exactly).
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.estimate - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.se
        }
    }
}
