use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("a trend needs at least two numeric values")]
pub struct InsufficientData;

/// Least-squares line through `(i, values[i-1])` for `i = 1..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendLine {
    pub slope: f64,
    pub intercept: f64,
    /// The line evaluated at `n + 1`.
    pub next_prediction: f64,
}

impl TrendLine {
    pub fn at(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Ordinary least squares against the implicit x-coordinates `1..=n`.
pub fn linear_trend(values: &[f64]) -> Result<TrendLine, InsufficientData> {
    let n = values.len();
    if n < 2 {
        return Err(InsufficientData);
    }
    let nf = n as f64;
    let mean_x = (nf + 1.0) / 2.0;
    let mean_y = values.iter().sum::<f64>() / nf;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in values.iter().enumerate() {
        let dx = (i + 1) as f64 - mean_x;
        sxy += dx * (y - mean_y);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    Ok(TrendLine { slope, intercept, next_prediction: slope * (nf + 1.0) + intercept })
}
