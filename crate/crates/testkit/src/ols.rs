//! Exact least squares over x = 1..n for checking `linear_trend`.

use rand::Rng;

/// Series of multiples of 1/8, so `8 * y` is an exact integer.
pub fn random_series(rng: &mut impl Rng) -> Vec<f64> {
    let n = rng.gen_range(2..60);
    (0..n).map(|_| rng.gen_range(-8_000i64..=8_000) as f64 / 8.0).collect()
}

/// Slope and intercept from the 2x2 normal equations, solved by Cramer's rule
/// in exact integer arithmetic and rounded only at the final quotients.
/// Every `y` must be a multiple of 1/8.
pub fn normal_equations(ys: &[f64]) -> (f64, f64) {
    let n = ys.len() as i128;
    let scaled: Vec<i128> = ys.iter().map(|y| (y * 8.0) as i128).collect();
    let sx: i128 = (1..=n).sum();
    let sxx: i128 = (1..=n).map(|x| x * x).sum();
    let sy: i128 = scaled.iter().sum();
    let sxy: i128 = scaled.iter().zip(1..=n).map(|(y, x)| x * y).sum();
    let det = n * sxx - sx * sx;
    let slope_num = n * sxy - sx * sy;
    let intercept_num = sxx * sy - sx * sxy;
    (slope_num as f64 / (8 * det) as f64, intercept_num as f64 / (8 * det) as f64)
}

pub fn sse(ys: &[f64], slope: f64, intercept: f64) -> f64 {
    ys.iter().enumerate().map(|(i, y)| (y - (slope * (i + 1) as f64 + intercept)).powi(2)).sum()
}

/// Largest magnitude in the series, never zero.
pub fn scale(ys: &[f64]) -> f64 {
    ys.iter().fold(1e-300, |m: f64, y| m.max(y.abs()))
}

/// Relative error within `tol`, measured against `scale` when the exact value is 0.
pub fn close(actual: f64, exact: f64, scale: f64, tol: f64) -> bool {
    (actual - exact).abs() <= tol * exact.abs().max(if exact == 0.0 { scale } else { 0.0 })
}
