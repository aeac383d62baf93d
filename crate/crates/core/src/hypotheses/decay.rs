use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub first: f64,
    pub last: f64,
    pub trend_pass: bool,
}

pub const MIN_SHELLS: usize = 4;
pub const SLOPE_THRESHOLD: f64 = -0.1;

/// Least-squares slope of `ln ratio` against `ln |U|`. Trend-pass iff the
/// slope is below −0.1 and the last shell sits below the first.
pub fn fit_decay(samples: &[(f64, f64)]) -> Result<DecayFit> {
    if samples.len() < MIN_SHELLS {
        return Err(Error::InsufficientData(format!(
            "decay fit needs at least {MIN_SHELLS} shells, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|&(r, v)| !(r > 0.0) || !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InsufficientData("decay fit needs positive radii and ratios".into()));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let (slope, intercept) = least_squares(&xs, &ys);
    let first = samples[0].1;
    let last = samples[samples.len() - 1].1;
    Ok(DecayFit {
        slope,
        intercept,
        first,
        last,
        trend_pass: slope < SLOPE_THRESHOLD && last < first,
    })
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}
