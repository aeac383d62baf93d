use serde::Serialize;

use crate::error::{Error, Result};

pub const GRONWALL_MIN_POINTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GronwallFit {
    /// Fitted exponential rate `Ĉ`.
    pub rate: f64,
    pub initial: f64,
    pub tolerance: f64,
    /// Largest `y(t) / (y(0) e^{Ĉt}) − 1` over the series.
    pub max_excess: f64,
    /// Some point exceeds `y(0) e^{Ĉt} (1 + tolerance)`.
    pub violated: bool,
    pub points: usize,
}

/// Exponential rate of the running maximum of `series`, fitted by least
/// squares of `ln(max_{s≤t} y(s) / y(0))` against `t` through the origin.
pub fn gronwall_fit(series: &[f64], times: &[f64], tolerance: f64) -> Result<GronwallFit> {
    if series.len() != times.len() {
        return Err(Error::InsufficientData(format!(
            "{} values for {} times",
            series.len(),
            times.len()
        )));
    }
    if series.len() < GRONWALL_MIN_POINTS {
        return Err(Error::InsufficientData(format!(
            "Gronwall fit needs at least {GRONWALL_MIN_POINTS} snapshots, got {}",
            series.len()
        )));
    }
    if series.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InsufficientData("Gronwall series must be finite and nonnegative".into()));
    }
    let y0 = series[0];
    let t0 = times[0];
    if y0 == 0.0 {
        // identical data: any later growth has no finite rate
        let grows = series.iter().any(|v| *v > 0.0);
        return Ok(GronwallFit {
            rate: 0.0,
            initial: 0.0,
            tolerance,
            max_excess: if grows { f64::INFINITY } else { 0.0 },
            violated: grows,
            points: series.len(),
        });
    }
    let mut envelope = y0;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (&y, &t) in series.iter().zip(times) {
        envelope = envelope.max(y);
        let s = t - t0;
        sxy += s * (envelope / y0).ln();
        sxx += s * s;
    }
    let rate = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let max_excess = series
        .iter()
        .zip(times)
        .map(|(&y, &t)| y / (y0 * (rate * (t - t0)).exp()) - 1.0)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GronwallFit {
        rate,
        initial: y0,
        tolerance,
        max_excess,
        violated: max_excess > tolerance,
        points: series.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn times() -> Vec<f64> {
        (0..20).map(|k| k as f64 * 0.05).collect()
    }

    #[test]
    fn exponential_rate_recovered() {
        let t = times();
        let y: Vec<f64> = t.iter().map(|t| 2.0 * (3.0 * t).exp()).collect();
        let f = gronwall_fit(&y, &t, 0.05).unwrap();
        assert!((f.rate - 3.0).abs() < 1e-12);
        assert!(!f.violated);
    }

    #[test]
    fn constant_series_has_zero_rate() {
        let t = times();
        let f = gronwall_fit(&vec![0.4; 20], &t, 0.05).unwrap();
        assert_eq!(f.rate, 0.0);
        assert!(!f.violated);
    }

    #[test]
    fn zero_series_from_identical_data() {
        let f = gronwall_fit(&[0.0; 20], &times(), 0.05).unwrap();
        assert_eq!(f.initial, 0.0);
        assert!(!f.violated);
    }

    #[test]
    fn late_burst_is_flagged() {
        let t = times();
        let mut y = vec![1.0; 20];
        y[19] = 50.0;
        let f = gronwall_fit(&y, &t, 0.05).unwrap();
        assert!(f.violated);
    }

    #[test]
    fn short_series_rejected() {
        assert!(matches!(gronwall_fit(&[1.0; 5], &[0.0; 5], 0.05), Err(Error::InsufficientData(_))));
    }
}
