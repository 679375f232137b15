//! Coherence-time estimators and the collisional scaling law.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Decay time from two contrasts assuming `A(T) = A0 exp(-T / tau)`.
pub fn coherence_time_from_two_contrasts(a1: f64, t1: f64, a2: f64, t2: f64) -> Result<f64> {
    if !(a1 > 0.0 && a2 > 0.0) {
        return Err(Error::invalid(format!("contrasts must be > 0, got {a1} and {a2}")));
    }
    if t1 == t2 {
        return Err(Error::invalid("the two durations must differ"));
    }
    if a1 == a2 {
        return Err(Error::invalid("equal contrasts: no measurable decay (infinite coherence time)"));
    }
    Ok((t2 - t1) / (a1 / a2).ln())
}

/// Default margin for the `Omega / pi >> Gamma_col` validity condition.
pub const DEFAULT_REGIME_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherencePrediction {
    pub tau_c: f64,
    /// False when `rabi / pi < regime_factor * gamma_col`.
    pub in_regime: bool,
}

/// `tau_c = rabi / (pi * gamma0 * gamma_col)` for a continuous echo drive.
pub fn predict_coherence_time(gamma0: f64, gamma_col: f64, rabi: f64) -> Result<CoherencePrediction> {
    predict_coherence_time_with(gamma0, gamma_col, rabi, DEFAULT_REGIME_FACTOR)
}

pub fn predict_coherence_time_with(
    gamma0: f64,
    gamma_col: f64,
    rabi: f64,
    regime_factor: f64,
) -> Result<CoherencePrediction> {
    if !(gamma0 > 0.0 && gamma_col > 0.0 && rabi > 0.0) {
        return Err(Error::invalid(format!(
            "gamma0, gamma_col and rabi must be > 0 (got {gamma0}, {gamma_col}, {rabi})"
        )));
    }
    Ok(CoherencePrediction {
        tau_c: rabi / (PI * gamma0 * gamma_col),
        in_regime: rabi / PI >= regime_factor * gamma_col,
    })
}

/// First time a decaying curve falls to `1/e` of its first value, linearly
/// interpolated. `None` if it never does.
pub fn one_over_e_time(times: &[f64], values: &[f64]) -> Option<f64> {
    let level = values.first()? * (-1.0f64).exp();
    for i in 1..values.len().min(times.len()) {
        if values[i] <= level {
            let (y0, y1) = (values[i - 1], values[i]);
            let f = if y0 == y1 { 0.0 } else { (y0 - level) / (y0 - y1) };
            return Some(times[i - 1] + f * (times[i] - times[i - 1]));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contrast_pair() {
        let tau = coherence_time_from_two_contrasts(0.24, 5e-3, 0.11, 50e-3).unwrap();
        assert!((tau - 57.68e-3).abs() < 0.01e-3, "{tau}");
        let d = coherence_time_from_two_contrasts(0.8, 2.0, 0.8 / std::f64::consts::E, 5.0).unwrap();
        assert!((d - 3.0).abs() < 1e-12);
        assert!(coherence_time_from_two_contrasts(0.2, 10e-3, 0.2, 30e-3).is_err());
        assert!(coherence_time_from_two_contrasts(0.0, 10e-3, 0.2, 30e-3).is_err());
        assert!(coherence_time_from_two_contrasts(-0.1, 10e-3, 0.2, 30e-3).is_err());
    }

    #[test]
    fn swapping_pairs_is_symmetric() {
        let a = coherence_time_from_two_contrasts(0.5, 1.0, 0.2, 3.0).unwrap();
        let b = coherence_time_from_two_contrasts(0.2, 3.0, 0.5, 1.0).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn scaling_law_values() {
        let rabi = std::f64::consts::TAU * 4333.0;
        let p = predict_coherence_time(1.0 / 7.7e-3, 175.0, rabi).unwrap();
        assert!((p.tau_c - 0.381).abs() < 0.001, "{}", p.tau_c);
        assert!(p.in_regime);
        let p2 = predict_coherence_time(1.0 / 7.7e-3, 175.0, 2.0 * rabi).unwrap();
        assert!((p2.tau_c - 2.0 * p.tau_c).abs() < 1e-15);
        let edge = predict_coherence_time(100.0, 175.0, PI * 175.0).unwrap();
        assert!(!edge.in_regime);
        assert!(predict_coherence_time(0.0, 1.0, 1.0).is_err());
        assert!(predict_coherence_time(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn one_over_e_crossing() {
        let t: Vec<f64> = (0..100).map(|i| i as f64 * 0.01).collect();
        let y: Vec<f64> = t.iter().map(|t| (-t / 0.3f64).exp()).collect();
        let tau = one_over_e_time(&t, &y).unwrap();
        assert!((tau - 0.3).abs() < 1e-3);
        assert!(one_over_e_time(&t, &vec![1.0; 100]).is_none());
    }
}
