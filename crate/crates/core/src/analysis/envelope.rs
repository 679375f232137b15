//! Sliding-window standard deviation of an oscillating signal.
//!
//! The standard deviation over a window of successive samples tracks the
//! oscillation amplitude while ignoring slow offsets and the carrier phase.
//! It uses the population (1/n) normalization, so a window covering whole
//! periods of `A sin(wt)` returns exactly `A / sqrt(2)`.

use crate::error::{Error, Result};
use crate::simulator::TimeSeries;

pub const DEFAULT_WINDOW: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    /// Window centers (mean of the window's sample times).
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub window: usize,
}

pub fn rolling_std(times: &[f64], values: &[f64], window: usize) -> Result<Envelope> {
    if times.len() != values.len() {
        return Err(Error::invalid("times and values differ in length"));
    }
    if window < 2 || window > values.len() {
        return Err(Error::invalid(format!("window must lie in [2, {}], got {window}", values.len())));
    }
    let n_out = values.len() - window + 1;
    let w = window as f64;
    let mut out_t = Vec::with_capacity(n_out);
    let mut out_v = Vec::with_capacity(n_out);
    for start in 0..n_out {
        let ys = &values[start..start + window];
        let mean = ys.iter().sum::<f64>() / w;
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / w;
        out_v.push(var.sqrt());
        out_t.push(times[start..start + window].iter().sum::<f64>() / w);
    }
    Ok(Envelope { times: out_t, values: out_v, window })
}

/// Envelope of the upper-state population of a series.
pub fn rolling_std_envelope(series: &TimeSeries, window: usize) -> Result<Envelope> {
    rolling_std(&series.times, &series.p2, window)
}
