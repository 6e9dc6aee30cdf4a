use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::panel::is_missing;

pub const DEFAULT_CMAX_WINDOW: usize = 60;

/// CMAX drawdown series.
#[derive(Debug, Clone, PartialEq)]
pub struct CmaxOutput {
    pub values: Vec<f64>,
    /// Leading observations whose window was shorter than `W`.
    pub truncated: usize,
}

/// `1 - x_t / max(x_{t-j}, j = 0..W-1)`, with the window truncated at the
/// start of the sample. Missing inputs give missing outputs and are skipped
/// when taking the window maximum.
pub fn cmax(series: &[f64], window: usize) -> Result<CmaxOutput> {
    if window == 0 {
        return Err(Error::InvalidInput("CMAX window must be at least 1".into()));
    }
    if let Some(i) = series.iter().position(|v| !is_missing(*v) && *v <= 0.0) {
        return Err(Error::InvalidInput(format!(
            "CMAX needs strictly positive values; got {} at index {i}",
            series[i]
        )));
    }
    // Monotone deque of indices with decreasing values.
    let mut deque: VecDeque<usize> = VecDeque::new();
    let mut out = Vec::with_capacity(series.len());
    for (t, &x) in series.iter().enumerate() {
        while let Some(&front) = deque.front() {
            if front + window <= t {
                deque.pop_front();
            } else {
                break;
            }
        }
        if !is_missing(x) {
            while let Some(&back) = deque.back() {
                if series[back] <= x {
                    deque.pop_back();
                } else {
                    break;
                }
            }
            deque.push_back(t);
            let max = series[*deque.front().expect("non-empty after push")];
            out.push(1.0 - x / max);
        } else {
            out.push(f64::NAN);
        }
    }
    Ok(CmaxOutput {
        values: out,
        truncated: series.len().min(window - 1),
    })
}
