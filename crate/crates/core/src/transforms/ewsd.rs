use crate::error::{Error, Result};
use crate::panel::is_missing;

pub const DEFAULT_DECAY: f64 = 0.94;
pub const DEFAULT_BURN_IN: usize = 20;
/// Oldest log change kept in the weighted sums; 0.94^300 is below 1e-8.
pub const DEFAULT_LOOKBACK: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EwsdConfig {
    pub decay: f64,
    pub burn_in: usize,
    pub lookback: usize,
}

impl Default for EwsdConfig {
    fn default() -> Self {
        Self {
            decay: DEFAULT_DECAY,
            burn_in: DEFAULT_BURN_IN,
            lookback: DEFAULT_LOOKBACK,
        }
    }
}

/// Log changes aligned with the price index; entry 0 is missing.
pub fn log_changes(prices: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = prices.iter().position(|v| !is_missing(*v) && *v <= 0.0) {
        return Err(Error::InvalidInput(format!(
            "EWSD needs strictly positive prices; got {} at index {i}",
            prices[i]
        )));
    }
    let mut out = vec![f64::NAN; prices.len()];
    for t in 1..prices.len() {
        out[t] = (prices[t] / prices[t - 1]).ln();
    }
    Ok(out)
}

/// Exponentially weighted standard deviation of daily log changes with
/// weights `decay^(t-s)`, using the reliability-weighted variance
/// denominator `sum(w) - sum(w^2)/sum(w)`.
///
/// Evaluated in O(T) with running weighted sums. Positions before the
/// burn-in, or whose price is missing, are missing.
pub fn ewsd(prices: &[f64], decay: f64) -> Result<Vec<f64>> {
    ewsd_with(prices, &EwsdConfig { decay, ..Default::default() })
}

pub fn ewsd_with(prices: &[f64], cfg: &EwsdConfig) -> Result<Vec<f64>> {
    if !(cfg.decay > 0.0 && cfg.decay < 1.0) {
        return Err(Error::InvalidInput(format!("decay {} outside (0,1)", cfg.decay)));
    }
    if cfg.lookback == 0 {
        return Err(Error::InvalidInput("EWSD lookback must be positive".into()));
    }
    let r = log_changes(prices)?;
    let lam = cfg.decay;
    let lam_l = lam.powi(cfg.lookback as i32);
    let lam_2l = lam_l * lam_l;
    let (mut s0, mut s1, mut s2, mut sw2) = (0.0, 0.0, 0.0, 0.0);
    let mut out = vec![f64::NAN; prices.len()];
    for t in 1..prices.len() {
        s0 *= lam;
        s1 *= lam;
        s2 *= lam;
        sw2 *= lam * lam;
        if !is_missing(r[t]) {
            s0 += 1.0;
            s1 += r[t];
            s2 += r[t] * r[t];
            sw2 += 1.0;
        }
        if t > cfg.lookback {
            let old = r[t - cfg.lookback];
            if !is_missing(old) {
                s0 -= lam_l;
                s1 -= lam_l * old;
                s2 -= lam_l * old * old;
                sw2 -= lam_2l;
            }
        }
        if t < cfg.burn_in || is_missing(prices[t]) || s0 <= 0.0 {
            continue;
        }
        let num = (s2 - s1 * s1 / s0).max(0.0);
        let den = s0 - sw2 / s0;
        if den > 0.0 {
            out[t] = (num / den).sqrt();
        }
    }
    Ok(out)
}
