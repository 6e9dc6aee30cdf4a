use super::scoring::DensityForecast;
use crate::error::{Error, Result};

/// Forecast CDF at `y`.
///
/// Inside the grid the CDF is the piecewise-linear inverse of the quantile
/// function. Beyond the outer quantiles it decays exponentially, matching
/// the level and the slope of the outermost non-flat segment.
pub fn pit(forecast: &DensityForecast, y: f64) -> f64 {
    let taus = forecast.taus();
    let q = forecast.quantiles();
    let k = q.len();
    let (lo, hi) = (q[0], q[k - 1]);
    if lo == hi {
        return if y < lo {
            0.0
        } else if y > hi {
            1.0
        } else {
            0.5
        };
    }
    let value = if y < lo {
        let j = q.iter().position(|v| *v > lo).unwrap_or(k - 1);
        let slope = (taus[j] - taus[0]) / (q[j] - lo);
        taus[0] * (slope * (y - lo) / taus[0]).exp()
    } else if y > hi {
        let j = q.iter().rposition(|v| *v < hi).unwrap_or(0);
        let slope = (taus[k - 1] - taus[j]) / (hi - q[j]);
        let upper = 1.0 - taus[k - 1];
        1.0 - upper * (-slope * (y - hi) / upper).exp()
    } else {
        let first_ge = q.partition_point(|v| *v < y);
        if q[first_ge] == y {
            let last_eq = q.partition_point(|v| *v <= y) - 1;
            (taus[first_ge] + taus[last_eq]) / 2.0
        } else {
            let i = first_ge - 1;
            let w = (y - q[i]) / (q[i + 1] - q[i]);
            taus[i] + w * (taus[i + 1] - taus[i])
        }
    };
    value.clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov check of PIT values against U(0, 1) with
/// the asymptotic 5% critical value `1.36 / sqrt(n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub critical: f64,
    pub n: usize,
    pub passes: bool,
}

pub const KS_COEF_5PCT: f64 = 1.36;

pub fn ks_uniform(pits: &[f64]) -> Result<KsResult> {
    if pits.is_empty() {
        return Err(Error::InvalidInput("no PIT values".into()));
    }
    if pits.iter().any(|u| !(0.0..=1.0).contains(u)) {
        return Err(Error::InvalidInput("PIT values must lie in [0, 1]".into()));
    }
    let mut u = pits.to_vec();
    u.sort_by(f64::total_cmp);
    let n = u.len();
    let nf = n as f64;
    let statistic = u
        .iter()
        .enumerate()
        .map(|(i, v)| ((i + 1) as f64 / nf - v).max(v - i as f64 / nf))
        .fold(0.0f64, f64::max);
    let critical = KS_COEF_5PCT / nf.sqrt();
    Ok(KsResult {
        statistic,
        critical,
        n,
        passes: statistic <= critical,
    })
}
