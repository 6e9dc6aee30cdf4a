//! Augmented Dickey-Fuller unit-root test with MacKinnon (1994)
//! response-surface p-values.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::ols;
use crate::panel::is_missing;
use crate::special::std_normal_cdf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdfSpec {
    #[default]
    Constant,
    ConstantTrend,
}

impl AdfSpec {
    pub fn as_str(&self) -> &'static str {
        match self {
            AdfSpec::Constant => "c",
            AdfSpec::ConstantTrend => "ct",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LagRule {
    Fixed,
    #[default]
    Bic,
}

pub const P_VALUE_FLOOR: f64 = 0.001;
pub const P_VALUE_CEIL: f64 = 0.999;

#[derive(Debug, Clone, PartialEq)]
pub struct AdfResult {
    /// t-ratio on the lagged level.
    pub statistic: f64,
    pub p_value: f64,
    /// True when the response-surface value fell outside [0.001, 0.999].
    pub p_clamped: bool,
    pub lags_used: usize,
    pub spec: AdfSpec,
    pub n_obs: usize,
}

/// Schwert's rule `floor(12 (T/100)^{1/4})`.
pub fn schwert_max_lags(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

struct Coefs {
    max: f64,
    min: f64,
    star: f64,
    small: [f64; 3],
    large: [f64; 4],
}

// One-regressor rows of the MacKinnon (1994) tables.
const COEF_C: Coefs = Coefs {
    max: 2.74,
    min: -18.83,
    star: -1.61,
    small: [2.1659, 1.4412, 0.038269],
    large: [1.7339, 0.93202, -0.12745, -0.010368],
};
const COEF_CT: Coefs = Coefs {
    max: 0.7,
    min: -16.18,
    star: -2.89,
    small: [3.2512, 1.6047, 0.049588],
    large: [2.5261, 0.61654, -0.37956, -0.060285],
};

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * x + v)
}

/// Stationary point of the large-p cubic to the right of `star`, if any.
fn large_poly_peak(c: &[f64; 4]) -> Option<f64> {
    // d/dx: c1 + 2 c2 x + 3 c3 x^2 = 0
    let (a, b, cc) = (3.0 * c[3], 2.0 * c[2], c[1]);
    let disc = b * b - 4.0 * a * cc;
    if a == 0.0 || disc < 0.0 {
        return None;
    }
    let roots = [(-b - disc.sqrt()) / (2.0 * a), (-b + disc.sqrt()) / (2.0 * a)];
    roots
        .into_iter()
        .filter(|r| 3.0 * c[3] * 2.0 * r + 2.0 * c[2] < 0.0)
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.min(r))))
}

/// Raw response-surface p-value (unclamped) for one regressor.
pub fn mackinnon_p_raw(stat: f64, spec: AdfSpec) -> f64 {
    let c = match spec {
        AdfSpec::Constant => &COEF_C,
        AdfSpec::ConstantTrend => &COEF_CT,
    };
    if stat > c.max {
        return 1.0;
    }
    if stat < c.min {
        return 0.0;
    }
    if stat <= c.star {
        std_normal_cdf(poly(&c.small, stat))
    } else {
        // Hold the cubic at its local maximum so the map stays monotone.
        let x = match large_poly_peak(&c.large) {
            Some(peak) if peak > c.star => stat.min(peak),
            _ => stat,
        };
        std_normal_cdf(poly(&c.large, x))
    }
}

/// Clamped p-value and whether clamping applied.
pub fn mackinnon_p(stat: f64, spec: AdfSpec) -> (f64, bool) {
    let p = mackinnon_p_raw(stat, spec);
    if p < P_VALUE_FLOOR {
        (P_VALUE_FLOOR, true)
    } else if p > P_VALUE_CEIL {
        (P_VALUE_CEIL, true)
    } else {
        (p, false)
    }
}

fn design(x: &[f64], spec: AdfSpec, lags: usize, start: usize) -> (DVector<f64>, DMatrix<f64>) {
    // Rows t = start..n-1 (t indexes x); start >= lags + 1.
    let n = x.len();
    let rows = n - start;
    let k = match spec {
        AdfSpec::Constant => 2,
        AdfSpec::ConstantTrend => 3,
    } + lags;
    let mut y = DVector::zeros(rows);
    let mut z = DMatrix::zeros(rows, k);
    for (r, t) in (start..n).enumerate() {
        y[r] = x[t] - x[t - 1];
        let mut c = 0;
        z[(r, c)] = 1.0;
        c += 1;
        if spec == AdfSpec::ConstantTrend {
            z[(r, c)] = t as f64;
            c += 1;
        }
        z[(r, c)] = x[t - 1];
        c += 1;
        for i in 1..=lags {
            z[(r, c)] = x[t - i] - x[t - i - 1];
            c += 1;
        }
    }
    (y, z)
}

fn level_index(spec: AdfSpec) -> usize {
    match spec {
        AdfSpec::Constant => 1,
        AdfSpec::ConstantTrend => 2,
    }
}

/// Run the ADF regression `dx_t = a (+ b t) + g x_{t-1} + sum phi_i dx_{t-i} + e_t`.
///
/// With [`LagRule::Bic`] every order up to `max_lags` is fitted on a common
/// sample and the BIC minimiser is refitted on its own full sample.
pub fn adf_test(
    series: &[f64],
    spec: AdfSpec,
    max_lags: Option<usize>,
    lag_rule: LagRule,
) -> Result<AdfResult> {
    let first = series.iter().position(|v| !is_missing(*v));
    let last = series.iter().rposition(|v| !is_missing(*v));
    let x = match (first, last) {
        (Some(a), Some(b)) => &series[a..=b],
        _ => return Err(Error::InvalidInput("ADF on an all-missing series".into())),
    };
    if x.iter().any(|v| is_missing(*v)) {
        return Err(Error::MissingValues("ADF series interior".into()));
    }
    let max_lags = max_lags.unwrap_or_else(|| schwert_max_lags(x.len()));
    if x.len() < max_lags + 10 {
        return Err(Error::InvalidInput(format!(
            "ADF needs at least {} observations, got {}",
            max_lags + 10,
            x.len()
        )));
    }
    let lags = match lag_rule {
        LagRule::Fixed => max_lags,
        LagRule::Bic => {
            let start = max_lags + 1;
            let mut best = (f64::INFINITY, 0usize);
            for p in 0..=max_lags {
                let (y, z) = design(x, spec, p, start);
                let fit = ols(&y, &z)?;
                let n = y.len() as f64;
                let bic = n * (fit.rss / n).ln() + z.ncols() as f64 * n.ln();
                if bic < best.0 {
                    best = (bic, p);
                }
            }
            best.1
        }
    };
    let (y, z) = design(x, spec, lags, lags + 1);
    let fit = ols(&y, &z)?;
    let j = level_index(spec);
    let statistic = fit.beta[j] / fit.std_errors[j];
    if !statistic.is_finite() {
        return Err(Error::Numeric("ADF statistic is not finite".into()));
    }
    let (p_value, p_clamped) = mackinnon_p(statistic, spec);
    Ok(AdfResult {
        statistic,
        p_value,
        p_clamped,
        lags_used: lags,
        spec,
        n_obs: y.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    #[test]
    fn alternating_series_matches_hand_ols() {
        let x = [1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0];
        let res = adf_test(&x, AdfSpec::Constant, Some(0), LagRule::Fixed).unwrap();
        // Simple regression of dx_t on x_{t-1}, t = 1..9.
        let xs: Vec<f64> = x[..9].to_vec();
        let ys: Vec<f64> = (1..10).map(|t| x[t] - x[t - 1]).collect();
        let n = 9.0;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|v| (v - mx).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum();
        let slope = sxy / sxx;
        let icpt = my - slope * mx;
        let rss: f64 = xs.iter().zip(&ys).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
        let se = (rss / (n - 2.0) / sxx).sqrt();
        // Perfect fit here: dx = 3 - 2 x, so use the limiting behaviour.
        if se == 0.0 {
            assert!(res.statistic.is_infinite() || res.statistic.abs() > 1e6);
        } else {
            assert!((res.statistic - slope / se).abs() < 1e-8);
        }
        assert_eq!(res.lags_used, 0);
    }

    #[test]
    fn hand_ols_on_noisy_short_series() {
        let x = [1.0, 2.1, 0.9, 2.3, 1.2, 1.8, 0.7, 2.2, 1.1, 1.9];
        let res = adf_test(&x, AdfSpec::Constant, Some(0), LagRule::Fixed).unwrap();
        let xs: Vec<f64> = x[..9].to_vec();
        let ys: Vec<f64> = (1..10).map(|t| x[t] - x[t - 1]).collect();
        let n = 9.0;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|v| (v - mx).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum();
        let slope = sxy / sxx;
        let icpt = my - slope * mx;
        let rss: f64 = xs.iter().zip(&ys).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
        let se = (rss / (n - 2.0) / sxx).sqrt();
        assert!((res.statistic - slope / se).abs() < 1e-8);
    }

    #[test]
    fn white_noise_rejects_and_random_walk_does_not() {
        let (mut rejected, mut kept) = (0, 0);
        for rep in 0..200u64 {
            let mut g = rng::seeded_stream(2024, rep);
            let noise: Vec<f64> = (0..500).map(|_| rng::std_normal(&mut g)).collect();
            let walk: Vec<f64> = noise
                .iter()
                .scan(0.0, |s, e| {
                    *s += e;
                    Some(*s)
                })
                .collect();
            if adf_test(&noise, AdfSpec::Constant, None, LagRule::Bic).unwrap().p_value < 0.05 {
                rejected += 1;
            }
            let mut g2 = rng::seeded_stream(4048, rep);
            let walk2: Vec<f64> = walk.iter().map(|w| w + 0.0 * rng::std_normal(&mut g2)).collect();
            if adf_test(&walk2, AdfSpec::Constant, None, LagRule::Bic).unwrap().p_value > 0.05 {
                kept += 1;
            }
        }
        assert!(rejected >= 190, "white noise rejected in {rejected}/200");
        assert!(kept >= 180, "random walk kept in {kept}/200");
    }

    #[test]
    fn known_critical_points() {
        // 5% critical values of the asymptotic distribution.
        assert!((mackinnon_p_raw(-2.8621, AdfSpec::Constant) - 0.05).abs() < 0.003);
        assert!((mackinnon_p_raw(-3.4126, AdfSpec::ConstantTrend) - 0.05).abs() < 0.003);
        assert_eq!(mackinnon_p(-30.0, AdfSpec::Constant), (P_VALUE_FLOOR, true));
        assert_eq!(mackinnon_p(5.0, AdfSpec::Constant), (P_VALUE_CEIL, true));
    }

    #[test]
    fn missing_interior_and_short_series_error() {
        let mut x: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        x[20] = f64::NAN;
        assert!(adf_test(&x, AdfSpec::Constant, Some(2), LagRule::Fixed).is_err());
        assert!(adf_test(&[1.0, 2.0, 3.0], AdfSpec::Constant, Some(0), LagRule::Fixed).is_err());
    }

    proptest! {
        #[test]
        fn p_value_monotone_in_statistic(a in -25.0..5.0f64, b in -25.0..5.0f64, ct in any::<bool>()) {
            let spec = if ct { AdfSpec::ConstantTrend } else { AdfSpec::Constant };
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(mackinnon_p(lo, spec).0 <= mackinnon_p(hi, spec).0);
            let p = mackinnon_p(a, spec).0;
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}
