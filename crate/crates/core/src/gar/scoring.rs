use chrono::NaiveDate;

use super::qr::QuantileFit;
use crate::error::{Error, Result};

/// `{0.05, 0.10, ..., 0.95}`.
pub fn default_tau_grid() -> Vec<f64> {
    (1..=19).map(|k| k as f64 / 20.0).collect()
}

pub fn check_tau_grid(taus: &[f64]) -> Result<()> {
    if taus.is_empty() {
        return Err(Error::Config("empty quantile grid".into()));
    }
    if taus.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(Error::Config("quantile levels must lie in (0, 1)".into()));
    }
    if taus.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("quantile grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Quantiles of one predictive distribution on a fixed grid of levels.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityForecast {
    taus: Vec<f64>,
    quantiles: Vec<f64>,
    pub origin: Option<NaiveDate>,
    pub horizon: usize,
}

impl DensityForecast {
    /// Validates the grid and sorts the quantiles (monotone rearrangement).
    pub fn new(
        taus: Vec<f64>,
        mut quantiles: Vec<f64>,
        origin: Option<NaiveDate>,
        horizon: usize,
    ) -> Result<Self> {
        check_tau_grid(&taus)?;
        if quantiles.len() != taus.len() {
            return Err(Error::InvalidInput(format!(
                "{} quantiles for {} levels",
                quantiles.len(),
                taus.len()
            )));
        }
        if quantiles.iter().any(|q| !q.is_finite()) {
            return Err(Error::Numeric("non-finite forecast quantile".into()));
        }
        quantiles.sort_by(f64::total_cmp);
        Ok(DensityForecast {
            taus,
            quantiles,
            origin,
            horizon,
        })
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn quantiles(&self) -> &[f64] {
        &self.quantiles
    }
}

/// `2 (1{y < q} - tau) (q - y)`, never negative.
pub fn quantile_score(y: f64, q: f64, tau: f64) -> f64 {
    let ind = if y < q { 1.0 } else { 0.0 };
    2.0 * (ind - tau) * (q - y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScoreWeight {
    Uniform,
    /// `tau (1 - tau)`.
    Centre,
    /// `(1 - tau)^2`.
    Left,
}

impl ScoreWeight {
    pub const ALL: [ScoreWeight; 3] = [ScoreWeight::Uniform, ScoreWeight::Centre, ScoreWeight::Left];

    pub fn weight(self, tau: f64) -> f64 {
        match self {
            ScoreWeight::Uniform => 1.0,
            ScoreWeight::Centre => tau * (1.0 - tau),
            ScoreWeight::Left => (1.0 - tau).powi(2),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ScoreWeight::Uniform => "w_uniform",
            ScoreWeight::Centre => "w_centre",
            ScoreWeight::Left => "w_left",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" | "w_uniform" => Ok(ScoreWeight::Uniform),
            "centre" | "center" | "w_centre" => Ok(ScoreWeight::Centre),
            "left" | "w_left" => Ok(ScoreWeight::Left),
            other => Err(Error::Config(format!("unknown score weight '{other}'"))),
        }
    }
}

/// Width of the cell around each grid point: half the distance between its
/// neighbours, the one-sided spacing at the ends, and 1 for a single point.
pub fn tau_cell_widths(taus: &[f64]) -> Vec<f64> {
    let k = taus.len();
    if k == 1 {
        return vec![1.0];
    }
    (0..k)
        .map(|i| {
            if i == 0 {
                taus[1] - taus[0]
            } else if i == k - 1 {
                taus[k - 1] - taus[k - 2]
            } else {
                (taus[i + 1] - taus[i - 1]) / 2.0
            }
        })
        .collect()
}

/// Quantile-weighted CRPS as a Riemann sum over the forecast grid.
pub fn qwcrps(forecast: &DensityForecast, y: f64, weight: ScoreWeight) -> f64 {
    let widths = tau_cell_widths(&forecast.taus);
    forecast
        .taus
        .iter()
        .zip(&forecast.quantiles)
        .zip(&widths)
        .map(|((tau, q), dt)| weight.weight(*tau) * quantile_score(y, *q, *tau) * dt)
        .sum()
}

/// Grid-averaged quantile AIC and BIC.
pub fn quantile_ic(fits: &[QuantileFit]) -> Result<(f64, f64)> {
    let Some(first) = fits.first() else {
        return Err(Error::InvalidInput("no quantile fits".into()));
    };
    let (n, p) = (first.n, first.p);
    let mut aic = 0.0;
    let mut bic = 0.0;
    for f in fits {
        if f.n != n || f.p != p {
            return Err(Error::InvalidInput("quantile fits differ in n or p".into()));
        }
        let mean_loss = f.loss / n as f64;
        if !(mean_loss > 0.0) {
            return Err(Error::Numeric(format!(
                "zero pinball loss at tau = {} (exact interpolation)",
                f.tau
            )));
        }
        let base = 2.0 * n as f64 * mean_loss.ln();
        aic += base + 2.0 * p as f64;
        bic += base + p as f64 * (n as f64).ln();
    }
    let k = fits.len() as f64;
    Ok((aic / k, bic / k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn fit(n: usize, p: usize, mean_loss: f64) -> QuantileFit {
        QuantileFit {
            tau: 0.5,
            coefficients: DVector::zeros(p),
            loss: mean_loss * n as f64,
            n,
            p,
        }
    }

    #[test]
    fn score_examples() {
        assert!((quantile_score(1.0, 0.0, 0.9) - 1.8).abs() < 1e-15);
        assert!((quantile_score(0.0, 1.0, 0.9) - 0.2).abs() < 1e-15);
        assert_eq!(quantile_score(2.5, 2.5, 0.3), 0.0);
    }

    #[test]
    fn single_point_grid_and_perfect_forecast() {
        let f = DensityForecast::new(vec![0.5], vec![1.0], None, 1).unwrap();
        assert!((qwcrps(&f, 3.0, ScoreWeight::Uniform) - quantile_score(3.0, 1.0, 0.5)).abs() < 1e-15);
        let g = DensityForecast::new(default_tau_grid(), vec![0.7; 19], None, 1).unwrap();
        for w in ScoreWeight::ALL {
            assert_eq!(qwcrps(&g, 0.7, w), 0.0);
        }
    }

    #[test]
    fn unsorted_grid_is_rejected_and_quantiles_are_rearranged() {
        assert!(DensityForecast::new(vec![0.5, 0.1], vec![0.0, 1.0], None, 1).is_err());
        assert!(DensityForecast::new(vec![0.1, 0.1], vec![0.0, 1.0], None, 1).is_err());
        let f = DensityForecast::new(vec![0.1, 0.5, 0.9], vec![2.0, 1.0, 3.0], None, 1).unwrap();
        assert_eq!(f.quantiles(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn uniform_weight_is_spacing_times_sum() {
        let taus = default_tau_grid();
        let qs: Vec<f64> = taus.iter().map(|t| (t - 0.5) * 3.0).collect();
        let f = DensityForecast::new(taus.clone(), qs.clone(), None, 1).unwrap();
        let y = -0.4;
        let direct: f64 = taus.iter().zip(&qs).map(|(t, q)| quantile_score(y, *q, *t)).sum::<f64>() * 0.05;
        assert!((qwcrps(&f, y, ScoreWeight::Uniform) - direct).abs() < 1e-12);
        let shifted = DensityForecast::new(taus, qs.iter().map(|q| q + 10.0).collect(), None, 1).unwrap();
        for w in ScoreWeight::ALL {
            assert!((qwcrps(&f, y, w) - qwcrps(&shifted, y + 10.0, w)).abs() < 1e-10);
        }
    }

    #[test]
    fn information_criteria_examples() {
        let (aic, bic) = quantile_ic(&[fit(100, 2, 1.0), fit(100, 2, 1.0)]).unwrap();
        assert!((aic - 4.0).abs() < 1e-12);
        assert!((bic - 2.0 * 100f64.ln()).abs() < 1e-12);
        let (aic4, _) = quantile_ic(&[fit(100, 4, 1.0)]).unwrap();
        assert!((aic4 - aic - 4.0).abs() < 1e-12);
        let (aic_big, _) = quantile_ic(&[fit(100, 2, 1.5)]).unwrap();
        assert!(aic_big > aic);
        assert!(quantile_ic(&[fit(100, 2, 0.0)]).is_err());
        assert!(quantile_ic(&[fit(100, 2, 1.0), fit(90, 2, 1.0)]).is_err());
    }

    #[test]
    fn weight_labels_round_trip() {
        for w in ScoreWeight::ALL {
            assert_eq!(ScoreWeight::parse(w.label()).unwrap(), w);
        }
        assert!(ScoreWeight::parse("right").is_err());
    }
}
