use nalgebra::{DMatrix, DVector};

use super::{is_missing, TimeSeriesPanel, MISSING};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StandardizeWindow {
    #[default]
    FullSample,
    /// Row `t` is scaled with moments of rows `0..=t`; rows with fewer than
    /// `min_obs` observations are left missing.
    Expanding { min_obs: usize },
}

/// Moments needed to undo [`standardize`].
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizationRecord {
    pub names: Vec<String>,
    /// Full-window (or final expanding-window) mean per series.
    pub mean: DVector<f64>,
    /// Full-window (or final expanding-window) sample standard deviation.
    pub sd: DVector<f64>,
    pub window: StandardizeWindow,
    /// Per-row moments for the expanding window.
    pub expanding: Option<(DMatrix<f64>, DMatrix<f64>)>,
}

fn moments(values: impl Iterator<Item = f64>) -> (usize, f64, f64, f64) {
    let obs: Vec<f64> = values.filter(|v| !is_missing(*v)).collect();
    let n = obs.len();
    if n == 0 {
        return (0, MISSING, MISSING, 0.0);
    }
    let mean = obs.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        obs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let scale = obs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    (n, mean, var.sqrt(), scale)
}

fn degenerate(sd: f64, scale: f64) -> bool {
    !(sd > 1e-14 * scale) || sd == 0.0
}

/// Scale each series to zero mean and unit sample variance.
pub fn standardize(
    panel: &TimeSeriesPanel,
    window: StandardizeWindow,
) -> Result<(TimeSeriesPanel, StandardizationRecord)> {
    let (t_len, m) = (panel.n_obs(), panel.n_series());
    let mut mean = DVector::zeros(m);
    let mut sd = DVector::zeros(m);
    for j in 0..m {
        let (n, mu, s, scale) = moments(panel.values().column(j).iter().copied());
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "series '{}' has fewer than 2 observations",
                panel.names()[j]
            )));
        }
        if degenerate(s, scale) {
            return Err(Error::ZeroVariance(panel.names()[j].clone()));
        }
        mean[j] = mu;
        sd[j] = s;
    }
    let (values, expanding) = match window {
        StandardizeWindow::FullSample => (
            DMatrix::from_fn(t_len, m, |i, j| (panel.values()[(i, j)] - mean[j]) / sd[j]),
            None,
        ),
        StandardizeWindow::Expanding { min_obs } => {
            let min_obs = min_obs.max(2);
            let mut mu_path = DMatrix::from_element(t_len, m, MISSING);
            let mut sd_path = DMatrix::from_element(t_len, m, MISSING);
            let mut out = DMatrix::from_element(t_len, m, MISSING);
            for j in 0..m {
                // Welford running moments over observed cells.
                let (mut n, mut mu, mut m2, mut scale) = (0usize, 0.0, 0.0, 0.0f64);
                for i in 0..t_len {
                    let x = panel.values()[(i, j)];
                    if !is_missing(x) {
                        n += 1;
                        let delta = x - mu;
                        mu += delta / n as f64;
                        m2 += delta * (x - mu);
                        scale = scale.max(x.abs());
                    }
                    if n >= min_obs {
                        let s = (m2 / (n - 1) as f64).sqrt();
                        if !degenerate(s, scale) {
                            mu_path[(i, j)] = mu;
                            sd_path[(i, j)] = s;
                            if !is_missing(x) {
                                out[(i, j)] = (x - mu) / s;
                            }
                        }
                    }
                }
            }
            (out, Some((mu_path, sd_path)))
        }
    };
    let record = StandardizationRecord {
        names: panel.names().to_vec(),
        mean,
        sd,
        window,
        expanding,
    };
    Ok((panel.with_values(values)?, record))
}

/// Invert [`standardize`].
pub fn destandardize(
    panel: &TimeSeriesPanel,
    record: &StandardizationRecord,
) -> Result<TimeSeriesPanel> {
    if panel.n_series() != record.mean.len() {
        return Err(Error::InvalidInput("record does not match panel width".into()));
    }
    let values = match &record.expanding {
        None => DMatrix::from_fn(panel.n_obs(), panel.n_series(), |i, j| {
            panel.values()[(i, j)] * record.sd[j] + record.mean[j]
        }),
        Some((mu, sd)) => {
            if mu.nrows() != panel.n_obs() {
                return Err(Error::InvalidInput("record does not match panel length".into()));
            }
            DMatrix::from_fn(panel.n_obs(), panel.n_series(), |i, j| {
                panel.values()[(i, j)] * sd[(i, j)] + mu[(i, j)]
            })
        }
    };
    panel.with_values(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::Frequency;
    use crate::rng;
    use chrono::NaiveDate;

    fn panel(cols: usize, vals: Vec<f64>) -> TimeSeriesPanel {
        let n = vals.len() / cols;
        let start = NaiveDate::from_ymd_opt(2001, 1, 1).unwrap();
        TimeSeriesPanel::new(
            (0..n).map(|i| start + chrono::Days::new(i as u64)).collect(),
            (0..cols).map(|j| format!("s{j}")).collect(),
            DMatrix::from_row_slice(n, cols, &vals),
            Frequency::Daily,
        )
        .unwrap()
    }

    #[test]
    fn one_two_three() {
        let (z, rec) = standardize(&panel(1, vec![1.0, 2.0, 3.0]), StandardizeWindow::FullSample)
            .unwrap();
        assert_eq!(z.column(0), vec![-1.0, 0.0, 1.0]);
        assert_eq!(rec.mean[0], 2.0);
        assert_eq!(rec.sd[0], 1.0);
    }

    #[test]
    fn constant_series_named_in_error() {
        let err = standardize(&panel(2, vec![1.0, 5.0, 2.0, 5.0, 3.0, 5.0]), Default::default())
            .unwrap_err();
        assert!(matches!(err, Error::ZeroVariance(ref n) if n == "s1"));
        let err = standardize(&panel(1, vec![0.1, 0.1, 0.1]), Default::default()).unwrap_err();
        assert!(matches!(err, Error::ZeroVariance(_)));
    }

    fn random_panel(seed: u64) -> TimeSeriesPanel {
        let mut r = rng::seeded(seed);
        let vals: Vec<f64> = (0..200).map(|i| 3.0 * rng::std_normal(&mut r) + i as f64 % 7.0).collect();
        panel(4, vals)
    }

    #[test]
    fn round_trip_identity() {
        for window in [StandardizeWindow::FullSample, StandardizeWindow::Expanding { min_obs: 2 }] {
            let p = random_panel(5);
            let (z, rec) = standardize(&p, window).unwrap();
            let back = destandardize(&z, &rec).unwrap();
            for (i, (a, b)) in p.values().iter().zip(back.values().iter()).enumerate() {
                // Expanding leaves the first row missing.
                if b.is_nan() {
                    assert!(i % p.n_obs() == 0);
                    continue;
                }
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn idempotent() {
        let (z, _) = standardize(&random_panel(9), Default::default()).unwrap();
        let (zz, rec) = standardize(&z, Default::default()).unwrap();
        for (a, b) in z.values().iter().zip(zz.values().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(rec.mean.iter().all(|m| m.abs() < 1e-12));
    }

    #[test]
    fn expanding_last_row_matches_full_sample() {
        let p = random_panel(2);
        let (full, _) = standardize(&p, StandardizeWindow::FullSample).unwrap();
        let (exp, _) = standardize(&p, StandardizeWindow::Expanding { min_obs: 5 }).unwrap();
        let last = p.n_obs() - 1;
        for j in 0..p.n_series() {
            assert!((full.values()[(last, j)] - exp.values()[(last, j)]).abs() < 1e-12);
            assert!(exp.values()[(3, j)].is_nan());
        }
    }
}
