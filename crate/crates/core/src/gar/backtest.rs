//! Expanding-window growth-at-risk backtest.
//!
//! At origin `o` the regression `y_{t+h} = b(tau)' [1, y_t, risk_t]` is fit on
//! every pair with `t + h <= o`, and the fitted quantiles at `x_o` form the
//! density forecast for `y_{o+h}`.

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};

use super::pit::{ks_uniform, pit, KsResult};
use super::qr::{qr_fit_from, QuantileFit};
use super::scoring::{check_tau_grid, default_tau_grid, qwcrps, quantile_ic, DensityForecast, ScoreWeight};
use crate::error::{Error, Result};
use crate::linalg::variance;
use crate::panel::{format_float, is_missing, TimeSeriesPanel};

pub const DEFAULT_HORIZONS: [usize; 4] = [1, 3, 6, 12];

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestConfig {
    pub taus: Vec<f64>,
    pub horizons: Vec<usize>,
    /// Share of the sample in the first estimation window.
    pub initial_fraction: f64,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        BacktestConfig {
            taus: default_tau_grid(),
            horizons: DEFAULT_HORIZONS.to_vec(),
            initial_fraction: 0.6,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<()> {
        check_tau_grid(&self.taus)?;
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::Config("horizons must be positive".into()));
        }
        if !(self.initial_fraction > 0.0 && self.initial_fraction < 1.0) {
            return Err(Error::Config("initial window fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OriginForecast {
    pub origin: NaiveDate,
    pub target: NaiveDate,
    pub realized: f64,
    pub forecast: DensityForecast,
    pub pit: f64,
    /// Uniform, centre and left weighted scores.
    pub scores: [f64; 3],
    /// Regressors kept after dropping constant columns (intercept included).
    pub n_regressors: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonReport {
    pub horizon: usize,
    pub qwcrps_uniform: f64,
    pub qwcrps_centre: f64,
    pub qwcrps_left: f64,
    /// In-sample, full-sample fit.
    pub aic: f64,
    pub bic: f64,
    pub forecasts: Vec<OriginForecast>,
    pub skipped_origins: usize,
    pub ks: KsResult,
}

impl HorizonReport {
    pub fn pits(&self) -> Vec<f64> {
        self.forecasts.iter().map(|f| f.pit).collect()
    }

    pub fn score(&self, weight: ScoreWeight) -> f64 {
        match weight {
            ScoreWeight::Uniform => self.qwcrps_uniform,
            ScoreWeight::Centre => self.qwcrps_centre,
            ScoreWeight::Left => self.qwcrps_left,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileBacktestReport {
    pub model: String,
    pub horizons: Vec<HorizonReport>,
    pub warnings: Vec<String>,
}

impl QuantileBacktestReport {
    pub fn horizon(&self, h: usize) -> Option<&HorizonReport> {
        self.horizons.iter().find(|r| r.horizon == h)
    }
}

/// Columns of `[1, y_t, risk_t]` for rows `0..n` that vary within those rows.
fn kept_regressors(y: &[f64], risk: &DMatrix<f64>, n: usize) -> Vec<usize> {
    let mut keep = vec![0];
    for j in 0..=risk.ncols() {
        let col: Vec<f64> = if j == 0 {
            y[..n].to_vec()
        } else {
            risk.column(j - 1).rows(0, n).iter().copied().collect()
        };
        let scale = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if variance(&col) > (1e-12 * scale).powi(2) && scale > 0.0 {
            keep.push(j + 1);
        }
    }
    keep
}

fn regressor(y: &[f64], risk: &DMatrix<f64>, t: usize, col: usize) -> f64 {
    match col {
        0 => 1.0,
        1 => y[t],
        j => risk[(t, j - 2)],
    }
}

fn design(y: &[f64], risk: &DMatrix<f64>, h: usize, n: usize, cols: &[usize]) -> (DVector<f64>, DMatrix<f64>) {
    let resp = DVector::from_fn(n, |t, _| y[t + h]);
    let x = DMatrix::from_fn(n, cols.len(), |t, c| regressor(y, risk, t, cols[c]));
    (resp, x)
}

fn fit_grid(
    resp: &DVector<f64>,
    x: &DMatrix<f64>,
    taus: &[f64],
    warm: &mut [Option<DVector<f64>>],
) -> Result<Vec<QuantileFit>> {
    taus.iter()
        .zip(warm.iter_mut())
        .map(|(tau, start)| {
            let fit = qr_fit_from(resp, x, *tau, start.as_ref().filter(|b| b.len() == x.ncols()))?;
            *start = Some(fit.coefficients.clone());
            Ok(fit)
        })
        .collect()
}

/// Backtest one horizon on aligned, complete series.
pub fn backtest_values(
    y: &[f64],
    risk: &DMatrix<f64>,
    dates: &[NaiveDate],
    h: usize,
    cfg: &BacktestConfig,
) -> Result<(HorizonReport, Vec<String>)> {
    cfg.validate()?;
    let t_len = y.len();
    if risk.nrows() != t_len || dates.len() != t_len {
        return Err(Error::InvalidInput("backtest: series lengths differ".into()));
    }
    if y.iter().chain(risk.iter()).any(|v| is_missing(*v)) {
        return Err(Error::MissingValues("backtest input".into()));
    }
    if h == 0 || h + 2 >= t_len {
        return Err(Error::InvalidInput(format!("horizon {h} too long for {t_len} observations")));
    }
    let first = ((cfg.initial_fraction * t_len as f64).ceil() as usize).max(1) - 1;
    let first = first.max(h);
    if first + h >= t_len {
        return Err(Error::InvalidInput(format!(
            "no forecast origins for horizon {h} with {t_len} observations"
        )));
    }
    let mut warnings = Vec::new();
    let mut forecasts = Vec::new();
    let mut skipped = 0;
    let mut warm: Vec<Option<DVector<f64>>> = vec![None; cfg.taus.len()];
    for o in first..t_len - h {
        let n = o - h + 1;
        let cols = kept_regressors(y, risk, n);
        let p = cols.len();
        if n < 3 * p {
            skipped += 1;
            warnings.push(format!(
                "h={h}: origin {} skipped, window of {n} below 3p = {}",
                dates[o],
                3 * p
            ));
            continue;
        }
        let (resp, x) = design(y, risk, h, n, &cols);
        let fits = fit_grid(&resp, &x, &cfg.taus, &mut warm)?;
        let x_o = DVector::from_fn(p, |c, _| regressor(y, risk, o, cols[c]));
        let quantiles = fits.iter().map(|f| f.predict(&x_o)).collect();
        let forecast = DensityForecast::new(cfg.taus.clone(), quantiles, Some(dates[o]), h)?;
        let realized = y[o + h];
        let scores = ScoreWeight::ALL.map(|w| qwcrps(&forecast, realized, w));
        forecasts.push(OriginForecast {
            origin: dates[o],
            target: dates[o + h],
            realized,
            pit: pit(&forecast, realized),
            forecast,
            scores,
            n_regressors: p,
        });
    }
    if forecasts.is_empty() {
        return Err(Error::InvalidInput(format!("h={h}: every forecast origin was skipped")));
    }
    let k = forecasts.len() as f64;
    let avg = |i: usize| forecasts.iter().map(|f| f.scores[i]).sum::<f64>() / k;
    let n_full = t_len - h;
    let cols = kept_regressors(y, risk, n_full);
    let (resp, x) = design(y, risk, h, n_full, &cols);
    let fits = fit_grid(&resp, &x, &cfg.taus, &mut vec![None; cfg.taus.len()])?;
    let (aic, bic) = quantile_ic(&fits)?;
    let pits: Vec<f64> = forecasts.iter().map(|f| f.pit).collect();
    let ks = ks_uniform(&pits)?;
    let report = HorizonReport {
        horizon: h,
        qwcrps_uniform: avg(0),
        qwcrps_centre: avg(1),
        qwcrps_left: avg(2),
        aic,
        bic,
        forecasts,
        skipped_origins: skipped,
        ks,
    };
    Ok((report, warnings))
}

/// Align the growth series with the risk regressors on common dates.
///
/// Leading and trailing rows with a missing cell are dropped; a gap inside
/// the common sample is an error because horizons count rows.
pub fn align_inputs(gdp: &TimeSeriesPanel, risk: Option<&TimeSeriesPanel>) -> Result<TimeSeriesPanel> {
    if gdp.n_series() != 1 {
        return Err(Error::InvalidInput(format!(
            "growth input must have one series, found {}",
            gdp.n_series()
        )));
    }
    let joined = match risk {
        Some(r) => gdp.join(r)?,
        None => gdp.clone(),
    };
    let complete: Vec<bool> = (0..joined.n_obs())
        .map(|t| joined.values().row(t).iter().all(|v| !is_missing(*v)))
        .collect();
    let Some(start) = complete.iter().position(|c| *c) else {
        return Err(Error::MissingValues("no complete rows after alignment".into()));
    };
    let end = complete.iter().rposition(|c| *c).unwrap() + 1;
    if let Some(gap) = (start..end).find(|&t| !complete[t]) {
        return Err(Error::MissingValues(format!(
            "gap at {} inside the aligned sample",
            joined.dates()[gap]
        )));
    }
    joined.slice_rows(start, end)
}

/// Backtest every configured horizon. Horizons run on separate threads.
pub fn backtest(
    model: &str,
    gdp: &TimeSeriesPanel,
    risk: Option<&TimeSeriesPanel>,
    cfg: &BacktestConfig,
) -> Result<QuantileBacktestReport> {
    cfg.validate()?;
    let data = align_inputs(gdp, risk)?;
    let y: Vec<f64> = data.column(0);
    let k = data.n_series() - 1;
    let risk_values = data.values().columns(1, k).into_owned();
    let dates = data.dates();
    let results: Vec<Result<(HorizonReport, Vec<String>)>> = std::thread::scope(|s| {
        let handles: Vec<_> = cfg
            .horizons
            .iter()
            .map(|&h| {
                let (y, risk_values) = (&y, &risk_values);
                s.spawn(move || backtest_values(y, risk_values, dates, h, cfg))
            })
            .collect();
        handles
            .into_iter()
            .map(|hd| hd.join().unwrap_or_else(|_| Err(Error::Numeric("backtest worker panicked".into()))))
            .collect()
    });
    let mut horizons = Vec::new();
    let mut warnings = Vec::new();
    for r in results {
        let (rep, w) = r?;
        horizons.push(rep);
        warnings.extend(w);
    }
    Ok(QuantileBacktestReport {
        model: model.to_string(),
        horizons,
        warnings,
    })
}

/// Summary table: one row per model and metric, one column per horizon.
pub fn report_table_csv(reports: &[QuantileBacktestReport]) -> String {
    let mut horizons: Vec<usize> = reports
        .iter()
        .flat_map(|r| r.horizons.iter().map(|h| h.horizon))
        .collect();
    horizons.sort_unstable();
    horizons.dedup();
    let mut out = String::from("model,metric");
    for h in &horizons {
        out.push_str(&format!(",h{h}"));
    }
    out.push('\n');
    let metrics: [(&str, fn(&HorizonReport) -> String); 7] = [
        ("AIC", |r| format_float(r.aic)),
        ("BIC", |r| format_float(r.bic)),
        ("w_uniform", |r| format_float(r.qwcrps_uniform)),
        ("w_centre", |r| format_float(r.qwcrps_centre)),
        ("w_left", |r| format_float(r.qwcrps_left)),
        ("ks_statistic", |r| format_float(r.ks.statistic)),
        ("ks_pass", |r| (r.ks.passes as u8).to_string()),
    ];
    for rep in reports {
        for (name, get) in &metrics {
            out.push_str(&format!("{},{name}", rep.model));
            for h in &horizons {
                out.push(',');
                if let Some(r) = rep.horizon(*h) {
                    out.push_str(&get(r));
                }
            }
            out.push('\n');
        }
    }
    out
}

/// Per-origin PIT values with the realized outcome.
pub fn pit_csv(report: &HorizonReport) -> String {
    let mut out = String::from("origin,target,realized,pit\n");
    for f in &report.forecasts {
        out.push_str(&format!(
            "{},{},{},{}\n",
            f.origin,
            f.target,
            format_float(f.realized),
            format_float(f.pit)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn dates(n: usize) -> Vec<NaiveDate> {
        let start = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
        (0..n).map(|i| start.checked_add_months(chrono::Months::new(i as u32)).unwrap()).collect()
    }

    fn ar_series(n: usize, seed: u64) -> Vec<f64> {
        let mut g = rng::seeded(seed);
        let mut y = vec![0.0; n];
        for t in 1..n {
            y[t] = 0.5 * y[t - 1] + rng::std_normal(&mut g);
        }
        y
    }

    fn small_cfg(h: usize) -> BacktestConfig {
        BacktestConfig {
            taus: vec![0.1, 0.5, 0.9],
            horizons: vec![h],
            initial_fraction: 0.6,
        }
    }

    #[test]
    fn zero_regressor_reproduces_the_benchmark() {
        let n = 120;
        let y = ar_series(n, 3);
        let d = dates(n);
        let (bench, _) = backtest_values(&y, &DMatrix::zeros(n, 0), &d, 3, &small_cfg(3)).unwrap();
        let (zero, _) = backtest_values(&y, &DMatrix::zeros(n, 1), &d, 3, &small_cfg(3)).unwrap();
        assert_eq!(bench, zero);
    }

    #[test]
    fn origins_and_scores_are_well_formed() {
        let n = 100;
        let y = ar_series(n, 5);
        let (rep, warnings) = backtest_values(&y, &DMatrix::zeros(n, 0), &dates(n), 1, &small_cfg(1)).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(rep.forecasts.len(), n - 60);
        assert_eq!(rep.forecasts[0].origin, dates(n)[59]);
        for f in &rep.forecasts {
            assert!(f.scores.iter().all(|s| *s >= 0.0));
            assert!((0.0..=1.0).contains(&f.pit));
            assert!(f.forecast.quantiles().windows(2).all(|w| w[0] <= w[1]));
        }
        assert!(rep.qwcrps_uniform >= rep.qwcrps_centre);
    }

    #[test]
    fn short_windows_are_skipped_with_a_warning() {
        let n = 20;
        let y = ar_series(n, 9);
        let cfg = BacktestConfig {
            initial_fraction: 0.3,
            ..small_cfg(1)
        };
        let risk = DMatrix::from_fn(n, 2, |t, j| ((t * (j + 3)) % 7) as f64);
        let (rep, warnings) = backtest_values(&y, &risk, &dates(n), 1, &cfg).unwrap();
        assert!(rep.skipped_origins > 0);
        assert_eq!(warnings.len(), rep.skipped_origins);
    }

    #[test]
    fn gaps_inside_the_aligned_sample_are_rejected() {
        let n = 30;
        let mut y = ar_series(n, 1);
        y[0] = f64::NAN;
        let p = TimeSeriesPanel::monthly_from(
            dates(1)[0],
            vec!["gdp".into()],
            DMatrix::from_column_slice(n, 1, &y),
        )
        .unwrap();
        assert_eq!(align_inputs(&p, None).unwrap().n_obs(), n - 1);
        y[10] = f64::NAN;
        let p = p.with_values(DMatrix::from_column_slice(n, 1, &y)).unwrap();
        assert!(align_inputs(&p, None).is_err());
    }

    #[test]
    fn table_layout() {
        let n = 80;
        let y = ar_series(n, 2);
        let p = TimeSeriesPanel::monthly_from(dates(1)[0], vec!["gdp".into()], DMatrix::from_column_slice(n, 1, &y))
            .unwrap();
        let cfg = BacktestConfig {
            horizons: vec![1, 3],
            ..small_cfg(1)
        };
        let rep = backtest("bench", &p, None, &cfg).unwrap();
        let table = report_table_csv(&[rep.clone()]);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines[0], "model,metric,h1,h3");
        assert_eq!(lines.len(), 8);
        assert!(lines[1].starts_with("bench,AIC,"));
        assert_eq!(pit_csv(&rep.horizons[0]).lines().count(), rep.horizons[0].forecasts.len() + 1);
        assert_eq!(backtest("bench", &p, None, &cfg).unwrap(), rep);
    }
}
