//! Pipeline stages shared by the individual subcommands and `run`.

use std::path::Path;

use nalgebra::DMatrix;
use nsfsi_core::gar::{backtest, pit_csv, BacktestConfig, QuantileBacktestReport};
use nsfsi_core::gdp::{build_mf_model, reconcile, MfModelConfig, MonthlyGdpPosterior, ReconcileOptions};
use nsfsi_core::nsfactor::{factor_number_test, FactorNumberTable, FactorTestOptions};
use nsfsi_core::panel::{
    aggregate_to_monthly, format_float, ingest_csv, is_missing, standardize, AggregationMethod,
    CsvSchema, StandardizeWindow,
};
use nsfsi_core::statespace::{
    align_factors, combine_factors, em_estimate, ffbs_sample, BayesOptions, CombineMethod, EmOptions,
    EstimatedFactorModel, PosteriorDraws,
};
use nsfsi_core::{Frequency, TimeSeriesPanel};

use crate::config::Method;
use crate::error::{config_err, CliResult};
use crate::recipe::Recipe;
use crate::report;

pub const BENCHMARK_MODEL: &str = "benchmark";

pub fn read_panel(path: &Path) -> CliResult<TimeSeriesPanel> {
    Ok(ingest_csv(path, &CsvSchema::default())?)
}

pub fn ingest(path: &Path, columns: Option<Vec<String>>) -> CliResult<TimeSeriesPanel> {
    let schema = CsvSchema {
        columns,
        frequency: None,
    };
    let panel = ingest_csv(path, &schema)?;
    log::info!(
        "ingested {} rows x {} series ({}) from {}",
        panel.n_obs(),
        panel.n_series(),
        panel.frequency().as_str(),
        path.display()
    );
    Ok(panel)
}

/// Leading and trailing rows with any missing cell removed.
pub fn trim_incomplete(panel: &TimeSeriesPanel) -> CliResult<TimeSeriesPanel> {
    let complete = |i: usize| panel.values().row(i).iter().all(|v| !is_missing(*v));
    let first = (0..panel.n_obs()).find(|&i| complete(i));
    let last = (0..panel.n_obs()).rev().find(|&i| complete(i));
    match (first, last) {
        (Some(a), Some(b)) => Ok(panel.slice_rows(a, b + 1)?),
        _ => Err(nsfsi_core::Error::MissingValues("every row of the transformed panel".into()).into()),
    }
}

/// Recipe at the native frequency, then monthly aggregation of daily data,
/// then trimming of incomplete edge rows.
pub fn transform(
    raw: &TimeSeriesPanel,
    recipe: &Recipe,
    aggregate: AggregationMethod,
) -> CliResult<TimeSeriesPanel> {
    let mut panel = recipe.apply(raw)?;
    if panel.frequency() == Frequency::Daily {
        panel = aggregate_to_monthly(&panel, aggregate)?;
    }
    let panel = trim_incomplete(&panel)?;
    log::info!("transformed panel: {} rows x {} series", panel.n_obs(), panel.n_series());
    Ok(panel)
}

pub fn standardized(panel: &TimeSeriesPanel) -> CliResult<TimeSeriesPanel> {
    Ok(standardize(panel, StandardizeWindow::FullSample)?.0)
}

pub fn select(panel: &TimeSeriesPanel, opts: &FactorTestOptions) -> CliResult<(usize, FactorNumberTable)> {
    panel.require_complete("factor-number test input")?;
    let (r, table) = factor_number_test(panel, opts)?;
    log::info!("factor-number test selects r = {r}");
    Ok((r, table))
}

#[derive(Debug, Clone)]
pub struct EstimateSettings {
    pub method: Method,
    pub var_order: usize,
    pub max_iter: usize,
    pub draws: usize,
    pub burn_in: Option<usize>,
    pub seed: Option<u64>,
}

pub enum FactorFit {
    Em(Box<EstimatedFactorModel>),
    Bayes(Box<PosteriorDraws>),
}

impl FactorFit {
    pub fn factors(&self) -> &DMatrix<f64> {
        match self {
            FactorFit::Em(e) => &e.factors,
            FactorFit::Bayes(b) => &b.factor_mean,
        }
    }

    pub fn loadings(&self) -> DMatrix<f64> {
        match self {
            FactorFit::Em(e) => e.params.loadings.clone(),
            FactorFit::Bayes(b) => b.mean_loadings(),
        }
    }

    pub fn diagnostics(&self, x: &DMatrix<f64>) -> CliResult<serde_json::Value> {
        match self {
            FactorFit::Em(e) => Ok(report::em_diagnostics(e)),
            FactorFit::Bayes(b) => report::bayes_diagnostics(b, x, EmOptions::default().adf_level),
        }
    }
}

/// `r` must be positive; an `r` of zero from the test is a data outcome the
/// caller reports before getting here.
pub fn estimate(panel: &TimeSeriesPanel, r: usize, s: &EstimateSettings) -> CliResult<FactorFit> {
    if r == 0 || r >= panel.n_series() {
        return Err(config_err(format!(
            "factor count {r} must lie in 1..{}",
            panel.n_series()
        )));
    }
    match s.method {
        Method::Em => {
            let opts = EmOptions {
                var_order: s.var_order,
                max_iter: s.max_iter,
                ..EmOptions::default()
            };
            let est = em_estimate(panel, r, &opts)?;
            log::info!(
                "EM: {} iterations, converged = {}, loglik = {:.6}",
                est.iterations,
                est.converged,
                est.loglik()
            );
            Ok(FactorFit::Em(Box::new(est)))
        }
        Method::Bayes => {
            let seed = s.seed.ok_or_else(|| config_err("method bayes requires a seed"))?;
            let mut opts = BayesOptions::new(s.draws, seed);
            opts.var_order = s.var_order;
            opts.keep_paths = false;
            if let Some(b) = s.burn_in {
                opts.burn_in = b;
            }
            let post = ffbs_sample(panel, r, &opts)?;
            log::info!("Gibbs: {} draws, {} covariance redraws", post.params.len(), post.rejected_draws);
            Ok(FactorFit::Bayes(Box::new(post)))
        }
    }
}

/// Mean of the factors after scaling each to unit variance and signing it to
/// move with the panel's cross-sectional mean (when the panel is given).
pub fn combine(factors: &DMatrix<f64>, x: Option<&DMatrix<f64>>) -> CliResult<Vec<f64>> {
    let aligned = match x {
        Some(x) => align_factors(factors, x)?,
        None => factors.clone(),
    };
    Ok(combine_factors(&aligned, CombineMethod::Mean)?)
}

pub fn index_panel(like: &TimeSeriesPanel, name: &str, index: &[f64]) -> CliResult<TimeSeriesPanel> {
    Ok(TimeSeriesPanel::new(
        like.dates().to_vec(),
        vec![name.to_string()],
        DMatrix::from_column_slice(index.len(), 1, index),
        like.frequency(),
    )?)
}

#[derive(Debug, Clone)]
pub struct ReconcileSettings {
    pub draws: usize,
    pub burn_in: usize,
    pub chains: usize,
    pub quarterly_scale: f64,
    pub unemployment_column: Option<String>,
}

pub fn reconcile_gdp(
    quarterly: &TimeSeriesPanel,
    monthly: Option<&TimeSeriesPanel>,
    s: &ReconcileSettings,
    seed: u64,
) -> CliResult<MonthlyGdpPosterior> {
    let mut config = MfModelConfig {
        quarterly_scale: s.quarterly_scale,
        ..MfModelConfig::default()
    };
    if let Some(col) = &s.unemployment_column {
        config.unemployment_column = Some(col.clone());
    }
    let model = build_mf_model(quarterly, monthly, config)?;
    let mut opts = ReconcileOptions::new(s.draws, s.burn_in, seed);
    opts.chains = s.chains;
    let post = reconcile(&model, &opts)?;
    log::info!(
        "reconciled {} months; xi acceptance {:.3}/{:.3}",
        post.dates.len(),
        post.acceptance.path_rate(),
        post.acceptance.noise_rate()
    );
    if let (Some(gap), Some(false)) = (post.chain_agreement, post.chains_agree()) {
        log::warn!("chains disagree: standardized gap {gap:.4}");
    }
    Ok(post)
}

/// The growth column: `column` if given, else `mean` when present, else the
/// only column.
pub fn gdp_series(panel: &TimeSeriesPanel, column: Option<&str>) -> CliResult<TimeSeriesPanel> {
    let name = match column {
        Some(c) => c.to_string(),
        None if panel.column_index("mean").is_some() => "mean".to_string(),
        None if panel.n_series() == 1 => panel.names()[0].clone(),
        None => {
            return Err(config_err(format!(
                "GDP file has {} columns; name the growth column",
                panel.n_series()
            )))
        }
    };
    Ok(panel.select(&[name.as_str()])?)
}

/// Benchmark first, then one report per named index.
pub fn evaluate(
    gdp: &TimeSeriesPanel,
    indices: &[(String, TimeSeriesPanel)],
    cfg: &BacktestConfig,
) -> CliResult<Vec<QuantileBacktestReport>> {
    let mut reports = Vec::with_capacity(indices.len() + 1);
    // The benchmark uses the same sample as the first index so the scores compare.
    let bench_gdp = match indices.first() {
        Some((_, idx)) => {
            let joined = gdp.join(idx)?;
            joined.select(&[gdp.names()[0].as_str()])?
        }
        None => gdp.clone(),
    };
    reports.push(backtest(BENCHMARK_MODEL, &bench_gdp, None, cfg)?);
    for (name, idx) in indices {
        if name == BENCHMARK_MODEL {
            return Err(config_err(format!("model name '{BENCHMARK_MODEL}' is reserved")));
        }
        reports.push(backtest(name, gdp, Some(idx), cfg)?);
    }
    for rep in &reports {
        for w in &rep.warnings {
            log::warn!("{}: {w}", rep.model);
        }
    }
    Ok(reports)
}

/// All PIT values in one long table.
pub fn pit_long_csv(reports: &[QuantileBacktestReport]) -> String {
    let mut out = String::from("model,horizon,origin,target,realized,pit\n");
    for rep in reports {
        for h in &rep.horizons {
            for f in &h.forecasts {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    rep.model,
                    h.horizon,
                    f.origin,
                    f.target,
                    format_float(f.realized),
                    format_float(f.pit)
                ));
            }
        }
    }
    out
}

/// One PIT file per model and horizon: `(file name, contents)`.
pub fn pit_files(reports: &[QuantileBacktestReport]) -> Vec<(String, String)> {
    reports
        .iter()
        .flat_map(|rep| {
            rep.horizons
                .iter()
                .map(move |h| (format!("pit_{}_h{}.csv", rep.model, h.horizon), pit_csv(h)))
        })
        .collect()
}

pub fn parse_aggregation(s: &str) -> CliResult<AggregationMethod> {
    AggregationMethod::parse(s).map_err(|e| config_err(e.to_string()))
}
