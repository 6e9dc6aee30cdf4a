//! `run`: every stage in sequence, with a hashed manifest of the outputs.

use std::path::Path;

use nsfsi_core::gar::report_table_csv;
use nsfsi_core::nsfactor::FactorTestOptions;
use nsfsi_core::panel::write_csv_string;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{Artifact, OutputDir};
use crate::report;
use crate::stages::{self, EstimateSettings, ReconcileSettings};

pub const MANIFEST: &str = "manifest.json";
pub const RNG_NAME: &str = "ChaCha8";

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub rng: &'static str,
    pub seed: Option<u64>,
    pub factor_count: usize,
    pub factor_method: &'static str,
    pub artifacts: Vec<Artifact>,
}

fn stage<T>(name: &'static str, f: impl FnOnce() -> CliResult<T>) -> CliResult<T> {
    log::info!("stage {name}");
    f().map_err(|e| e.in_stage(name))
}

/// Runs the pipeline into `out`; on failure every file it wrote is removed.
pub fn run_pipeline(cfg: &RunConfig, out: &Path) -> CliResult<Manifest> {
    cfg.validate()?;
    let mut dir = OutputDir::create(out)?;
    match run_stages(cfg, &mut dir) {
        Ok(manifest) => Ok(manifest),
        Err(e) => {
            dir.remove_all();
            Err(e)
        }
    }
}

fn run_stages(cfg: &RunConfig, dir: &mut OutputDir) -> CliResult<Manifest> {
    let raw = stage("ingest", || stages::ingest(&cfg.input.market, None))?;

    // The factor stages work on the standardized panel.
    let x = stage("transform", || {
        let agg = stages::parse_aggregation(&cfg.input.aggregate)?;
        let panel = stages::transform(&raw, &cfg.recipe, agg)?;
        dir.write("transformed.csv", &write_csv_string(&panel))?;
        stages::standardized(&panel)
    })?;

    let r = stage("select", || {
        let opts = FactorTestOptions {
            lags: cfg.factors.lags.clone(),
            level: cfg.factors.level,
            decision_lag: cfg.factors.decision_lag,
        };
        let (selected, table) = stages::select(&x, &opts)?;
        dir.write("factor_test.csv", &report::factor_table_csv(&table))?;
        match cfg.factors.r {
            Some(r) => Ok(r),
            None if selected == 0 => Err(CliError::Core(nsfsi_core::Error::InvalidInput(
                "the factor-number test found no common factor; set factors.r to override".into(),
            ))),
            None => Ok(selected),
        }
    })?;

    let fit = stage("estimate", || {
        let settings = EstimateSettings {
            method: cfg.factors.method,
            var_order: cfg.factors.var_order,
            max_iter: cfg.factors.max_iter,
            draws: cfg.factors.draws,
            burn_in: cfg.factors.burn_in,
            seed: cfg.seed,
        };
        let fit = stages::estimate(&x, r, &settings)?;
        let factors = report::factor_panel(&x, fit.factors())?;
        dir.write("factors.csv", &write_csv_string(&factors))?;
        dir.write("loadings.csv", &report::loadings_csv(x.names(), &fit.loadings()))?;
        dir.write_json("diagnostics.json", &fit.diagnostics(x.values())?)?;
        Ok(fit)
    })?;

    let index = stage("combine", || {
        let index = stages::combine(fit.factors(), Some(x.values()))?;
        let panel = stages::index_panel(&x, &cfg.gar.model_name, &index)?;
        dir.write("index.csv", &write_csv_string(&panel))?;
        Ok(panel)
    })?;

    let gdp = match (&cfg.input.gdp_quarterly, &cfg.input.gdp_monthly) {
        (Some(q), _) => stage("reconcile", || {
            let quarterly = stages::read_panel(q)?;
            let monthly = cfg
                .input
                .gdp_indicators
                .as_deref()
                .map(stages::read_panel)
                .transpose()?;
            let settings = ReconcileSettings {
                draws: cfg.gdp.draws,
                burn_in: cfg.gdp.burn_in,
                chains: cfg.gdp.chains,
                quarterly_scale: cfg.gdp.quarterly_scale,
                unemployment_column: cfg.gdp.unemployment_column.clone(),
            };
            let seed = cfg.seed.expect("validated");
            let post = stages::reconcile_gdp(&quarterly, monthly.as_ref(), &settings, seed)?;
            let panel = post.to_panel()?;
            dir.write("gdp_monthly.csv", &write_csv_string(&panel))?;
            stages::gdp_series(&panel, Some("mean"))
        })?,
        (None, Some(m)) => stage("gdp", || {
            stages::gdp_series(&stages::read_panel(m)?, cfg.input.gdp_column.as_deref())
        })?,
        (None, None) => unreachable!("validated"),
    };

    stage("backtest", || {
        let bt = cfg.gar.backtest_config()?;
        let reports = stages::evaluate(&gdp, &[(cfg.gar.model_name.clone(), index.clone())], &bt)?;
        dir.write("gar_table.csv", &report_table_csv(&reports))?;
        dir.write("pit.csv", &stages::pit_long_csv(&reports))?;
        Ok(())
    })?;

    let manifest = Manifest {
        tool: "nsfsi",
        version: env!("CARGO_PKG_VERSION"),
        rng: RNG_NAME,
        seed: cfg.seed,
        factor_count: r,
        factor_method: cfg.factors.method.as_str(),
        artifacts: dir.artifacts().to_vec(),
    };
    dir.write_json(MANIFEST, &manifest)?;
    Ok(manifest)
}
