//! `nsfsi`: build a financial stress index from market data and judge it by
//! how well it forecasts the lower tail of GDP growth.

mod config;
mod error;
mod fixtures;
mod output;
mod pipeline;
mod recipe;
mod report;
mod stages;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use nsfsi_core::gar::{report_table_csv, BacktestConfig};
use nsfsi_core::nsfactor::FactorTestOptions;
use nsfsi_core::panel::write_csv_string;
use nsfsi_core::synth::{gen_factor_panel, gen_mf_gdp, FactorDgpSpec, MfGdpSpec};
use nsfsi_core::transforms::{AdfSpec, LagRule};
use nsfsi_core::TimeSeriesPanel;

use crate::config::{Method, RunConfig};
use crate::error::{config_err, CliResult};
use crate::output::OutputDir;
use crate::recipe::Recipe;
use crate::stages::{EstimateSettings, ReconcileSettings};

#[derive(Parser, Debug)]
#[command(name = "nsfsi", version, about = "Financial stress indices and growth-at-risk evaluation")]
struct Cli {
    /// Run configuration (TOML); required by `run`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every stochastic stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Read and validate a CSV panel; write it back in canonical form.
    Ingest(IngestArgs),
    /// Apply a transform recipe and aggregate daily data to months.
    Transform(TransformArgs),
    /// Augmented Dickey-Fuller test on every series of a panel.
    Adf(AdfArgs),
    /// Factor-number test, factor estimation and index construction.
    #[command(subcommand)]
    Factors(FactorsCommand),
    /// Monthly GDP from quarterly measures.
    #[command(subcommand)]
    Gdp(GdpCommand),
    /// Growth-at-risk backtests.
    #[command(subcommand)]
    Gar(GarCommand),
    /// Synthetic data with known truth.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Full pipeline from a config file.
    Run,
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    /// Keep only these columns, comma separated.
    #[arg(long, value_delimiter = ',')]
    columns: Option<Vec<String>>,
    /// Aggregate daily input to months with `mean` or `last`.
    #[arg(long)]
    aggregate: Option<String>,
}

#[derive(Args, Debug)]
struct TransformArgs {
    #[arg(long)]
    input: PathBuf,
    /// TOML file with a `[recipe]` table.
    #[arg(long)]
    recipe: PathBuf,
    #[arg(long, default_value = "last")]
    aggregate: String,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Deterministic {
    C,
    Ct,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LagChoice {
    Bic,
    Fixed,
}

#[derive(Args, Debug)]
struct AdfArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "c")]
    deterministic: Deterministic,
    /// Largest lag; defaults to Schwert's rule.
    #[arg(long)]
    max_lags: Option<usize>,
    #[arg(long, value_enum, default_value = "bic")]
    lag_rule: LagChoice,
}

#[derive(Subcommand, Debug)]
enum FactorsCommand {
    /// Sequential chi-square test on the number of factors.
    Select(SelectArgs),
    /// Estimate the dynamic factor model.
    Estimate(EstimateArgs),
    /// Combine factor paths into one index.
    Combine(CombineArgs),
}

#[derive(Args, Debug)]
struct SelectArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    lags: Vec<usize>,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    #[arg(long, default_value_t = 1)]
    decision_lag: usize,
    /// Use the panel as is instead of standardizing each series.
    #[arg(long)]
    raw: bool,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    r: usize,
    #[arg(long, value_enum, default_value = "em")]
    method: MethodArg,
    #[arg(long, default_value_t = 1000)]
    draws: usize,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long, default_value_t = 1)]
    var_order: usize,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long)]
    raw: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Em,
    Bayes,
}

#[derive(Args, Debug)]
struct CombineArgs {
    /// Factor paths CSV.
    #[arg(long)]
    input: PathBuf,
    /// Panel the factors were estimated on; used to sign and scale them.
    #[arg(long)]
    panel: Option<PathBuf>,
    #[arg(long, default_value = "index")]
    name: String,
}

#[derive(Subcommand, Debug)]
enum GdpCommand {
    /// Gibbs sampler for latent monthly growth.
    Reconcile(ReconcileArgs),
}

#[derive(Args, Debug)]
struct ReconcileArgs {
    /// Two quarterly measures dated in months 3, 6, 9 and 12.
    #[arg(long)]
    quarterly: PathBuf,
    /// Monthly indicators.
    #[arg(long)]
    monthly: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    draws: usize,
    #[arg(long, default_value_t = 1000)]
    burn_in: usize,
    #[arg(long, default_value_t = 1)]
    chains: usize,
    /// Loading of the quarterly measures on the three-month sum.
    #[arg(long, default_value_t = 1.0)]
    quarterly_scale: f64,
    #[arg(long)]
    unemployment_column: Option<String>,
}

#[derive(Subcommand, Debug)]
enum GarCommand {
    /// Benchmark and stress-index quantile backtests.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    gdp: PathBuf,
    #[arg(long)]
    gdp_column: Option<String>,
    /// Stress index CSV; repeat for several indices.
    #[arg(long)]
    index: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1,3,6,12")]
    horizons: Vec<usize>,
    #[arg(long, default_value_t = 0.6)]
    initial_fraction: f64,
}

#[derive(Subcommand, Debug)]
enum SynthCommand {
    /// Factor panel with known loadings and factors.
    FactorPanel(FactorPanelArgs),
    /// Quarterly GDP measures, indicators and the true monthly path.
    MfGdp(MfGdpArgs),
    /// Input files for a complete `run`.
    Fixtures(FixtureArgs),
}

#[derive(Args, Debug)]
struct FactorPanelArgs {
    #[arg(long, default_value_t = 9)]
    m: usize,
    #[arg(long, default_value_t = 2)]
    r1: usize,
    #[arg(long, default_value_t = 1)]
    r2: usize,
    #[arg(long, default_value_t = 2000)]
    t: usize,
    #[arg(long, default_value_t = 1.0)]
    noise_var: f64,
    #[arg(long, default_value_t = 0.0)]
    drift: f64,
}

#[derive(Args, Debug)]
struct MfGdpArgs {
    #[arg(long, default_value_t = 360)]
    months: usize,
    #[arg(long, default_value_t = 0.7)]
    xi_production: f64,
    #[arg(long, default_value_t = 0.8)]
    xi_expenditure: f64,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
}

#[derive(Args, Debug)]
struct FixtureArgs {
    #[arg(long, default_value_t = 240)]
    months: usize,
}

fn require_seed(seed: Option<u64>, what: &str) -> CliResult<u64> {
    seed.ok_or_else(|| config_err(format!("{what} requires --seed")))
}

fn read_factor_panel(path: &Path, raw: bool) -> CliResult<TimeSeriesPanel> {
    let panel = stages::read_panel(path)?;
    if raw {
        Ok(panel)
    } else {
        stages::standardized(&panel)
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "index".into())
}

fn execute(cli: &Cli) -> CliResult<()> {
    let out_dir = || cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    match &cli.command {
        Command::Ingest(a) => {
            let mut panel = stages::ingest(&a.input, a.columns.clone())?;
            if let Some(agg) = &a.aggregate {
                panel = nsfsi_core::panel::aggregate_to_monthly(&panel, stages::parse_aggregation(agg)?)?;
            }
            OutputDir::create(&out_dir())?.write("panel.csv", &write_csv_string(&panel))?;
        }
        Command::Transform(a) => {
            let recipe = Recipe::from_file(&a.recipe)?;
            let raw = stages::ingest(&a.input, None)?;
            let panel = stages::transform(&raw, &recipe, stages::parse_aggregation(&a.aggregate)?)?;
            OutputDir::create(&out_dir())?.write("transformed.csv", &write_csv_string(&panel))?;
        }
        Command::Adf(a) => {
            let panel = stages::read_panel(&a.input)?;
            let spec = match a.deterministic {
                Deterministic::C => AdfSpec::Constant,
                Deterministic::Ct => AdfSpec::ConstantTrend,
            };
            let rule = match a.lag_rule {
                LagChoice::Bic => LagRule::Bic,
                LagChoice::Fixed => LagRule::Fixed,
            };
            let csv = report::adf_csv(&panel, spec, a.max_lags, rule)?;
            OutputDir::create(&out_dir())?.write("adf.csv", &csv)?;
        }
        Command::Factors(FactorsCommand::Select(a)) => {
            let panel = read_factor_panel(&a.input, a.raw)?;
            let opts = FactorTestOptions {
                lags: a.lags.clone(),
                level: a.level,
                decision_lag: a.decision_lag,
            };
            let (r, table) = stages::select(&panel, &opts)?;
            OutputDir::create(&out_dir())?.write("factor_test.csv", &report::factor_table_csv(&table))?;
            println!("selected r = {r}");
        }
        Command::Factors(FactorsCommand::Estimate(a)) => {
            let panel = read_factor_panel(&a.input, a.raw)?;
            let settings = EstimateSettings {
                method: match a.method {
                    MethodArg::Em => Method::Em,
                    MethodArg::Bayes => Method::Bayes,
                },
                var_order: a.var_order,
                max_iter: a.max_iter,
                draws: a.draws,
                burn_in: a.burn_in,
                seed: cli.seed,
            };
            if settings.method == Method::Bayes {
                require_seed(cli.seed, "--method bayes")?;
            }
            let fit = stages::estimate(&panel, a.r, &settings)?;
            let mut dir = OutputDir::create(&out_dir())?;
            dir.write("factors.csv", &write_csv_string(&report::factor_panel(&panel, fit.factors())?))?;
            dir.write("loadings.csv", &report::loadings_csv(panel.names(), &fit.loadings()))?;
            dir.write_json("diagnostics.json", &fit.diagnostics(panel.values())?)?;
        }
        Command::Factors(FactorsCommand::Combine(a)) => {
            let factors = stages::read_panel(&a.input)?;
            let x = match &a.panel {
                Some(p) => {
                    let x = stages::standardized(&stages::read_panel(p)?)?;
                    if x.dates() != factors.dates() {
                        return Err(config_err("factor and panel dates differ"));
                    }
                    Some(x)
                }
                None => None,
            };
            let index = stages::combine(factors.values(), x.as_ref().map(|p| p.values()))?;
            let panel = stages::index_panel(&factors, &a.name, &index)?;
            OutputDir::create(&out_dir())?.write("index.csv", &write_csv_string(&panel))?;
        }
        Command::Gdp(GdpCommand::Reconcile(a)) => {
            let seed = require_seed(cli.seed, "gdp reconcile")?;
            let quarterly = stages::read_panel(&a.quarterly)?;
            let monthly = a.monthly.as_deref().map(stages::read_panel).transpose()?;
            let settings = ReconcileSettings {
                draws: a.draws,
                burn_in: a.burn_in,
                chains: a.chains,
                quarterly_scale: a.quarterly_scale,
                unemployment_column: a.unemployment_column.clone(),
            };
            let post = stages::reconcile_gdp(&quarterly, monthly.as_ref(), &settings, seed)?;
            OutputDir::create(&out_dir())?.write("gdp_monthly.csv", &write_csv_string(&post.to_panel()?))?;
        }
        Command::Gar(GarCommand::Evaluate(a)) => {
            let gdp = stages::gdp_series(&stages::read_panel(&a.gdp)?, a.gdp_column.as_deref())?;
            let indices = a
                .index
                .iter()
                .map(|p| Ok((file_stem(p), stages::read_panel(p)?)))
                .collect::<CliResult<Vec<_>>>()?;
            let cfg = BacktestConfig {
                horizons: a.horizons.clone(),
                initial_fraction: a.initial_fraction,
                ..BacktestConfig::default()
            };
            let reports = stages::evaluate(&gdp, &indices, &cfg)?;
            let mut dir = OutputDir::create(&out_dir())?;
            dir.write("gar_table.csv", &report_table_csv(&reports))?;
            for (name, csv) in stages::pit_files(&reports) {
                dir.write(&name, &csv)?;
            }
        }
        Command::Synth(SynthCommand::FactorPanel(a)) => {
            let seed = require_seed(cli.seed, "synth")?;
            let spec = FactorDgpSpec {
                noise_var: a.noise_var,
                drift: a.drift,
                ..FactorDgpSpec::new(a.m, a.r1, a.r2, a.t)
            };
            let (panel, truth) = gen_factor_panel(&spec, seed)?;
            let mut dir = OutputDir::create(&out_dir())?;
            dir.write("panel.csv", &write_csv_string(&panel))?;
            dir.write("truth_factors.csv", &write_csv_string(&report::factor_panel(&panel, &truth.factors)?))?;
            dir.write("truth_loadings.csv", &report::loadings_csv(panel.names(), &truth.loadings))?;
        }
        Command::Synth(SynthCommand::MfGdp(a)) => {
            let seed = require_seed(cli.seed, "synth")?;
            let spec = MfGdpSpec {
                months: a.months,
                xi_production: a.xi_production,
                xi_expenditure: a.xi_expenditure,
                rho: a.rho,
                ..MfGdpSpec::default()
            };
            let data = gen_mf_gdp(&spec, seed)?;
            let truth = TimeSeriesPanel::new(
                data.monthly.dates().to_vec(),
                vec!["growth".into()],
                DMatrix::from_column_slice(a.months, 1, &data.truth.monthly_growth),
                data.monthly.frequency(),
            )?;
            let mut dir = OutputDir::create(&out_dir())?;
            dir.write("quarterly.csv", &write_csv_string(&data.quarterly))?;
            dir.write("monthly.csv", &write_csv_string(&data.monthly))?;
            dir.write("truth.csv", &write_csv_string(&truth))?;
        }
        Command::Synth(SynthCommand::Fixtures(a)) => {
            let seed = require_seed(cli.seed, "synth")?;
            let f = fixtures::make_fixtures(a.months, seed)?;
            let mut dir = OutputDir::create(&out_dir())?;
            dir.write("market.csv", &write_csv_string(&f.market))?;
            dir.write("gdp_quarterly.csv", &write_csv_string(&f.gdp.quarterly))?;
            dir.write("indicators.csv", &write_csv_string(&f.gdp.monthly))?;
        }
        Command::Run => {
            let path = cli
                .config
                .as_ref()
                .ok_or_else(|| config_err("run requires --config"))?;
            let mut cfg = RunConfig::from_file(path)?;
            if cli.seed.is_some() {
                cfg.seed = cli.seed;
            }
            let out = cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
            let manifest = pipeline::run_pipeline(&cfg, &out)?;
            println!(
                "wrote {} artifacts and {} to {}",
                manifest.artifacts.len(),
                pipeline::MANIFEST,
                out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .format_timestamp(None)
        .init();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
