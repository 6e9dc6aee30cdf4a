//! Run configuration: TOML with one table per pipeline stage.

use std::path::{Path, PathBuf};

use nsfsi_core::gar::{check_tau_grid, default_tau_grid, BacktestConfig, DEFAULT_HORIZONS};
use serde::Deserialize;

use crate::error::{config_err, CliResult};
use crate::recipe::Recipe;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    /// Market series, daily or monthly.
    pub market: PathBuf,
    /// Daily-to-monthly rule, `mean` or `last`.
    #[serde(default = "default_aggregate")]
    pub aggregate: String,
    /// Two quarterly GDP measures; enables the reconcile stage.
    pub gdp_quarterly: Option<PathBuf>,
    /// Monthly indicators for the reconcile stage.
    pub gdp_indicators: Option<PathBuf>,
    /// Ready-made monthly GDP growth; used instead of reconciling.
    pub gdp_monthly: Option<PathBuf>,
    pub gdp_column: Option<String>,
}

fn default_aggregate() -> String {
    "last".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Em,
    Bayes,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Em => "em",
            Method::Bayes => "bayes",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSection {
    #[serde(default = "default_lags")]
    pub lags: Vec<usize>,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_decision_lag")]
    pub decision_lag: usize,
    /// Overrides the tested factor count.
    pub r: Option<usize>,
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_factor_draws")]
    pub draws: usize,
    pub burn_in: Option<usize>,
    #[serde(default = "default_var_order")]
    pub var_order: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_lags() -> Vec<usize> {
    vec![1, 2, 3, 4, 5]
}
fn default_level() -> f64 {
    0.05
}
fn default_decision_lag() -> usize {
    1
}
fn default_factor_draws() -> usize {
    1000
}
fn default_var_order() -> usize {
    1
}
fn default_max_iter() -> usize {
    500
}

impl Default for FactorSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults deserialize")
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GdpSection {
    #[serde(default = "default_gdp_draws")]
    pub draws: usize,
    #[serde(default = "default_gdp_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default = "default_scale")]
    pub quarterly_scale: f64,
    /// Indicator column holding unemployment, if any.
    pub unemployment_column: Option<String>,
}

fn default_gdp_draws() -> usize {
    2000
}
fn default_gdp_burn_in() -> usize {
    1000
}
fn default_chains() -> usize {
    1
}
fn default_scale() -> f64 {
    1.0
}

impl Default for GdpSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults deserialize")
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GarSection {
    #[serde(default = "default_horizons")]
    pub horizons: Vec<usize>,
    pub taus: Option<Vec<f64>>,
    #[serde(default = "default_fraction")]
    pub initial_fraction: f64,
    /// Name of the stress-index model in the report.
    #[serde(default = "default_model_name")]
    pub model_name: String,
}

fn default_horizons() -> Vec<usize> {
    DEFAULT_HORIZONS.to_vec()
}
fn default_fraction() -> f64 {
    0.6
}
fn default_model_name() -> String {
    "index".into()
}

impl Default for GarSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults deserialize")
    }
}

impl GarSection {
    pub fn backtest_config(&self) -> CliResult<BacktestConfig> {
        let taus = self.taus.clone().unwrap_or_else(default_tau_grid);
        check_tau_grid(&taus)?;
        let cfg = BacktestConfig {
            taus,
            horizons: self.horizons.clone(),
            initial_fraction: self.initial_fraction,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    run: RunSection,
    input: InputSection,
    recipe: toml::Table,
    #[serde(default)]
    factors: FactorSection,
    #[serde(default)]
    gdp: GdpSection,
    #[serde(default)]
    gar: GarSection,
}

/// Validated configuration with paths resolved against the config file.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub input: InputSection,
    pub recipe: Recipe,
    pub factors: FactorSection,
    pub gdp: GdpSection,
    pub gar: GarSection,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> CliResult<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> CliResult<RunConfig> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        let mut input = raw.input;
        let resolve = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        input.market = resolve(&input.market);
        for p in [
            &mut input.gdp_quarterly,
            &mut input.gdp_indicators,
            &mut input.gdp_monthly,
        ]
        .into_iter()
        .flatten()
        {
            *p = resolve(p);
        }
        Ok(RunConfig {
            seed: raw.run.seed,
            out: raw.run.out.as_ref().map(resolve),
            input,
            recipe: Recipe::from_table(&raw.recipe)?,
            factors: raw.factors,
            gdp: raw.gdp,
            gar: raw.gar,
        })
    }

    pub fn reconciles(&self) -> bool {
        self.input.gdp_quarterly.is_some()
    }

    /// Checks every precondition that does not need the data itself.
    pub fn validate(&self) -> CliResult<()> {
        let mut paths = vec![&self.input.market];
        paths.extend(self.input.gdp_quarterly.iter());
        paths.extend(self.input.gdp_indicators.iter());
        paths.extend(self.input.gdp_monthly.iter());
        for p in paths {
            if !p.is_file() {
                return Err(config_err(format!("input file {} does not exist", p.display())));
            }
        }
        match (&self.input.gdp_quarterly, &self.input.gdp_monthly) {
            (Some(_), Some(_)) => {
                return Err(config_err("set only one of gdp_quarterly and gdp_monthly"))
            }
            (None, None) => return Err(config_err("one of gdp_quarterly or gdp_monthly is required")),
            _ => {}
        }
        if self.input.gdp_indicators.is_some() && !self.reconciles() {
            return Err(config_err("gdp_indicators needs gdp_quarterly"));
        }
        if !matches!(self.input.aggregate.as_str(), "mean" | "last") {
            return Err(config_err(format!(
                "aggregate must be 'mean' or 'last', got '{}'",
                self.input.aggregate
            )));
        }
        if self.factors.method == Method::Bayes && self.seed.is_none() {
            return Err(config_err("method = bayes requires a seed"));
        }
        if self.reconciles() && self.seed.is_none() {
            return Err(config_err("GDP reconciliation requires a seed"));
        }
        if self.factors.r == Some(0) {
            return Err(config_err("factor count override must be positive"));
        }
        if self.factors.var_order == 0 {
            return Err(config_err("var_order must be positive"));
        }
        if self.factors.method == Method::Bayes && self.factors.draws == 0 {
            return Err(config_err("factor draws must be positive"));
        }
        if self.reconciles() && (self.gdp.draws == 0 || self.gdp.chains == 0) {
            return Err(config_err("GDP draws and chains must be positive"));
        }
        self.gar.backtest_config()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[input]
market = "m.csv"
gdp_monthly = "g.csv"

[recipe]
x = "passthrough(x)"
"#;

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = RunConfig::parse(MINIMAL, Path::new("/base")).unwrap();
        assert_eq!(cfg.input.market, PathBuf::from("/base/m.csv"));
        assert_eq!(cfg.factors.method, Method::Em);
        assert_eq!(cfg.factors.lags, vec![1, 2, 3, 4, 5]);
        assert_eq!(cfg.gar.horizons, vec![1, 3, 6, 12]);
        assert_eq!(cfg.seed, None);
        assert!(!cfg.reconciles());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\n[factors]\nmethod = \"em\"\nbogus = 1\n");
        assert!(RunConfig::parse(&text, Path::new(".")).is_err());
        let text = format!("{MINIMAL}\n[factors]\nmethod = \"pca\"\n");
        assert!(RunConfig::parse(&text, Path::new(".")).is_err());
    }

    #[test]
    fn bayes_without_seed_fails_validation() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("m.csv"), "date,x\n").unwrap();
        std::fs::write(dir.path().join("g.csv"), "date,x\n").unwrap();
        let text = format!("{MINIMAL}\n[factors]\nmethod = \"bayes\"\n");
        let mut cfg = RunConfig::parse(&text, dir.path()).unwrap();
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.exit_code(), crate::error::EXIT_CONFIG);
        assert!(err.to_string().contains("seed"), "{err}");
        cfg.seed = Some(1);
        cfg.validate().unwrap();
    }
}
