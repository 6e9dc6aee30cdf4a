//! Transform recipes: one output column per entry, e.g.
//!
//! ```text
//! [recipe]
//! equity_dd = "cmax(equity, 12)"
//! equity_vol = "ewsd(equity, 0.94)"
//! credit = "spread(corp_yield, gilt_yield)"
//! bank_rate = "passthrough(bank_rate)"
//! ```

use nalgebra::DMatrix;
use nsfsi_core::transforms::{cmax, corp_spread, ewsd};
use nsfsi_core::TimeSeriesPanel;

use crate::error::{config_err, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Cmax { source: String, window: usize },
    Ewsd { source: String, decay: f64 },
    Spread { corp: String, govt: String },
    Passthrough { source: String },
}

impl Step {
    pub fn parse(text: &str) -> CliResult<Step> {
        let text = text.trim();
        let (op, rest) = text
            .split_once('(')
            .ok_or_else(|| config_err(format!("recipe step '{text}' is not of the form op(args)")))?;
        let inner = rest
            .strip_suffix(')')
            .ok_or_else(|| config_err(format!("recipe step '{text}' is missing ')'")))?;
        let args: Vec<&str> = inner.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        let want = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(config_err(format!("'{}' takes {n} argument(s) in '{text}'", op.trim())))
            }
        };
        match op.trim() {
            "cmax" => {
                want(2)?;
                let window = args[1]
                    .parse()
                    .map_err(|_| config_err(format!("bad CMAX window '{}'", args[1])))?;
                Ok(Step::Cmax {
                    source: args[0].to_string(),
                    window,
                })
            }
            "ewsd" => {
                want(2)?;
                let decay = args[1]
                    .parse()
                    .map_err(|_| config_err(format!("bad EWSD decay '{}'", args[1])))?;
                Ok(Step::Ewsd {
                    source: args[0].to_string(),
                    decay,
                })
            }
            "spread" => {
                want(2)?;
                Ok(Step::Spread {
                    corp: args[0].to_string(),
                    govt: args[1].to_string(),
                })
            }
            "passthrough" => {
                want(1)?;
                Ok(Step::Passthrough {
                    source: args[0].to_string(),
                })
            }
            other => Err(config_err(format!("unknown transform '{other}'"))),
        }
    }

    pub fn sources(&self) -> Vec<&str> {
        match self {
            Step::Cmax { source, .. } | Step::Ewsd { source, .. } | Step::Passthrough { source } => {
                vec![source]
            }
            Step::Spread { corp, govt } => vec![corp, govt],
        }
    }

    fn apply(&self, panel: &TimeSeriesPanel) -> CliResult<Vec<f64>> {
        let col = |name: &str| panel.column_by_name(name);
        Ok(match self {
            Step::Cmax { source, window } => cmax(&col(source)?, *window)?.values,
            Step::Ewsd { source, decay } => ewsd(&col(source)?, *decay)?,
            Step::Spread { corp, govt } => corp_spread(&col(corp)?, &col(govt)?)?,
            Step::Passthrough { source } => col(source)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Recipe {
    pub steps: Vec<(String, Step)>,
}

impl Recipe {
    pub fn from_table(table: &toml::Table) -> CliResult<Recipe> {
        let mut steps = Vec::with_capacity(table.len());
        for (name, value) in table {
            let text = value
                .as_str()
                .ok_or_else(|| config_err(format!("recipe entry '{name}' must be a string")))?;
            steps.push((name.clone(), Step::parse(text)?));
        }
        if steps.is_empty() {
            return Err(config_err("recipe has no entries"));
        }
        Ok(Recipe { steps })
    }

    /// Reads the `[recipe]` table of a TOML file.
    pub fn from_file(path: &std::path::Path) -> CliResult<Recipe> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read recipe {}: {e}", path.display())))?;
        let doc: toml::Table = text
            .parse()
            .map_err(|e| config_err(format!("recipe {}: {e}", path.display())))?;
        let table = doc
            .get("recipe")
            .and_then(|v| v.as_table())
            .ok_or_else(|| config_err(format!("recipe {} has no [recipe] table", path.display())))?;
        Recipe::from_table(table)
    }

    pub fn apply(&self, panel: &TimeSeriesPanel) -> CliResult<TimeSeriesPanel> {
        for (name, step) in &self.steps {
            for src in step.sources() {
                if panel.column_index(src).is_none() {
                    return Err(config_err(format!(
                        "recipe entry '{name}' reads unknown column '{src}'"
                    )));
                }
            }
        }
        let cols = self
            .steps
            .iter()
            .map(|(_, step)| step.apply(panel))
            .collect::<CliResult<Vec<_>>>()?;
        let values = DMatrix::from_fn(panel.n_obs(), cols.len(), |i, j| cols[j][i]);
        let names = self.steps.iter().map(|(n, _)| n.clone()).collect();
        Ok(TimeSeriesPanel::new(
            panel.dates().to_vec(),
            names,
            values,
            panel.frequency(),
        )?)
    }
}
