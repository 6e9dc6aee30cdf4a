use crate::error::{Error, Result};
use crate::panel::{is_missing, TimeSeriesPanel, MISSING};

/// How a raw monthly indicator enters the GDP model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndicatorTransform {
    /// `100 * (ln x_t - ln x_{t-1})`.
    GrowthRate,
    /// Growth rate scaled by periods per year.
    AnnualisedGrowthRate,
    Level,
}

impl IndicatorTransform {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "growth" | "growth_rate" => Ok(IndicatorTransform::GrowthRate),
            "annualised" | "annualized" | "annualised_growth" => {
                Ok(IndicatorTransform::AnnualisedGrowthRate)
            }
            "level" => Ok(IndicatorTransform::Level),
            other => Err(Error::Config(format!("unknown indicator transform '{other}'"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            IndicatorTransform::GrowthRate => "growth",
            IndicatorTransform::AnnualisedGrowthRate => "annualised",
            IndicatorTransform::Level => "level",
        }
    }
}

/// Interest rates enter in levels; quantities and prices enter as growth
/// rates.
pub fn default_transform(name: &str) -> IndicatorTransform {
    let lower = name.to_ascii_lowercase();
    let is_rate = ["rate", "yield", "bank_rate", "libor", "gilt"]
        .iter()
        .any(|k| lower.contains(k));
    if is_rate {
        IndicatorTransform::Level
    } else {
        IndicatorTransform::GrowthRate
    }
}

/// Apply `transform` to one series. Growth transforms leave the first value
/// missing and need strictly positive inputs.
pub fn transform_series(
    values: &[f64],
    transform: IndicatorTransform,
    periods_per_year: f64,
) -> Result<Vec<f64>> {
    if transform == IndicatorTransform::Level {
        return Ok(values.to_vec());
    }
    if values.iter().any(|v| !is_missing(*v) && *v <= 0.0) {
        return Err(Error::InvalidInput(
            "growth rates need strictly positive levels".into(),
        ));
    }
    let scale = match transform {
        IndicatorTransform::AnnualisedGrowthRate => 100.0 * periods_per_year,
        _ => 100.0,
    };
    let mut out = vec![MISSING; values.len()];
    for t in 1..values.len() {
        if !is_missing(values[t]) && !is_missing(values[t - 1]) {
            out[t] = scale * (values[t].ln() - values[t - 1].ln());
        }
    }
    Ok(out)
}

/// Transform every column of a monthly panel, using `overrides` where given
/// and [`default_transform`] otherwise.
pub fn transform_indicators(
    panel: &TimeSeriesPanel,
    overrides: &[(String, IndicatorTransform)],
) -> Result<TimeSeriesPanel> {
    let mut values = panel.values().clone();
    for (j, name) in panel.names().iter().enumerate() {
        let tr = overrides
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| *t)
            .unwrap_or_else(|| default_transform(name));
        let col = transform_series(&panel.column(j), tr, 12.0)
            .map_err(|e| Error::InvalidInput(format!("series '{name}': {e}")))?;
        for (t, v) in col.into_iter().enumerate() {
            values[(t, j)] = v;
        }
    }
    panel.with_values(values)
}
