//! Mixed-frequency state-space form for latent monthly GDP growth.
//!
//! ```text
//! g_t   = mu + rho g_{t-1} + b'z_t + e_t                 (monthly)
//! P_t   = s (g_t + g_{t-1} + g_{t-2}) + n_P              (quarter-end months)
//! E_t   = s (g_t + g_{t-1} + g_{t-2}) + n_E              (quarter-end months)
//! U_t   = d + l g_t + n_U                                (monthly, optional)
//! ```
//!
//! The state is `[g_t, g_{t-1}, g_{t-2}]`.

use chrono::{Datelike, Months, NaiveDate};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::panel::{first_of_month, is_missing, month_index, TimeSeriesPanel, MISSING};
use crate::statespace::{StateSpaceModel, DIFFUSE_VARIANCE};

pub const DEFAULT_XI_BOUNDS: (f64, f64) = (0.35, 1.15);

/// `var(true GDP) / var(measure)`.
pub fn xi_ratio(var_gdp: f64, var_gdp_i: f64) -> Result<f64> {
    if !(var_gdp > 0.0) || !(var_gdp_i > 0.0) {
        return Err(Error::InvalidInput(format!(
            "variance ratio needs positive variances, got {var_gdp} and {var_gdp_i}"
        )));
    }
    Ok(var_gdp / var_gdp_i)
}

/// Open interval check.
pub fn xi_in_bounds(xi: f64, bounds: (f64, f64)) -> bool {
    xi > bounds.0 && xi < bounds.1
}

/// Ratio implied by independent measurement noise: `V / (V + noise_var)`.
pub fn implied_xi(var_aggregate: f64, noise_var: f64) -> f64 {
    if noise_var == 0.0 {
        1.0
    } else {
        var_aggregate / (var_aggregate + noise_var)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MfModelConfig {
    /// Multiplier on the three-month sum, e.g. 4 when quarterly measures are
    /// annualised and monthly growth is not.
    pub quarterly_scale: f64,
    pub xi_bounds: (f64, f64),
    /// Monthly column treated as unemployment; it loads on latent GDP only.
    pub unemployment_column: Option<String>,
    /// Known measurement noise variances; `None` means estimated.
    pub fixed_noise_production: Option<f64>,
    pub fixed_noise_expenditure: Option<f64>,
}

impl Default for MfModelConfig {
    fn default() -> Self {
        MfModelConfig {
            quarterly_scale: 1.0,
            xi_bounds: DEFAULT_XI_BOUNDS,
            unemployment_column: Some("unemployment".into()),
            fixed_noise_production: None,
            fixed_noise_expenditure: None,
        }
    }
}

impl MfModelConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.xi_bounds;
        if !(lo >= 0.0 && lo < hi) {
            return Err(Error::Config(format!("invalid variance-ratio interval ({lo}, {hi})")));
        }
        if !(self.quarterly_scale > 0.0) || !self.quarterly_scale.is_finite() {
            return Err(Error::Config("quarterly scale must be positive".into()));
        }
        for v in [self.fixed_noise_production, self.fixed_noise_expenditure].into_iter().flatten() {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config("fixed noise variances must be nonnegative".into()));
            }
        }
        Ok(())
    }
}

/// Data arranged on the monthly grid, plus configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedFrequencyGdpModel {
    pub months: Vec<NaiveDate>,
    /// Monthly-length vectors, missing except at quarter-end months.
    pub production: Vec<f64>,
    pub expenditure: Vec<f64>,
    pub indicator_names: Vec<String>,
    /// `T x k` indicators (may have zero columns).
    pub indicators: DMatrix<f64>,
    pub unemployment: Option<Vec<f64>>,
    pub config: MfModelConfig,
}

/// Parameters of one model draw.
#[derive(Debug, Clone, PartialEq)]
pub struct MfParams {
    pub intercept: f64,
    pub rho: f64,
    pub coefs: Vec<f64>,
    pub var_growth: f64,
    pub var_production: f64,
    pub var_expenditure: f64,
    /// `(intercept, loading, noise variance)`.
    pub unemployment: Option<(f64, f64, f64)>,
}

impl MixedFrequencyGdpModel {
    pub fn n_months(&self) -> usize {
        self.months.len()
    }

    pub fn n_indicators(&self) -> usize {
        self.indicators.ncols()
    }

    pub fn is_quarter_end(&self, t: usize) -> bool {
        self.months[t].month() % 3 == 0
    }

    /// `T x m` observation matrix: production, expenditure, then unemployment.
    pub fn observations(&self) -> DMatrix<f64> {
        let t_len = self.n_months();
        let m = 2 + self.unemployment.is_some() as usize;
        DMatrix::from_fn(t_len, m, |t, j| match j {
            0 => self.production[t],
            1 => self.expenditure[t],
            _ => self.unemployment.as_ref().map_or(MISSING, |u| u[t]),
        })
    }

    /// Monthly state-space form at the given parameters.
    pub fn state_space(&self, p: &MfParams) -> Result<StateSpaceModel> {
        let t_len = self.n_months();
        let k = self.n_indicators();
        if p.coefs.len() != k {
            return Err(Error::InvalidInput(format!(
                "{} indicator coefficients for {k} indicators",
                p.coefs.len()
            )));
        }
        let mut transition = DMatrix::zeros(3, 3);
        transition[(0, 0)] = p.rho;
        transition[(1, 0)] = 1.0;
        transition[(2, 1)] = 1.0;
        let mut state_noise = DMatrix::zeros(3, 3);
        state_noise[(0, 0)] = p.var_growth;
        let s = self.config.quarterly_scale;
        let m = 2 + self.unemployment.is_some() as usize;
        let mut design = DMatrix::zeros(m, 3);
        let mut obs_noise = DVector::zeros(m);
        for j in 0..2 {
            design.row_mut(j).fill(s);
        }
        obs_noise[0] = p.var_production;
        obs_noise[1] = p.var_expenditure;
        let mut obs_intercept = DVector::zeros(m);
        if self.unemployment.is_some() {
            let (d, l, v) = p
                .unemployment
                .ok_or_else(|| Error::InvalidInput("unemployment parameters missing".into()))?;
            design[(2, 0)] = l;
            obs_noise[2] = v;
            obs_intercept[2] = d;
        }
        // Row t drives the move into t + 1.
        let path = DMatrix::from_fn(t_len, 3, |t, j| {
            if j > 0 {
                return 0.0;
            }
            let next = (t + 1).min(t_len - 1);
            p.intercept + (0..k).map(|i| p.coefs[i] * self.indicators[(next, i)]).sum::<f64>()
        });
        let mut model = StateSpaceModel::new(
            transition,
            state_noise,
            design,
            obs_noise,
            DMatrix::identity(3, 3) * DIFFUSE_VARIANCE,
        )?;
        model.obs_intercept = obs_intercept;
        model.state_intercept_path = Some(path);
        Ok(model)
    }
}

fn check_quarter_end(d: NaiveDate) -> Result<()> {
    if d.month() % 3 != 0 {
        return Err(Error::InvalidInput(format!(
            "quarterly observation dated {d} is not in a quarter-end month"
        )));
    }
    Ok(())
}

/// Arrange two quarterly measures and optional monthly indicators on a
/// common monthly grid running from the first month of the first quarter
/// to the last quarter-end month.
///
/// `quarterly` must have exactly two columns (production, expenditure
/// measures) dated in months 3, 6, 9 or 12. The monthly panel must be
/// complete over that grid; its extra months are ignored.
pub fn build_mf_model(
    quarterly: &TimeSeriesPanel,
    monthly: Option<&TimeSeriesPanel>,
    config: MfModelConfig,
) -> Result<MixedFrequencyGdpModel> {
    config.validate()?;
    if quarterly.n_series() != 2 {
        return Err(Error::InvalidInput(format!(
            "expected two quarterly GDP measures, found {}",
            quarterly.n_series()
        )));
    }
    if quarterly.n_obs() < 4 {
        return Err(Error::InvalidInput("at least four quarters are required".into()));
    }
    for d in quarterly.dates() {
        check_quarter_end(*d)?;
    }
    let first_q = first_of_month(quarterly.dates()[0]);
    let start = first_q - Months::new(2);
    let last = month_index(*quarterly.dates().last().unwrap());
    let t_len = (last - month_index(start) + 1) as usize;
    let months: Vec<NaiveDate> = (0..t_len).map(|i| start + Months::new(i as u32)).collect();
    let mut production = vec![MISSING; t_len];
    let mut expenditure = vec![MISSING; t_len];
    for (i, d) in quarterly.dates().iter().enumerate() {
        let t = (month_index(*d) - month_index(start)) as usize;
        production[t] = quarterly.values()[(i, 0)];
        expenditure[t] = quarterly.values()[(i, 1)];
    }
    if production.iter().chain(&expenditure).all(|v| is_missing(*v)) {
        return Err(Error::MissingValues("no quarterly GDP observations".into()));
    }
    let mut indicator_names = Vec::new();
    let mut indicator_cols = Vec::new();
    let mut unemployment = None;
    if let Some(mp) = monthly {
        let rows: Vec<usize> = months
            .iter()
            .map(|m| {
                mp.dates()
                    .iter()
                    .position(|d| month_index(*d) == month_index(*m))
                    .ok_or_else(|| {
                        Error::MissingValues(format!("monthly indicators have no row for {m}"))
                    })
            })
            .collect::<Result<_>>()?;
        for (j, name) in mp.names().iter().enumerate() {
            let col: Vec<f64> = rows.iter().map(|&r| mp.values()[(r, j)]).collect();
            if col.iter().any(|v| is_missing(*v)) {
                return Err(Error::MissingValues(format!(
                    "monthly series '{name}' has gaps inside the estimation sample"
                )));
            }
            if config.unemployment_column.as_deref() == Some(name.as_str()) {
                unemployment = Some(col);
            } else {
                indicator_names.push(name.clone());
                indicator_cols.push(col);
            }
        }
    }
    let indicators = DMatrix::from_fn(t_len, indicator_cols.len(), |t, j| indicator_cols[j][t]);
    Ok(MixedFrequencyGdpModel {
        months,
        production,
        expenditure,
        indicator_names,
        indicators,
        unemployment,
        config,
    })
}
