//! Seeded data-generating processes with known ground truth.

use chrono::{Datelike, Months, NaiveDate};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{column_sign_rule, thin_qr, variance};
use crate::panel::{Frequency, TimeSeriesPanel};
use crate::rng::{self, std_normal};

#[derive(Debug, Clone, PartialEq)]
pub struct FactorDgpSpec {
    pub m: usize,
    /// Integration order of each non-stationary factor.
    pub orders: Vec<u32>,
    /// AR(1) coefficient of each stationary factor.
    pub ar_coefs: Vec<f64>,
    /// Drift added to the innovations of the non-stationary factors.
    pub drift: f64,
    /// Average measurement noise variance; per-series variances are drawn
    /// uniformly in `[0.5, 1.5]` times this.
    pub noise_var: f64,
    pub t_len: usize,
    pub start: NaiveDate,
}

impl FactorDgpSpec {
    /// `r1` random walks and `r2` AR(1) factors with coefficient 0.7.
    pub fn new(m: usize, r1: usize, r2: usize, t_len: usize) -> Self {
        FactorDgpSpec {
            m,
            orders: vec![1; r1],
            ar_coefs: vec![0.7; r2],
            drift: 0.0,
            noise_var: 1.0,
            t_len,
            start: NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date"),
        }
    }

    pub fn r1(&self) -> usize {
        self.orders.len()
    }

    pub fn r2(&self) -> usize {
        self.ar_coefs.len()
    }

    pub fn r(&self) -> usize {
        self.r1() + self.r2()
    }

    pub fn validate(&self) -> Result<()> {
        if self.r() == 0 || self.r() >= self.m {
            return Err(Error::InvalidInput(format!(
                "need 0 < r1 + r2 < m (got r = {}, m = {})",
                self.r(),
                self.m
            )));
        }
        if self.orders.contains(&0) {
            return Err(Error::InvalidInput("integration orders must be >= 1".into()));
        }
        if self.ar_coefs.iter().any(|a| !(a.abs() < 1.0)) {
            return Err(Error::InvalidInput(
                "stationary AR coefficients must lie inside the unit circle".into(),
            ));
        }
        if !(self.noise_var >= 0.0) || self.t_len < 2 {
            return Err(Error::InvalidInput("invalid noise variance or length".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgpTruth {
    /// `m x r`, orthonormal columns.
    pub loadings: DMatrix<f64>,
    /// `T x r`, non-stationary factors first.
    pub factors: DMatrix<f64>,
    pub stationary: Vec<bool>,
    pub noise_var: DVector<f64>,
}

/// Monthly panel `X = F L' + E` with known loadings and factors.
pub fn gen_factor_panel(spec: &FactorDgpSpec, seed: u64) -> Result<(TimeSeriesPanel, DgpTruth)> {
    spec.validate()?;
    let mut g = rng::seeded(seed);
    let (t_len, m, r) = (spec.t_len, spec.m, spec.r());
    let raw = DMatrix::from_fn(m, r, |_, _| std_normal(&mut g));
    let (q, _) = thin_qr(&raw);
    let signs = column_sign_rule(&q);
    let loadings = q * DMatrix::from_diagonal(&signs);

    let mut factors = DMatrix::zeros(t_len, r);
    for (j, &d) in spec.orders.iter().enumerate() {
        let mut path: Vec<f64> = (0..t_len).map(|_| spec.drift + std_normal(&mut g)).collect();
        for _ in 0..d {
            let mut acc = 0.0;
            for v in path.iter_mut() {
                acc += *v;
                *v = acc;
            }
        }
        factors.set_column(j, &DVector::from_vec(path));
    }
    for (k, &a) in spec.ar_coefs.iter().enumerate() {
        let j = spec.r1() + k;
        let mut prev = std_normal(&mut g) / (1.0 - a * a).sqrt();
        for t in 0..t_len {
            prev = a * prev + std_normal(&mut g);
            factors[(t, j)] = prev;
        }
    }
    let noise_var =
        DVector::from_fn(m, |_, _| spec.noise_var * (0.5 + rand::Rng::random::<f64>(&mut g)));
    let noise = DMatrix::from_fn(t_len, m, |_, i| noise_var[i].sqrt() * std_normal(&mut g));
    let x = &factors * loadings.transpose() + noise;
    let names = (1..=m).map(|i| format!("x{i}")).collect();
    let panel = TimeSeriesPanel::monthly_from(spec.start, names, x)?;
    let stationary = (0..r).map(|j| j >= spec.r1()).collect();
    Ok((
        panel,
        DgpTruth {
            loadings,
            factors,
            stationary,
            noise_var,
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MfGdpSpec {
    /// Number of months; must be a multiple of three.
    pub months: usize,
    pub rho: f64,
    /// Innovation variance of latent monthly growth.
    pub growth_var: f64,
    /// Coefficients of latent growth on the indicators (one per indicator).
    pub indicator_coefs: Vec<f64>,
    pub indicator_ar: f64,
    /// Target variance ratios `var(aggregate) / var(measure)` in `(0, 1]`.
    pub xi_production: f64,
    pub xi_expenditure: f64,
    /// Optional unemployment measurement `(loading, noise variance)`.
    pub unemployment: Option<(f64, f64)>,
    /// First month; must open a calendar quarter.
    pub start: NaiveDate,
}

impl Default for MfGdpSpec {
    fn default() -> Self {
        MfGdpSpec {
            months: 360,
            rho: 0.5,
            growth_var: 0.25,
            indicator_coefs: vec![0.4, -0.3],
            indicator_ar: 0.6,
            xi_production: 0.7,
            xi_expenditure: 0.8,
            unemployment: Some((-0.5, 0.1)),
            start: NaiveDate::from_ymd_opt(1995, 1, 1).expect("valid date"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdpTruth {
    pub monthly_growth: Vec<f64>,
    /// Three-month sums at quarter-end months.
    pub quarterly_aggregate: Vec<f64>,
    pub noise_var_production: f64,
    pub noise_var_expenditure: f64,
}

#[derive(Debug, Clone)]
pub struct MfGdpData {
    /// Columns `gdp_p`, `gdp_e`, dated at quarter-end months.
    pub quarterly: TimeSeriesPanel,
    /// Indicators `z1..zk`, plus `unemployment` when configured.
    pub monthly: TimeSeriesPanel,
    pub truth: GdpTruth,
}

fn noise_for_ratio(xi: f64, var_aggregate: f64) -> Result<f64> {
    if !(xi > 0.0 && xi <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "variance ratio {xi} must lie in (0, 1] for a noisy measure"
        )));
    }
    Ok(var_aggregate * (1.0 / xi - 1.0))
}

/// Latent monthly growth `g_t = rho g_{t-1} + b'z_t + e_t` with AR(1)
/// indicators `z`, observed quarterly through two noisy three-month sums.
pub fn gen_mf_gdp(spec: &MfGdpSpec, seed: u64) -> Result<MfGdpData> {
    if spec.months == 0 || spec.months % 3 != 0 {
        return Err(Error::InvalidInput("month count must be a positive multiple of 3".into()));
    }
    if spec.start.day() != 1 || (spec.start.month() - 1) % 3 != 0 {
        return Err(Error::InvalidInput(
            "start must be the first day of a quarter's first month".into(),
        ));
    }
    if !(spec.rho.abs() < 1.0) || !(spec.indicator_ar.abs() < 1.0) || !(spec.growth_var > 0.0) {
        return Err(Error::InvalidInput("invalid autoregressive parameters".into()));
    }
    let mut g = rng::seeded(seed);
    let k = spec.indicator_coefs.len();
    let burn = 60;
    let total = spec.months + burn;
    let z_sd = 1.0 / (1.0 - spec.indicator_ar.powi(2)).sqrt();
    let mut z = DMatrix::zeros(total, k);
    let mut prev: Vec<f64> = (0..k).map(|_| z_sd * std_normal(&mut g)).collect();
    for t in 0..total {
        for j in 0..k {
            prev[j] = spec.indicator_ar * prev[j] + std_normal(&mut g);
            z[(t, j)] = prev[j];
        }
    }
    let sd = spec.growth_var.sqrt();
    let mut growth = vec![0.0; total];
    let mut last = 0.0;
    for t in 0..total {
        let push: f64 = (0..k).map(|j| spec.indicator_coefs[j] * z[(t, j)]).sum();
        last = spec.rho * last + push + sd * std_normal(&mut g);
        growth[t] = last;
    }
    let growth = growth[burn..].to_vec();
    let z = z.rows(burn, spec.months).into_owned();
    let quarters = spec.months / 3;
    let aggregate: Vec<f64> = (0..quarters)
        .map(|q| growth[3 * q] + growth[3 * q + 1] + growth[3 * q + 2])
        .collect();
    let var_agg = variance(&aggregate);
    let var_p = noise_for_ratio(spec.xi_production, var_agg)?;
    let var_e = noise_for_ratio(spec.xi_expenditure, var_agg)?;
    let qvals = DMatrix::from_fn(quarters, 2, |q, j| {
        let v = if j == 0 { var_p } else { var_e };
        aggregate[q] + v.sqrt() * std_normal(&mut g)
    });
    let qdates: Vec<NaiveDate> = (0..quarters)
        .map(|q| spec.start + Months::new(3 * q as u32 + 2))
        .collect();
    let quarterly = TimeSeriesPanel::new(
        qdates,
        vec!["gdp_p".into(), "gdp_e".into()],
        qvals,
        Frequency::Quarterly,
    )?;
    let mut names: Vec<String> = (1..=k).map(|j| format!("z{j}")).collect();
    let mut monthly = z;
    if let Some((loading, noise)) = spec.unemployment {
        let u = DVector::from_fn(spec.months, |t, _| {
            loading * growth[t] + noise.sqrt() * std_normal(&mut g)
        });
        monthly = monthly.insert_column(k, 0.0);
        monthly.set_column(k, &u);
        names.push("unemployment".into());
    }
    let monthly = TimeSeriesPanel::monthly_from(spec.start, names, monthly)?;
    Ok(MfGdpData {
        quarterly,
        monthly,
        truth: GdpTruth {
            monthly_growth: growth,
            quarterly_aggregate: aggregate,
            noise_var_production: var_p,
            noise_var_expenditure: var_e,
        },
    })
}

/// Monthly growth whose one-step conditional quantiles are linear in
/// `[1, y_t, x_t]`:
/// `y_{t+1} = lag_coef y_t + risk_location x_t + (1 + risk_scale x_t) e_{t+1}`
/// with `x_t = |z_t|` for a Gaussian AR(1) `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct GarDgpSpec {
    pub months: usize,
    pub lag_coef: f64,
    pub risk_location: f64,
    pub risk_scale: f64,
    pub risk_ar: f64,
    pub start: NaiveDate,
}

impl Default for GarDgpSpec {
    fn default() -> Self {
        GarDgpSpec {
            months: 300,
            lag_coef: 0.3,
            risk_location: -0.8,
            risk_scale: 0.6,
            risk_ar: 0.8,
            start: NaiveDate::from_ymd_opt(1995, 1, 1).expect("valid date"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GarData {
    /// Column `gdp`.
    pub growth: TimeSeriesPanel,
    /// Column `risk`.
    pub risk: TimeSeriesPanel,
    /// Location and scale of `y_{t+1}` given data through `t`.
    pub next_location: Vec<f64>,
    pub next_scale: Vec<f64>,
}

impl GarData {
    /// True `tau`-quantile of `y_{t+1}` given data through `t`.
    pub fn next_quantile(&self, t: usize, tau: f64) -> f64 {
        self.next_location[t] + self.next_scale[t] * crate::special::std_normal_quantile(tau)
    }
}

pub fn gen_gar_data(spec: &GarDgpSpec, seed: u64) -> Result<GarData> {
    if spec.months < 20 {
        return Err(Error::InvalidInput("at least 20 months required".into()));
    }
    if spec.risk_ar.abs() >= 1.0 || spec.risk_scale < 0.0 {
        return Err(Error::InvalidInput("risk process must be stationary with nonnegative scale effect".into()));
    }
    let mut g = rng::seeded(seed);
    let n = spec.months;
    let burn = 60;
    let mut z = 0.0f64;
    let mut y = 0.0f64;
    let mut ys = Vec::with_capacity(n);
    let mut xs = Vec::with_capacity(n);
    let sd_z = (1.0 - spec.risk_ar * spec.risk_ar).sqrt();
    for t in 0..n + burn {
        let x = z.abs();
        if t >= burn {
            ys.push(y);
            xs.push(x);
        }
        y = spec.lag_coef * y + spec.risk_location * x + (1.0 + spec.risk_scale * x) * std_normal(&mut g);
        z = spec.risk_ar * z + sd_z * std_normal(&mut g);
    }
    let next_location = ys
        .iter()
        .zip(&xs)
        .map(|(y, x)| spec.lag_coef * y + spec.risk_location * x)
        .collect();
    let next_scale = xs.iter().map(|x| 1.0 + spec.risk_scale * x).collect();
    let growth = TimeSeriesPanel::monthly_from(spec.start, vec!["gdp".into()], DMatrix::from_vec(n, 1, ys))?;
    let risk = TimeSeriesPanel::monthly_from(spec.start, vec!["risk".into()], DMatrix::from_vec(n, 1, xs))?;
    Ok(GarData {
        growth,
        risk,
        next_location,
        next_scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::{adf_test, AdfSpec, LagRule};

    #[test]
    fn single_walk_without_noise_is_rank_one() {
        let mut spec = FactorDgpSpec::new(5, 1, 0, 200);
        spec.noise_var = 0.0;
        let (panel, truth) = gen_factor_panel(&spec, 3).unwrap();
        let x = panel.values();
        for i in 0..5 {
            let ratio = truth.loadings[(i, 0)];
            for t in 0..200 {
                assert!((x[(t, i)] - ratio * truth.factors[(t, 0)]).abs() < 1e-12);
            }
        }
        let sv = x.clone().svd(false, false).singular_values;
        let mut s: Vec<f64> = sv.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        assert!(s[1] < 1e-10 * s[0]);
    }

    #[test]
    fn same_seed_same_panel() {
        let spec = FactorDgpSpec::new(6, 1, 1, 100);
        let a = gen_factor_panel(&spec, 9).unwrap();
        let b = gen_factor_panel(&spec, 9).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        let c = gen_factor_panel(&spec, 10).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn generated_walks_look_integrated() {
        let spec = FactorDgpSpec::new(4, 1, 1, 1000);
        let mut kept = 0;
        for seed in 0..100 {
            let (_, truth) = gen_factor_panel(&spec, seed).unwrap();
            let path: Vec<f64> = truth.factors.column(0).iter().copied().collect();
            if adf_test(&path, AdfSpec::Constant, None, LagRule::Bic).unwrap().p_value > 0.05 {
                kept += 1;
            }
        }
        assert!(kept >= 90, "{kept}/100");
    }

    #[test]
    fn invalid_specs_error() {
        assert!(gen_factor_panel(&FactorDgpSpec::new(3, 2, 1, 50), 1).is_err());
        let mut spec = FactorDgpSpec::new(5, 1, 1, 50);
        spec.ar_coefs = vec![1.0];
        assert!(gen_factor_panel(&spec, 1).is_err());
        let bad = MfGdpSpec {
            months: 100,
            ..MfGdpSpec::default()
        };
        assert!(gen_mf_gdp(&bad, 1).is_err());
        let bad = MfGdpSpec {
            xi_production: 1.3,
            ..MfGdpSpec::default()
        };
        assert!(gen_mf_gdp(&bad, 1).is_err());
    }

    #[test]
    fn zero_noise_measures_coincide() {
        let spec = MfGdpSpec {
            xi_production: 1.0,
            xi_expenditure: 1.0,
            ..MfGdpSpec::default()
        };
        let data = gen_mf_gdp(&spec, 5).unwrap();
        let q = data.quarterly.values();
        for i in 0..q.nrows() {
            assert_eq!(q[(i, 0)], q[(i, 1)]);
            assert!((q[(i, 0)] - data.truth.quarterly_aggregate[i]).abs() < 1e-12);
        }
        assert_eq!(data.quarterly.dates()[0].month(), 3);
    }

    #[test]
    fn variance_ratio_is_recovered() {
        let spec = MfGdpSpec {
            months: 1200,
            ..MfGdpSpec::default()
        };
        let data = gen_mf_gdp(&spec, 17).unwrap();
        let p: Vec<f64> = data.quarterly.column(0);
        let xi = variance(&data.truth.quarterly_aggregate) / variance(&p);
        assert!((xi - 0.7).abs() < 0.1, "xi = {xi}");
    }

    #[test]
    fn mf_gdp_is_deterministic() {
        let spec = MfGdpSpec::default();
        let a = gen_mf_gdp(&spec, 2).unwrap();
        let b = gen_mf_gdp(&spec, 2).unwrap();
        assert_eq!(a.quarterly, b.quarterly);
        assert_eq!(a.monthly, b.monthly);
        assert_eq!(a.truth, b.truth);
    }
}
