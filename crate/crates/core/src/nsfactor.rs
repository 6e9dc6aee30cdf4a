//! Factor-number selection and initial estimates for panels that may contain
//! integrated common factors.
//!
//! The lag-k generalized covariance normalizes by `T^{2d+D}` so that it has a
//! non-degenerate limit for I(d) data. Squared canonical correlations between
//! `X_t` and `X_{t-k}` drive the chi-square test on the number of factors.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{column_sign_rule, inv_sqrt_spd, sym_eigen_desc, symmetrize};
use crate::panel::TimeSeriesPanel;
use crate::special::{chi2_quantile, std_normal_quantile};

/// Gram matrices with a condition number at or above this are rejected.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedCovariance {
    pub k: usize,
    pub d: u32,
    pub drift: bool,
    pub matrix: DMatrix<f64>,
    /// Number of lagged products in the sum, `T - k`.
    pub t_used: usize,
}

fn require_complete(x: &DMatrix<f64>, what: &str) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::MissingValues(what.to_string()));
    }
    Ok(())
}

/// Lag-k generalized covariance of a complete `T x m` data matrix.
///
/// With `2d + D = 0` the scale is `1/T`, i.e. the ordinary (biased) sample
/// autocovariance.
pub fn generalized_cov_matrix(
    x: &DMatrix<f64>,
    k: usize,
    d: u32,
    drift: bool,
) -> Result<GeneralizedCovariance> {
    let (t, m) = x.shape();
    require_complete(x, "generalized covariance input")?;
    if k >= t || t <= k + 2 {
        return Err(Error::InvalidInput(format!(
            "lag {k} too large for {t} observations"
        )));
    }
    let mean = column_means(x);
    let centred = DMatrix::from_fn(t, m, |i, j| x[(i, j)] - mean[j]);
    let lagged = centred.rows(0, t - k);
    let current = centred.rows(k, t - k);
    let exponent = 2 * d as i32 + drift as i32;
    let scale = if exponent == 0 {
        1.0 / t as f64
    } else {
        (t as f64).powi(-exponent)
    };
    Ok(GeneralizedCovariance {
        k,
        d,
        drift,
        matrix: lagged.transpose() * current * scale,
        t_used: t - k,
    })
}

pub fn generalized_cov(
    panel: &TimeSeriesPanel,
    k: usize,
    d: u32,
    drift: bool,
) -> Result<GeneralizedCovariance> {
    generalized_cov_matrix(panel.values(), k, d, drift)
}

// Constant columns get their exact value so centring yields exact zeros.
fn column_means(x: &DMatrix<f64>) -> Vec<f64> {
    (0..x.ncols())
        .map(|j| {
            let col = x.column(j);
            if col.iter().all(|v| *v == col[0]) {
                col[0]
            } else {
                col.mean()
            }
        })
        .collect()
}

fn centred_block(x: &DMatrix<f64>, start: usize, len: usize) -> DMatrix<f64> {
    let block = x.rows(start, len).into_owned();
    let mean = column_means(&block);
    DMatrix::from_fn(len, x.ncols(), |i, j| block[(i, j)] - mean[j])
}

/// Squared canonical covariance matrix between `X_t` and `X_{t-k}`, in the
/// symmetric form `S00^{-1/2} S0k Skk^{-1} Sk0 S00^{-1/2}`.
///
/// Each block is centred on its own mean, so the eigenvalues are the squared
/// sample canonical correlations of the two blocks.
pub fn canonical_matrix_values(x: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let t = x.nrows();
    require_complete(x, "canonical matrix input")?;
    if k == 0 || t <= k + 2 {
        return Err(Error::InvalidInput(format!(
            "canonical matrix needs 0 < k < T - 2 (k = {k}, T = {t})"
        )));
    }
    let n = t - k;
    let current = centred_block(x, k, n);
    let lagged = centred_block(x, 0, n);
    let s00 = current.transpose() * &current;
    let skk = lagged.transpose() * &lagged;
    let s0k = current.transpose() * &lagged;
    let w0 = inv_sqrt_spd(&s00, MAX_GRAM_CONDITION, "current Gram matrix")?;
    let wk = inv_sqrt_spd(&skk, MAX_GRAM_CONDITION, "lagged Gram matrix")?;
    let c = &w0 * s0k * wk;
    Ok(symmetrize(&(&c * c.transpose())))
}

pub fn canonical_matrix(panel: &TimeSeriesPanel, k: usize) -> Result<DMatrix<f64>> {
    canonical_matrix_values(panel.values(), k)
}

/// Decreasing eigenvalues of the canonical matrix, clipped into `[0, 1)`.
pub fn canonical_eigenvalues(x: &DMatrix<f64>, k: usize) -> Result<Vec<f64>> {
    let (vals, _) = sym_eigen_desc(&canonical_matrix_values(x, k)?)?;
    Ok(vals.iter().map(|v| v.clamp(0.0, 1.0 - 1e-12)).collect())
}

/// `-(T-k) * sum log(1 - lambda)` over the `m - r` smallest eigenvalues.
pub fn s_statistic(eigen_desc: &[f64], r: usize, n_eff: usize) -> f64 {
    let tail = &eigen_desc[r.min(eigen_desc.len())..];
    let sum: f64 = tail.iter().map(|l| (1.0 - l).ln()).sum();
    -(n_eff as f64) * sum
}

/// Index of the first candidate whose statistic does not exceed its critical
/// value; `s.len()` if every candidate is rejected.
pub fn sequential_decision(s: &[f64], critical: &[f64]) -> usize {
    s.iter()
        .zip(critical)
        .position(|(s, c)| s <= c)
        .unwrap_or(s.len())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorTestOptions {
    pub lags: Vec<usize>,
    /// Significance level of the sequential test.
    pub level: f64,
    /// Lag whose statistics drive the decision; must be in `lags`.
    pub decision_lag: usize,
}

impl Default for FactorTestOptions {
    fn default() -> Self {
        FactorTestOptions {
            lags: vec![1, 2, 3, 4, 5],
            level: 0.05,
            decision_lag: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorNumberRow {
    pub r: usize,
    pub dof: usize,
    /// Lower and upper chi-square quantiles at `level` and `1 - level`.
    pub q_lower: f64,
    pub q_upper: f64,
    /// One statistic per lag, in the order of `FactorNumberTable::lags`.
    pub s: Vec<f64>,
    pub reject: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorNumberTable {
    pub lags: Vec<usize>,
    pub level: f64,
    pub decision_lag: usize,
    pub rows: Vec<FactorNumberRow>,
    /// Canonical eigenvalues per lag, decreasing.
    pub eigenvalues: Vec<Vec<f64>>,
    pub selected: usize,
}

impl FactorNumberTable {
    /// Statistics for one lag across all candidate counts.
    pub fn s_column(&self, lag: usize) -> Option<Vec<f64>> {
        let j = self.lags.iter().position(|&l| l == lag)?;
        Some(self.rows.iter().map(|row| row.s[j]).collect())
    }
}

pub fn factor_number_test_values(
    x: &DMatrix<f64>,
    opts: &FactorTestOptions,
) -> Result<(usize, FactorNumberTable)> {
    if opts.lags.is_empty() {
        return Err(Error::Config("factor test lag set is empty".into()));
    }
    if !(opts.level > 0.0 && opts.level < 0.5) {
        return Err(Error::Config(format!(
            "significance level {} outside (0, 0.5)",
            opts.level
        )));
    }
    let decision_col = opts
        .lags
        .iter()
        .position(|&l| l == opts.decision_lag)
        .ok_or_else(|| {
            Error::Config(format!(
                "decision lag {} not in the lag set",
                opts.decision_lag
            ))
        })?;
    let (t, m) = x.shape();
    let eigenvalues = opts
        .lags
        .iter()
        .map(|&k| canonical_eigenvalues(x, k))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(m);
    for r in 0..m {
        let dof = (m - r) * (m - r);
        let q_lower = chi2_quantile(opts.level, dof)?;
        let q_upper = chi2_quantile(1.0 - opts.level, dof)?;
        let s: Vec<f64> = opts
            .lags
            .iter()
            .zip(&eigenvalues)
            .map(|(&k, ev)| s_statistic(ev, r, t - k))
            .collect();
        let reject = s.iter().map(|v| *v > q_upper).collect();
        rows.push(FactorNumberRow {
            r,
            dof,
            q_lower,
            q_upper,
            s,
            reject,
        });
    }
    let s_dec: Vec<f64> = rows.iter().map(|row| row.s[decision_col]).collect();
    let crit: Vec<f64> = rows.iter().map(|row| row.q_upper).collect();
    let selected = sequential_decision(&s_dec, &crit);
    Ok((
        selected,
        FactorNumberTable {
            lags: opts.lags.clone(),
            level: opts.level,
            decision_lag: opts.decision_lag,
            rows,
            eigenvalues,
            selected,
        },
    ))
}

/// Sequential chi-square test on the number of common factors.
pub fn factor_number_test(
    panel: &TimeSeriesPanel,
    opts: &FactorTestOptions,
) -> Result<(usize, FactorNumberTable)> {
    factor_number_test_values(panel.values(), opts)
}

/// Diagonal rescaling `1/T^{d_i}` for integrated factors and `1/sqrt(T)` for
/// stationary ones.
pub fn scaling_matrix(t: usize, orders: &[u32], n_stationary: usize) -> Result<DMatrix<f64>> {
    if t <= 1 {
        return Err(Error::InvalidInput("scaling matrix needs T > 1".into()));
    }
    if orders.is_empty() && n_stationary == 0 {
        return Err(Error::InvalidInput("empty factor specification".into()));
    }
    if orders.contains(&0) {
        return Err(Error::InvalidInput(
            "integration orders of non-stationary factors must be >= 1".into(),
        ));
    }
    let tf = t as f64;
    let diag: Vec<f64> = orders
        .iter()
        .map(|&d| tf.powi(-(d as i32)))
        .chain(std::iter::repeat_n(1.0 / tf.sqrt(), n_stationary))
        .collect();
    Ok(DMatrix::from_diagonal(&DVector::from_vec(diag)))
}

/// Per-series t-test on the mean of d-th differences; true when any series
/// shows a significant drift at `level`.
pub fn detect_drift(x: &DMatrix<f64>, d: u32, level: f64) -> Result<bool> {
    require_complete(x, "drift test input")?;
    let crit = std_normal_quantile(1.0 - level / 2.0);
    for j in 0..x.ncols() {
        let mut s: Vec<f64> = x.column(j).iter().copied().collect();
        for _ in 0..d {
            s = s.windows(2).map(|w| w[1] - w[0]).collect();
        }
        if s.len() < 3 {
            return Err(Error::InvalidInput("series too short for drift test".into()));
        }
        let n = s.len() as f64;
        let mean = s.iter().sum::<f64>() / n;
        let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        if var > 0.0 && (mean / (var / n).sqrt()).abs() > crit {
            return Ok(true);
        }
    }
    Ok(false)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialFactorEstimate {
    /// `m x r`, orthonormal columns.
    pub loadings: DMatrix<f64>,
    /// `T x r` projections `X L`.
    pub factors: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

impl InitialFactorEstimate {
    /// Factor paths multiplied by a diagonal scaling matrix.
    pub fn scaled_factors(&self, scaling: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if scaling.shape() != (self.loadings.ncols(), self.loadings.ncols()) {
            return Err(Error::InvalidInput("scaling matrix dimension mismatch".into()));
        }
        Ok(&self.factors * scaling)
    }
}

/// Top-r eigenvectors of the symmetrized lag-one generalized covariance.
pub fn initial_loadings_values(x: &DMatrix<f64>, r: usize) -> Result<InitialFactorEstimate> {
    let m = x.ncols();
    if r == 0 || r >= m {
        return Err(Error::InvalidInput(format!(
            "factor count {r} must satisfy 0 < r < m = {m}"
        )));
    }
    let c = generalized_cov_matrix(x, 1, 1, false)?;
    let (vals, vecs) = sym_eigen_desc(&symmetrize(&c.matrix))?;
    let mut loadings = vecs.columns(0, r).into_owned();
    let signs = column_sign_rule(&loadings);
    for j in 0..r {
        loadings.column_mut(j).scale_mut(signs[j]);
    }
    let factors = x * &loadings;
    Ok(InitialFactorEstimate {
        loadings,
        factors,
        eigenvalues: vals.iter().take(r).copied().collect(),
    })
}

pub fn initial_loadings(panel: &TimeSeriesPanel, r: usize) -> Result<InitialFactorEstimate> {
    panel.require_complete("initial loadings")?;
    initial_loadings_values(panel.values(), r)
}
