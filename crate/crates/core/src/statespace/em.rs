use nalgebra::{DMatrix, DVector};

use super::factor::{starting_params, FactorParams};
use super::kalman::{kalman_smoother, SmootherOutput};
use super::summary::{explained_variance, ExplainedVariance};
use crate::error::{Error, Result};
use crate::linalg::symmetrize;
use crate::nsfactor::initial_loadings_values;
use crate::panel::{is_missing, TimeSeriesPanel};
use crate::transforms::{adf_test, AdfResult, AdfSpec, LagRule};

#[derive(Debug, Clone, PartialEq)]
pub struct EmOptions {
    pub var_order: usize,
    pub max_iter: usize,
    /// Stop once the relative log-likelihood change falls below this.
    pub tol: f64,
    /// Largest tolerated log-likelihood decrease, relative to `max(1, |loglik|)`.
    pub decrease_tol: f64,
    pub estimate_intercept: bool,
    pub noise_floor: f64,
    /// Level of the ADF test that labels factors stationary.
    pub adf_level: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            var_order: 1,
            max_iter: 500,
            tol: 1e-6,
            decrease_tol: 1e-8,
            estimate_intercept: false,
            noise_floor: 1e-8,
            adf_level: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EstimatedFactorModel {
    pub params: FactorParams,
    /// Smoothed factor paths, `T x r`.
    pub factors: DMatrix<f64>,
    /// Smoothed standard deviations of the factors.
    pub factor_sd: DMatrix<f64>,
    /// Log-likelihood at each E-step.
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub stationary: Vec<bool>,
    pub adf: Vec<AdfResult>,
    pub explained: ExplainedVariance,
}

impl EstimatedFactorModel {
    pub fn loglik(&self) -> f64 {
        *self.loglik_trace.last().unwrap_or(&f64::NAN)
    }

    /// Fitted common component `f_t' L'`, `T x m`.
    pub fn common_component(&self) -> DMatrix<f64> {
        &self.factors * self.params.loadings.transpose()
    }
}

/// Missing cells replaced by their column mean (used for starting values only).
pub(crate) fn fill_missing(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = x.clone();
    for j in 0..x.ncols() {
        let obs: Vec<f64> = x.column(j).iter().copied().filter(|v| !is_missing(*v)).collect();
        if obs.is_empty() {
            return Err(Error::MissingValues(format!("column {j} has no observations")));
        }
        let mean = obs.iter().sum::<f64>() / obs.len() as f64;
        for v in out.column_mut(j).iter_mut() {
            if is_missing(*v) {
                *v = mean;
            }
        }
    }
    Ok(out)
}

pub(crate) fn initial_params(x: &DMatrix<f64>, r: usize, var_order: usize) -> Result<FactorParams> {
    let filled = fill_missing(x)?;
    let init = initial_loadings_values(&filled, r)?;
    starting_params(&filled, &init.loadings, &init.factors, var_order)
}

/// Factor second moments `E[f_t f_t' | Y]` summed over time.
fn factor_moment(sm: &SmootherOutput, r: usize) -> DMatrix<f64> {
    let mut acc = DMatrix::zeros(r, r);
    for (a, v) in sm.means.iter().zip(&sm.covs) {
        let f = a.rows(0, r);
        acc += &f * f.transpose() + v.view((0, 0), (r, r));
    }
    acc
}

fn m_step(
    x: &DMatrix<f64>,
    sm: &SmootherOutput,
    params: &FactorParams,
    opts: &EmOptions,
) -> Result<FactorParams> {
    let (t_len, m) = x.shape();
    let r = params.n_factors();
    let n = r * params.var_order();
    let mut loadings = DMatrix::zeros(m, r);
    let mut noise_var = DVector::zeros(m);
    for i in 0..m {
        let mut a = DMatrix::<f64>::zeros(r, r);
        let mut b = DVector::<f64>::zeros(r);
        let mut count = 0usize;
        for t in 0..t_len {
            let y = x[(t, i)];
            if is_missing(y) {
                continue;
            }
            let f = sm.means[t].rows(0, r);
            a += &f * f.transpose() + sm.covs[t].view((0, 0), (r, r));
            b += f * y;
            count += 1;
        }
        if count == 0 {
            return Err(Error::MissingValues(format!("series {i} is never observed")));
        }
        let li = a
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Singular {
                what: format!("loading moment matrix of series {i}"),
                cond: f64::INFINITY,
            })?
            .solve(&b);
        let mut ss = 0.0;
        for t in 0..t_len {
            let y = x[(t, i)];
            if is_missing(y) {
                continue;
            }
            let f = sm.means[t].rows(0, r);
            let e = y - li.dot(&f);
            let v = sm.covs[t].view((0, 0), (r, r));
            ss += e * e + (li.transpose() * v * &li)[(0, 0)];
        }
        loadings.row_mut(i).copy_from(&li.transpose());
        noise_var[i] = (ss / count as f64).max(opts.noise_floor);
    }

    // VAR(p) on the stacked state: f_t = d + B a_{t-1} + u_t.
    let k = n + opts.estimate_intercept as usize;
    let mut sxx = DMatrix::<f64>::zeros(k, k);
    let mut syx = DMatrix::<f64>::zeros(r, k);
    let mut syy = DMatrix::<f64>::zeros(r, r);
    for t in 1..t_len {
        let prev = &sm.means[t - 1];
        let cur = sm.means[t].rows(0, r);
        let mut xm = DVector::zeros(k);
        xm.rows_mut(0, n).copy_from(prev);
        let mut xx = &xm * xm.transpose();
        let mut block = xx.view_mut((0, 0), (n, n));
        block += &sm.covs[t - 1];
        if opts.estimate_intercept {
            xm[n] = 1.0;
            xx.row_mut(n).copy_from(&xm.transpose());
            xx.column_mut(n).copy_from(&xm);
        }
        sxx += xx;
        // Cov(f_t, a_{t-1}) is the top block of Cov(a_{t-1}, a_t)'.
        let cross = sm.lag_covs[t - 1].transpose();
        let mut yx = &cur * xm.transpose();
        let mut block = yx.view_mut((0, 0), (r, n));
        block += cross.view((0, 0), (r, n));
        syx += yx;
        syy += &cur * cur.transpose() + sm.covs[t].view((0, 0), (r, r));
    }
    let chol = sxx.clone().cholesky().ok_or_else(|| Error::Singular {
        what: "VAR regressor moment matrix".into(),
        cond: f64::INFINITY,
    })?;
    let coef = chol.solve(&syx.transpose()).transpose();
    let mut factor_cov = symmetrize(&((&syy - &coef * syx.transpose()) / (t_len - 1) as f64));
    for i in 0..r {
        factor_cov[(i, i)] = factor_cov[(i, i)].max(opts.noise_floor);
    }
    let var_coefs = (0..params.var_order())
        .map(|j| coef.view((0, j * r), (r, r)).into_owned())
        .collect();
    let intercept = if opts.estimate_intercept {
        coef.column(n).into_owned()
    } else {
        params.intercept.clone()
    };
    Ok(FactorParams {
        loadings,
        var_coefs,
        factor_cov,
        noise_var,
        intercept,
        initial_mean: params.initial_mean.clone(),
        initial_cov: params.initial_cov.clone(),
    })
}

/// EM iterations from given starting parameters on a `T x m` matrix with NaN
/// for missing cells.
pub fn em_from(
    x: &DMatrix<f64>,
    start: FactorParams,
    opts: &EmOptions,
) -> Result<EstimatedFactorModel> {
    let r = start.n_factors();
    let mut params = start;
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut sm;
    loop {
        sm = kalman_smoother(&params.to_model()?, x)?;
        let ll = sm.loglik;
        if let Some(&prev) = trace.last() {
            if ll < prev - opts.decrease_tol * prev.abs().max(1.0) {
                return Err(Error::LikelihoodDecrease {
                    iter: trace.len(),
                    prev,
                    next: ll,
                });
            }
            trace.push(ll);
            if (ll - prev).abs() < opts.tol * prev.abs().max(1e-300) {
                converged = true;
                break;
            }
        } else {
            trace.push(ll);
        }
        if trace.len() > opts.max_iter {
            break;
        }
        let next = m_step(x, &sm, &params, opts)?;
        let g = next.identifying_rotation(&factor_moment(&sm, r))?;
        params = next.rotate(&g)?;
    }
    finish(x, params, sm, trace, converged, opts)
}

fn finish(
    x: &DMatrix<f64>,
    params: FactorParams,
    sm: SmootherOutput,
    trace: Vec<f64>,
    converged: bool,
    opts: &EmOptions,
) -> Result<EstimatedFactorModel> {
    let r = params.n_factors();
    let t_len = x.nrows();
    let factors = DMatrix::from_fn(t_len, r, |t, j| sm.means[t][j]);
    let factor_sd = DMatrix::from_fn(t_len, r, |t, j| sm.covs[t][(j, j)].max(0.0).sqrt());
    let ev = explained_variance(&params.loadings, &factors, x)?;
    // Order factors by explained variance.
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| ev.shares[b].total_cmp(&ev.shares[a]));
    let perm = DMatrix::from_fn(r, r, |i, j| if order[i] == j { 1.0 } else { 0.0 });
    let params = params.rotate(&perm)?;
    let factors = &factors * perm.transpose();
    let factor_sd = &factor_sd * perm.transpose();
    let explained = explained_variance(&params.loadings, &factors, x)?;
    let mut adf = Vec::with_capacity(r);
    for j in 0..r {
        let path: Vec<f64> = factors.column(j).iter().copied().collect();
        adf.push(adf_test(&path, AdfSpec::Constant, None, LagRule::Bic)?);
    }
    let stationary = adf.iter().map(|a| a.p_value < opts.adf_level).collect();
    Ok(EstimatedFactorModel {
        params,
        factors,
        factor_sd,
        iterations: trace.len(),
        loglik_trace: trace,
        converged,
        stationary,
        adf,
        explained,
    })
}

/// Maximum-likelihood dynamic factor model by EM, started from the
/// eigenvectors of the lag-one generalized covariance.
pub fn em_estimate_values(
    x: &DMatrix<f64>,
    r: usize,
    opts: &EmOptions,
) -> Result<EstimatedFactorModel> {
    let start = initial_params(x, r, opts.var_order)?;
    em_from(x, start, opts)
}

pub fn em_estimate(
    panel: &TimeSeriesPanel,
    r: usize,
    opts: &EmOptions,
) -> Result<EstimatedFactorModel> {
    em_estimate_values(panel.values(), r, opts)
}
