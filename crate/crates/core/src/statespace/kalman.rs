//! Univariate (sequential) Kalman filter, fixed-interval smoother and
//! simulation smoother.
//!
//! Observations within a period are processed one element at a time, which
//! handles missing cells by skipping them and tolerates zero measurement
//! noise without inverting any covariance matrix.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::model::StateSpaceModel;
use crate::error::{Error, Result};
use crate::linalg::symmetrize;
use crate::panel::is_missing;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone)]
struct ElementStep {
    series: usize,
    v: f64,
    f: f64,
    k: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct FilterOutput {
    /// `a_{t|t-1}`.
    pub predicted_means: Vec<DVector<f64>>,
    pub predicted_covs: Vec<DMatrix<f64>>,
    /// `a_{t|t}`.
    pub filtered_means: Vec<DVector<f64>>,
    pub filtered_covs: Vec<DMatrix<f64>>,
    pub loglik: f64,
    /// Observed cells that contributed to the likelihood.
    pub n_used: usize,
    steps: Vec<Vec<ElementStep>>,
}

#[derive(Debug, Clone)]
pub struct SmootherOutput {
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
    /// `Cov(a_t, a_{t+1} | Y)` for `t = 0..T-1`.
    pub lag_covs: Vec<DMatrix<f64>>,
    pub loglik: f64,
}

fn check_dims(model: &StateSpaceModel, y: &DMatrix<f64>) -> Result<()> {
    model.validate()?;
    if y.ncols() != model.obs_dim() {
        return Err(Error::InvalidInput(format!(
            "{} observed series for a model with {}",
            y.ncols(),
            model.obs_dim()
        )));
    }
    if let Some(path) = &model.state_intercept_path {
        if path.nrows() + 1 < y.nrows() {
            return Err(Error::InvalidInput("intercept path shorter than sample".into()));
        }
    }
    Ok(())
}

fn max_diag(p: &DMatrix<f64>) -> f64 {
    p.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

fn run_filter(model: &StateSpaceModel, y: &DMatrix<f64>, keep_covs: bool) -> Result<FilterOutput> {
    check_dims(model, y)?;
    let t_len = y.nrows();
    let mut out = FilterOutput {
        predicted_means: Vec::with_capacity(t_len),
        predicted_covs: Vec::with_capacity(t_len),
        filtered_means: Vec::with_capacity(t_len),
        filtered_covs: Vec::with_capacity(if keep_covs { t_len } else { 0 }),
        loglik: 0.0,
        n_used: 0,
        steps: Vec::with_capacity(t_len),
    };
    let tt = &model.transition;
    let mut a = model.initial_mean.clone();
    let mut p = model.initial_cov.clone();
    for t in 0..t_len {
        out.predicted_means.push(a.clone());
        out.predicted_covs.push(p.clone());
        // Below this an innovation variance is rounding noise from an exact update.
        let tol = 1e-12 * max_diag(&p).max(1.0);
        let mut steps = Vec::new();
        for i in 0..model.obs_dim() {
            let obs = y[(t, i)];
            if is_missing(obs) {
                continue;
            }
            let z = model.design.row(i);
            let k = &p * z.transpose();
            let f = (z * &k)[(0, 0)] + model.obs_noise[i];
            if !f.is_finite() {
                return Err(Error::NonFiniteInnovation { t });
            }
            if model.obs_noise[i] < tol && f <= tol {
                continue;
            }
            let v = obs - model.obs_intercept[i] - (z * &a)[(0, 0)];
            out.loglik -= 0.5 * (LN_2PI + f.ln() + v * v / f);
            out.n_used += 1;
            a += &k * (v / f);
            p -= &k * k.transpose() / f;
            steps.push(ElementStep { series: i, v, f, k });
        }
        p = symmetrize(&p);
        out.filtered_means.push(a.clone());
        if keep_covs {
            out.filtered_covs.push(p.clone());
        }
        out.steps.push(steps);
        a = model.intercept_at(t) + tt * &a;
        p = symmetrize(&(tt * &p * tt.transpose() + &model.state_noise));
    }
    if !out.loglik.is_finite() {
        return Err(Error::Numeric("non-finite log-likelihood".into()));
    }
    Ok(out)
}

/// Forward filter with log-likelihood over the observed cells.
pub fn kalman_filter(model: &StateSpaceModel, y: &DMatrix<f64>) -> Result<FilterOutput> {
    run_filter(model, y, true)
}

/// Log-likelihood only.
pub fn loglik(model: &StateSpaceModel, y: &DMatrix<f64>) -> Result<f64> {
    Ok(run_filter(model, y, false)?.loglik)
}

// r <- z' v/F + L' r with L = I - k z / F.
fn back_r(r: &mut DVector<f64>, z: &DVector<f64>, s: &ElementStep) {
    let kr = s.k.dot(r);
    *r += z * ((s.v - kr) / s.f);
}

// N <- z'z/F + L' N L.
fn back_n(nm: &mut DMatrix<f64>, z: &DVector<f64>, s: &ElementStep) {
    let nk = &*nm * &s.k;
    let knk = s.k.dot(&nk);
    let f = s.f;
    *nm -= (z * nk.transpose() + &nk * z.transpose()) / f;
    *nm += z * z.transpose() * ((1.0 + knk / f) / f);
}

fn smooth_means_only(model: &StateSpaceModel, filt: &FilterOutput) -> Vec<DVector<f64>> {
    let t_len = filt.predicted_means.len();
    let n = model.state_dim();
    let tt_t = model.transition.transpose();
    let mut r = DVector::zeros(n);
    let mut means = vec![DVector::zeros(n); t_len];
    for t in (0..t_len).rev() {
        for s in filt.steps[t].iter().rev() {
            let z = model.design.row(s.series).transpose();
            back_r(&mut r, &z, s);
        }
        means[t] = &filt.predicted_means[t] + &filt.predicted_covs[t] * &r;
        r = &tt_t * r;
    }
    means
}

/// Fixed-interval smoother with lag-one cross covariances.
pub fn kalman_smoother(model: &StateSpaceModel, y: &DMatrix<f64>) -> Result<SmootherOutput> {
    let filt = run_filter(model, y, true)?;
    Ok(smooth_from_filter(model, &filt))
}

/// Smoothed moments are formed from the filtered covariance `P_{t|t}` rather
/// than the predicted one, so a diffuse initial variance does not get
/// multiplied through `P N P`.
pub fn smooth_from_filter(model: &StateSpaceModel, filt: &FilterOutput) -> SmootherOutput {
    let t_len = filt.predicted_means.len();
    let n = model.state_dim();
    let tt = &model.transition;
    let tt_t = tt.transpose();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut r = DVector::zeros(n);
    let mut nm = DMatrix::zeros(n, n);
    let mut means = vec![DVector::zeros(n); t_len];
    let mut covs = vec![DMatrix::zeros(n, n); t_len];
    let mut lag_covs = vec![DMatrix::zeros(n, n); t_len.saturating_sub(1)];
    // N_{t+1,0}, held for the cross covariance at t.
    let mut n_next: Option<DMatrix<f64>> = None;
    for t in (0..t_len).rev() {
        // Here r = T' r_{t+1,0} and nm = T' N_{t+1,0} T.
        let p = &filt.filtered_covs[t];
        means[t] = &filt.filtered_means[t] + p * &r;
        covs[t] = symmetrize(&(p - p * &nm * p));
        if let Some(n1) = &n_next {
            let p1 = &filt.predicted_covs[t + 1];
            lag_covs[t] = p * &tt_t * (&eye - n1 * p1);
        }
        for s in filt.steps[t].iter().rev() {
            let z = model.design.row(s.series).transpose();
            back_r(&mut r, &z, s);
            back_n(&mut nm, &z, s);
        }
        n_next = Some(nm.clone());
        r = &tt_t * r;
        nm = &tt_t * nm * tt;
    }
    SmootherOutput {
        means,
        covs,
        lag_covs,
        loglik: filt.loglik,
    }
}

/// Draw a state path from its joint posterior given `y`.
///
/// Uses the mean-correction construction: simulate `(a+, y+)` from the
/// model, then return `a+ - E[a+|y+] + E[a|y]`, with both conditional means
/// obtained from one smoothing pass on `y - y+`.
pub fn simulation_smoother<R: Rng + ?Sized>(
    model: &StateSpaceModel,
    y: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    check_dims(model, y)?;
    let (t_len, m) = y.shape();
    let (states, sim_obs) = model.simulate(t_len, rng)?;
    let diff = DMatrix::from_fn(t_len, m, |t, i| {
        if is_missing(y[(t, i)]) {
            f64::NAN
        } else {
            y[(t, i)] - sim_obs[(t, i)]
        }
    });
    let centred = model.without_means();
    let filt = run_filter(&centred, &diff, false)?;
    let correction = smooth_means_only(&centred, &filt);
    let mut out = states;
    for (t, c) in correction.iter().enumerate() {
        let row = out.row(t) + c.transpose();
        out.set_row(t, &row);
    }
    Ok(out)
}
