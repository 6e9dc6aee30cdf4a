//! Gibbs sampler for the dynamic factor model: state paths from the
//! simulation smoother, then conjugate parameter draws.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::em::initial_params;
use super::factor::FactorParams;
use super::kalman::simulation_smoother;
use super::model::DIFFUSE_VARIANCE;
use crate::error::{Error, Result};
use crate::linalg::symmetrize;
use crate::panel::{is_missing, TimeSeriesPanel};
use crate::rng::{self, inv_gamma, inv_wishart, mvn_from_precision, ProjectRng};

/// Conjugate priors. Loadings `N(0, loading_var I)` per series, noise
/// variances `IG(noise_shape, noise_scale)`, VAR coefficients matrix-normal
/// with row covariance `Q` and column covariance `coef_var I`, and
/// `Q ~ IW(cov_df, cov_scale I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesPriors {
    pub loading_var: f64,
    pub noise_shape: f64,
    pub noise_scale: f64,
    pub coef_var: f64,
    /// Degrees of freedom in excess of `r + 1`.
    pub cov_df_extra: f64,
    pub cov_scale: f64,
}

impl Default for BayesPriors {
    fn default() -> Self {
        BayesPriors {
            loading_var: 10.0,
            noise_shape: 1.0,
            noise_scale: 1e-3,
            coef_var: 10.0,
            cov_df_extra: 1.0,
            cov_scale: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesOptions {
    pub var_order: usize,
    pub n_draws: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub priors: BayesPriors,
    /// Keep every retained factor path (memory `n_draws x T x r`).
    pub keep_paths: bool,
}

impl BayesOptions {
    pub fn new(n_draws: usize, seed: u64) -> Self {
        BayesOptions {
            var_order: 1,
            n_draws,
            burn_in: n_draws / 2,
            thin: 1,
            seed,
            priors: BayesPriors::default(),
            keep_paths: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    pub params: Vec<FactorParams>,
    /// Factor paths per retained draw (empty unless `keep_paths`).
    pub factor_paths: Vec<DMatrix<f64>>,
    pub factor_mean: DMatrix<f64>,
    pub factor_sd: DMatrix<f64>,
    /// Covariance draws that failed positive-definiteness and were redrawn.
    pub rejected_draws: usize,
    pub seed: u64,
}

impl PosteriorDraws {
    pub fn mean_loadings(&self) -> DMatrix<f64> {
        let n = self.params.len() as f64;
        let mut acc = DMatrix::zeros(self.params[0].n_series(), self.params[0].n_factors());
        for p in &self.params {
            acc += &p.loadings;
        }
        acc / n
    }
}

const MAX_REDRAWS: usize = 1000;

fn draw_loadings<R: Rng + ?Sized>(
    rng: &mut R,
    x: &DMatrix<f64>,
    f: &DMatrix<f64>,
    params: &mut FactorParams,
    priors: &BayesPriors,
) -> Result<()> {
    let (t_len, m) = x.shape();
    let r = f.ncols();
    for i in 0..m {
        let rows: Vec<usize> = (0..t_len).filter(|&t| !is_missing(x[(t, i)])).collect();
        let sig2 = params.noise_var[i];
        let mut prec = DMatrix::<f64>::identity(r, r) / priors.loading_var;
        let mut b = DVector::<f64>::zeros(r);
        for &t in &rows {
            let ft = f.row(t).transpose();
            prec += &ft * ft.transpose() / sig2;
            b += ft * (x[(t, i)] / sig2);
        }
        let li = mvn_from_precision(rng, &prec, &b).ok_or_else(|| Error::Singular {
            what: format!("loading posterior precision of series {i}"),
            cond: f64::INFINITY,
        })?;
        let rss: f64 = rows
            .iter()
            .map(|&t| (x[(t, i)] - f.row(t).transpose().dot(&li)).powi(2))
            .sum();
        let shape = priors.noise_shape + rows.len() as f64 / 2.0;
        let scale = priors.noise_scale + rss / 2.0;
        params.noise_var[i] = inv_gamma(rng, shape, scale)?;
        params.loadings.row_mut(i).copy_from(&li.transpose());
    }
    Ok(())
}

fn draw_dynamics<R: Rng + ?Sized>(
    rng: &mut R,
    states: &DMatrix<f64>,
    params: &mut FactorParams,
    priors: &BayesPriors,
    rejected: &mut usize,
) -> Result<()> {
    let r = params.n_factors();
    let n = states.ncols();
    let rows = states.nrows() - 1;
    let y = states.view((1, 0), (rows, r)).into_owned();
    let z = states.rows(0, rows).into_owned();
    let v0_inv = DMatrix::<f64>::identity(n, n) / priors.coef_var;
    let prec = z.transpose() * &z + v0_inv;
    let vn = prec
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular {
            what: "VAR coefficient posterior".into(),
            cond: f64::INFINITY,
        })?;
    let vn = symmetrize(&vn);
    let bn = y.transpose() * &z * &vn;
    let sn = symmetrize(
        &(DMatrix::<f64>::identity(r, r) * priors.cov_scale + y.transpose() * &y
            - &bn * &prec * bn.transpose()),
    );
    let df = r as f64 + 1.0 + priors.cov_df_extra + rows as f64;
    let vn_chol = vn
        .cholesky()
        .ok_or_else(|| Error::Numeric("VAR coefficient covariance not positive definite".into()))?
        .l();
    for _ in 0..MAX_REDRAWS {
        let Some(q) = inv_wishart(rng, df, &sn) else {
            *rejected += 1;
            continue;
        };
        let Some(q_chol) = q.clone().cholesky() else {
            *rejected += 1;
            continue;
        };
        let e = DMatrix::from_fn(r, n, |_, _| rng::std_normal(rng));
        let b = &bn + q_chol.l() * e * vn_chol.transpose();
        params.factor_cov = q;
        for j in 0..params.var_order() {
            params.var_coefs[j] = b.view((0, j * r), (r, r)).into_owned();
        }
        return Ok(());
    }
    Err(Error::Numeric(format!(
        "factor covariance draw not positive definite after {MAX_REDRAWS} attempts"
    )))
}

/// Gibbs sampler on a `T x m` matrix with NaN for missing cells.
pub fn ffbs_sample_values(
    x: &DMatrix<f64>,
    r: usize,
    opts: &BayesOptions,
) -> Result<PosteriorDraws> {
    if opts.n_draws == 0 || opts.thin == 0 {
        return Err(Error::Config("draw count and thinning must be positive".into()));
    }
    let mut g: ProjectRng = rng::seeded(opts.seed);
    let mut params = initial_params(x, r, opts.var_order)?;
    let p = opts.var_order;
    let n = r * p;
    let t_len = x.nrows();
    let mut rejected = 0;
    let mut kept = Vec::with_capacity(opts.n_draws);
    let mut paths = Vec::new();
    let mut sum = DMatrix::<f64>::zeros(t_len, r);
    let mut sq = DMatrix::<f64>::zeros(t_len, r);
    let total = opts.burn_in + opts.n_draws * opts.thin;
    for it in 0..total {
        let states = simulation_smoother(&params.to_model()?, x, &mut g)?;
        let f = states.columns(0, r).into_owned();
        draw_loadings(&mut g, x, &f, &mut params, &opts.priors)?;
        draw_dynamics(&mut g, &states, &mut params, &opts.priors, &mut rejected)?;
        // Per-draw identification; the initial-state prior stays fixed.
        let moment = f.transpose() * &f;
        let rot = params.identifying_rotation(&moment)?;
        params = params.rotate(&rot)?;
        params.initial_mean = DVector::zeros(n);
        params.initial_cov = DMatrix::identity(n, n) * DIFFUSE_VARIANCE;
        if it >= opts.burn_in && (it - opts.burn_in) % opts.thin == 0 {
            let fr = &f * rot.transpose();
            sum += &fr;
            sq += fr.component_mul(&fr);
            if opts.keep_paths {
                paths.push(fr);
            }
            kept.push(params.clone());
        }
    }
    let k = kept.len() as f64;
    let factor_mean = &sum / k;
    let factor_sd = DMatrix::from_fn(t_len, r, |t, j| {
        let mu = factor_mean[(t, j)];
        (sq[(t, j)] / k - mu * mu).max(0.0).sqrt()
    });
    Ok(PosteriorDraws {
        params: kept,
        factor_paths: paths,
        factor_mean,
        factor_sd,
        rejected_draws: rejected,
        seed: opts.seed,
    })
}

pub fn ffbs_sample(panel: &TimeSeriesPanel, r: usize, opts: &BayesOptions) -> Result<PosteriorDraws> {
    ffbs_sample_values(panel.values(), r, opts)
}
