use nalgebra::{DMatrix, DVector};

use super::model::{StateSpaceModel, DIFFUSE_VARIANCE};
use crate::error::{Error, Result};
use crate::linalg::{column_sign_rule, ols, sym_eigen_desc, symmetrize, thin_qr};

/// Parameters of `x_t = L f_t + e_t`, `f_t = d + B_1 f_{t-1} + ... + B_p f_{t-p} + u_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorParams {
    /// `m x r`.
    pub loadings: DMatrix<f64>,
    /// `B_1, ..., B_p`, each `r x r`.
    pub var_coefs: Vec<DMatrix<f64>>,
    /// `r x r` innovation covariance of the factors.
    pub factor_cov: DMatrix<f64>,
    /// Diagonal measurement noise variances.
    pub noise_var: DVector<f64>,
    pub intercept: DVector<f64>,
    /// Mean and covariance of the first stacked state `(f_1, ..., f_{1-p+1})`.
    pub initial_mean: DVector<f64>,
    pub initial_cov: DMatrix<f64>,
}

impl FactorParams {
    pub fn n_factors(&self) -> usize {
        self.loadings.ncols()
    }

    pub fn n_series(&self) -> usize {
        self.loadings.nrows()
    }

    pub fn var_order(&self) -> usize {
        self.var_coefs.len()
    }

    /// `[B_1 ... B_p]`, `r x rp`.
    pub fn stacked_coefs(&self) -> DMatrix<f64> {
        let r = self.n_factors();
        let p = self.var_order();
        let mut b = DMatrix::zeros(r, r * p);
        for (j, bj) in self.var_coefs.iter().enumerate() {
            b.view_mut((0, j * r), (r, r)).copy_from(bj);
        }
        b
    }

    /// Companion-form state-space representation.
    pub fn to_model(&self) -> Result<StateSpaceModel> {
        let r = self.n_factors();
        let p = self.var_order();
        if p == 0 {
            return Err(Error::InvalidInput("VAR order must be at least 1".into()));
        }
        let n = r * p;
        let mut transition = DMatrix::zeros(n, n);
        transition.view_mut((0, 0), (r, n)).copy_from(&self.stacked_coefs());
        for j in 1..p {
            for i in 0..r {
                transition[(j * r + i, (j - 1) * r + i)] = 1.0;
            }
        }
        let mut state_noise = DMatrix::zeros(n, n);
        state_noise.view_mut((0, 0), (r, r)).copy_from(&self.factor_cov);
        let mut design = DMatrix::zeros(self.n_series(), n);
        design.view_mut((0, 0), (self.n_series(), r)).copy_from(&self.loadings);
        let mut model = StateSpaceModel::new(
            transition,
            state_noise,
            design,
            self.noise_var.clone(),
            self.initial_cov.clone(),
        )?;
        model.state_intercept.rows_mut(0, r).copy_from(&self.intercept);
        model.initial_mean = self.initial_mean.clone();
        Ok(model)
    }

    /// Re-express the model for factors `G f`, keeping the likelihood unchanged.
    pub fn rotate(&self, g: &DMatrix<f64>) -> Result<FactorParams> {
        let r = self.n_factors();
        let g_inv = g
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Singular {
                what: "factor rotation".into(),
                cond: f64::INFINITY,
            })?;
        let p = self.var_order();
        let mut big = DMatrix::zeros(r * p, r * p);
        for j in 0..p {
            big.view_mut((j * r, j * r), (r, r)).copy_from(g);
        }
        Ok(FactorParams {
            loadings: &self.loadings * &g_inv,
            var_coefs: self.var_coefs.iter().map(|b| g * b * &g_inv).collect(),
            factor_cov: symmetrize(&(g * &self.factor_cov * g.transpose())),
            noise_var: self.noise_var.clone(),
            intercept: g * &self.intercept,
            initial_mean: &big * &self.initial_mean,
            initial_cov: symmetrize(&(&big * &self.initial_cov * big.transpose())),
        })
    }

    /// Rotation `G` that makes the loadings orthonormal, diagonalizes the
    /// second moment of `G f` (largest first) and applies the sign rule.
    pub fn identifying_rotation(&self, factor_second_moment: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let (q, rr) = thin_qr(&self.loadings);
        let moment = symmetrize(&(&rr * factor_second_moment * rr.transpose()));
        let (_, vecs) = sym_eigen_desc(&moment)?;
        let oriented = &q * &vecs;
        let signs = column_sign_rule(&oriented);
        let o = &vecs * DMatrix::from_diagonal(&signs);
        Ok(o.transpose() * rr)
    }
}

/// Least-squares starting values from initial loadings and factor paths
/// (missing cells in `x` must already be filled).
pub fn starting_params(
    x: &DMatrix<f64>,
    loadings: &DMatrix<f64>,
    factors: &DMatrix<f64>,
    var_order: usize,
) -> Result<FactorParams> {
    let (t_len, m) = x.shape();
    let r = loadings.ncols();
    let p = var_order;
    if p == 0 || t_len <= p + r * p + 1 {
        return Err(Error::InvalidInput("sample too short for the VAR order".into()));
    }
    let rows = t_len - p;
    let lagged = DMatrix::from_fn(rows, r * p, |i, c| {
        let (j, k) = (c / r, c % r);
        factors[(i + p - 1 - j, k)]
    });
    let mut b = DMatrix::zeros(r, r * p);
    let mut resid = DMatrix::zeros(rows, r);
    for k in 0..r {
        let y = DVector::from_fn(rows, |i, _| factors[(i + p, k)]);
        let fit = ols(&y, &lagged)?;
        b.row_mut(k).copy_from(&fit.beta.transpose());
        resid.set_column(k, &fit.residuals);
    }
    let factor_cov =
        symmetrize(&(resid.transpose() * &resid / rows as f64)) + DMatrix::identity(r, r) * 1e-8;
    let fitted = factors * loadings.transpose();
    let noise_var = DVector::from_fn(m, |i, _| {
        let e = x.column(i) - fitted.column(i);
        (e.norm_squared() / t_len as f64).max(1e-4)
    });
    let var_coefs = (0..p)
        .map(|j| b.view((0, j * r), (r, r)).into_owned())
        .collect();
    Ok(FactorParams {
        loadings: loadings.clone(),
        var_coefs,
        factor_cov,
        noise_var,
        intercept: DVector::zeros(r),
        initial_mean: DVector::zeros(r * p),
        initial_cov: DMatrix::identity(r * p, r * p) * DIFFUSE_VARIANCE,
    })
}
