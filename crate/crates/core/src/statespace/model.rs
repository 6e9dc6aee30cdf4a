use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::sqrt_psd;
use crate::rng::normal_vec;

/// Variance used for the approximate diffuse initialisation of
/// non-stationary states.
pub const DIFFUSE_VARIANCE: f64 = 1e7;

/// Linear Gaussian state-space model
///
/// ```text
/// y_t       = d + Z a_t + e_t,        e_t ~ N(0, diag(h))
/// a_{t+1}   = c_t + T a_t + u_t,      u_t ~ N(0, H)
/// a_0       ~ N(a_init, P_init)
/// ```
///
/// `H` may be singular (companion forms). Missing observations are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    pub transition: DMatrix<f64>,
    pub state_intercept: DVector<f64>,
    /// Optional `T x n` path of intercepts; row `t` enters the move from `t` to `t + 1`
    /// and replaces `state_intercept`.
    pub state_intercept_path: Option<DMatrix<f64>>,
    pub state_noise: DMatrix<f64>,
    pub design: DMatrix<f64>,
    pub obs_intercept: DVector<f64>,
    /// Diagonal of the measurement noise covariance.
    pub obs_noise: DVector<f64>,
    pub initial_mean: DVector<f64>,
    pub initial_cov: DMatrix<f64>,
}

impl StateSpaceModel {
    /// Model with zero intercepts; initial state `N(0, P_init)`.
    pub fn new(
        transition: DMatrix<f64>,
        state_noise: DMatrix<f64>,
        design: DMatrix<f64>,
        obs_noise: DVector<f64>,
        initial_cov: DMatrix<f64>,
    ) -> Result<Self> {
        let n = transition.nrows();
        let m = design.nrows();
        let model = StateSpaceModel {
            transition,
            state_intercept: DVector::zeros(n),
            state_intercept_path: None,
            state_noise,
            design,
            obs_intercept: DVector::zeros(m),
            obs_noise,
            initial_mean: DVector::zeros(n),
            initial_cov,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn state_dim(&self) -> usize {
        self.transition.nrows()
    }

    pub fn obs_dim(&self) -> usize {
        self.design.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.state_dim();
        let m = self.obs_dim();
        let square = |a: &DMatrix<f64>| a.nrows() == n && a.ncols() == n;
        if !square(&self.transition) || !square(&self.state_noise) || !square(&self.initial_cov)
        {
            return Err(Error::InvalidInput("state matrices must be n x n".into()));
        }
        if self.design.ncols() != n
            || self.state_intercept.len() != n
            || self.initial_mean.len() != n
            || self.obs_intercept.len() != m
            || self.obs_noise.len() != m
        {
            return Err(Error::InvalidInput("state-space dimension mismatch".into()));
        }
        if let Some(path) = &self.state_intercept_path {
            if path.ncols() != n {
                return Err(Error::InvalidInput("intercept path has wrong width".into()));
            }
        }
        if self.obs_noise.iter().any(|h| !(*h >= 0.0) || !h.is_finite()) {
            return Err(Error::InvalidInput(
                "measurement noise variances must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Intercept for the transition out of period `t`.
    pub fn intercept_at(&self, t: usize) -> DVector<f64> {
        match &self.state_intercept_path {
            Some(path) if t < path.nrows() => path.row(t).transpose(),
            _ => self.state_intercept.clone(),
        }
    }

    /// Copy with every intercept and the initial mean set to zero.
    pub(crate) fn without_means(&self) -> Self {
        let mut out = self.clone();
        out.state_intercept.fill(0.0);
        out.state_intercept_path = None;
        out.obs_intercept.fill(0.0);
        out.initial_mean.fill(0.0);
        out
    }

    /// Simulate `t_len` periods of states and observations.
    pub fn simulate<R: Rng + ?Sized>(
        &self,
        t_len: usize,
        rng: &mut R,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let n = self.state_dim();
        let m = self.obs_dim();
        let init_sqrt = sqrt_psd(&self.initial_cov)?;
        let noise_sqrt = sqrt_psd(&self.state_noise)?;
        let obs_sd = self.obs_noise.map(f64::sqrt);
        let mut states = DMatrix::zeros(t_len, n);
        let mut obs = DMatrix::zeros(t_len, m);
        let mut a = &self.initial_mean + &init_sqrt * normal_vec(rng, n);
        for t in 0..t_len {
            let e = normal_vec(rng, m).component_mul(&obs_sd);
            let y = &self.obs_intercept + &self.design * &a + e;
            states.set_row(t, &a.transpose());
            obs.set_row(t, &y.transpose());
            a = self.intercept_at(t) + &self.transition * &a + &noise_sqrt * normal_vec(rng, n);
        }
        Ok((states, obs))
    }
}
