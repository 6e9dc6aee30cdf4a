//! Thin wrappers over statrs for the chi-square and standard normal
//! distributions.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub fn chi2_cdf(x: f64, dof: f64) -> f64 {
    ChiSquared::new(dof).map_or(f64::NAN, |d| d.cdf(x))
}

/// Inverse CDF of the chi-square distribution with `dof` degrees of freedom.
pub fn chi2_quantile(p: f64, dof: usize) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidInput(format!("probability {p} outside (0,1)")));
    }
    if dof == 0 {
        return Err(Error::InvalidInput("chi-square needs dof >= 1".into()));
    }
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Numeric(format!("chi-square({dof}): {e}")))?;
    let q = dist.inverse_cdf(p);
    if !q.is_finite() {
        return Err(Error::Numeric(format!("chi-square quantile at p = {p} not finite")));
    }
    Ok(q)
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

pub fn std_normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

pub fn std_normal_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}
