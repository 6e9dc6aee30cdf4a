//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

/// Symmetric eigen-decomposition with eigenvalues sorted in decreasing order.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let eig = m
        .clone()
        .try_symmetric_eigen(1e-15, 10_000)
        .ok_or_else(|| Error::Numeric("symmetric eigen solver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

/// Ratio of extreme eigenvalues of a symmetric positive semidefinite matrix.
pub fn condition_number_spd(m: &DMatrix<f64>) -> Result<f64> {
    let (vals, _) = sym_eigen_desc(&symmetrize(m))?;
    let max = vals[0];
    let min = vals[vals.len() - 1];
    Ok(if min <= 0.0 { f64::INFINITY } else { max / min })
}

/// `S^{-1/2}` of a symmetric positive definite matrix, refusing condition
/// numbers above `max_cond`.
pub fn inv_sqrt_spd(m: &DMatrix<f64>, max_cond: f64, what: &str) -> Result<DMatrix<f64>> {
    let (vals, vecs) = sym_eigen_desc(&symmetrize(m))?;
    let max = vals[0];
    let min = vals[vals.len() - 1];
    let cond = if min <= 0.0 { f64::INFINITY } else { max / min };
    if !(cond < max_cond) {
        return Err(Error::Singular {
            what: what.to_string(),
            cond,
        });
    }
    let d = DMatrix::from_diagonal(&vals.map(|v| 1.0 / v.sqrt()));
    Ok(&vecs * d * vecs.transpose())
}

/// Symmetric square root of a positive semidefinite matrix; small negative
/// eigenvalues from rounding are treated as zero.
pub fn sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (vals, vecs) = sym_eigen_desc(&symmetrize(m))?;
    let d = DMatrix::from_diagonal(&vals.map(|v| v.max(0.0).sqrt()));
    Ok(&vecs * d * vecs.transpose())
}

/// Thin QR: `A = Q R` with `Q` having orthonormal columns.
pub fn thin_qr(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = a.clone().qr();
    (qr.q(), qr.r())
}

/// Sign of each column chosen so that its largest-magnitude entry is positive.
pub fn column_sign_rule(a: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(a.ncols(), |j, _| {
        let col = a.column(j);
        let (mut best, mut val) = (0.0f64, 0.0);
        for v in col.iter() {
            if v.abs() > best {
                best = v.abs();
                val = *v;
            }
        }
        if val < 0.0 {
            -1.0
        } else {
            1.0
        }
    })
}

/// Principal angles (degrees, ascending) between the column spans of `a` and `b`.
pub fn principal_angles_deg(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let (qa, _) = thin_qr(a);
    let (qb, _) = thin_qr(b);
    let m = qa.transpose() * qb;
    let svd = m.svd(false, false);
    let mut angles: Vec<f64> = svd
        .singular_values
        .iter()
        .map(|s| s.clamp(-1.0, 1.0).acos().to_degrees())
        .collect();
    angles.sort_by(f64::total_cmp);
    angles
}

pub fn largest_principal_angle_deg(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    principal_angles_deg(a, b)
        .into_iter()
        .fold(0.0, f64::max)
}

/// Ordinary least squares fit.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub beta: DVector<f64>,
    pub residuals: DVector<f64>,
    pub rss: f64,
    /// `rss / (n - k)`.
    pub sigma2: f64,
    pub std_errors: DVector<f64>,
    /// `(X'X)^{-1}`.
    pub xtx_inv: DMatrix<f64>,
}

pub fn ols(y: &DVector<f64>, x: &DMatrix<f64>) -> Result<OlsFit> {
    let (n, k) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(Error::InvalidInput("ols: length mismatch".into()));
    }
    if n <= k {
        return Err(Error::InvalidInput(format!("ols: {n} observations for {k} regressors")));
    }
    let (q, r) = thin_qr(x);
    let diag_max = r.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let diag_min = r.diagonal().iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    if !(diag_min > 1e-12 * diag_max) {
        return Err(Error::Singular {
            what: "regression design".into(),
            cond: diag_max / diag_min,
        });
    }
    let qty = q.transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Numeric("ols: triangular solve failed".into()))?;
    let residuals = y - x * &beta;
    let rss = residuals.norm_squared();
    let sigma2 = rss / (n - k) as f64;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::Numeric("ols: triangular inverse failed".into()))?;
    let xtx_inv = &r_inv * r_inv.transpose();
    let std_errors = DVector::from_fn(k, |i, _| (sigma2 * xtx_inv[(i, i)]).sqrt());
    Ok(OlsFit {
        beta,
        residuals,
        rss,
        sigma2,
        std_errors,
        xtx_inv,
    })
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with `n - 1` denominator.
pub fn variance(x: &[f64]) -> f64 {
    let mu = mean(x);
    x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
