//! Exact linear quantile regression.
//!
//! The pinball objective is piecewise linear and attains its minimum at a
//! vertex where `p` observations are interpolated. Starting from such a
//! vertex, each step follows the steepest descending edge (drop one
//! interpolated point, keep the others) with an exact line search over the
//! residual sign changes, until no edge descends.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::thin_qr;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileFit {
    pub tau: f64,
    pub coefficients: DVector<f64>,
    /// In-sample sum of pinball losses.
    pub loss: f64,
    pub n: usize,
    pub p: usize,
}

impl QuantileFit {
    pub fn predict(&self, x: &DVector<f64>) -> f64 {
        self.coefficients.dot(x)
    }
}

pub fn pinball(u: f64, tau: f64) -> f64 {
    if u < 0.0 {
        u * (tau - 1.0)
    } else {
        u * tau
    }
}

pub fn pinball_sum(y: &DVector<f64>, x: &DMatrix<f64>, beta: &DVector<f64>, tau: f64) -> f64 {
    (y - x * beta).iter().map(|u| pinball(*u, tau)).sum()
}

fn check_inputs(y: &DVector<f64>, x: &DMatrix<f64>, tau: f64) -> Result<()> {
    let (n, p) = x.shape();
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidInput(format!("quantile level {tau} outside (0, 1)")));
    }
    if y.len() != n {
        return Err(Error::InvalidInput("quantile regression: length mismatch".into()));
    }
    if p == 0 || n < p + 2 {
        return Err(Error::InvalidInput(format!(
            "quantile regression needs n >= p + 2 (n = {n}, p = {p})"
        )));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::MissingValues("quantile regression data".into()));
    }
    let (_, r) = thin_qr(x);
    let diag: Vec<f64> = r.diagonal().iter().map(|v| v.abs()).collect();
    let max = diag.iter().fold(0.0f64, |a, v| a.max(*v));
    let min = diag.iter().fold(f64::INFINITY, |a, v| a.min(*v));
    if !(min > 1e-10 * max) {
        return Err(Error::Singular {
            what: "quantile regression design".into(),
            cond: max / min,
        });
    }
    Ok(())
}

/// Pick `p` rows, preferring small `|residual|`, that form an invertible block.
fn initial_basis(x: &DMatrix<f64>, resid: &DVector<f64>) -> Option<Vec<usize>> {
    let (n, p) = x.shape();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| resid[a].abs().total_cmp(&resid[b].abs()));
    let mut basis: Vec<usize> = Vec::with_capacity(p);
    // Orthonormal rows accepted so far, for a Gram-Schmidt rank test.
    let mut q: Vec<DVector<f64>> = Vec::with_capacity(p);
    for &i in &order {
        let mut v = x.row(i).transpose();
        let norm0 = v.norm();
        if norm0 == 0.0 {
            continue;
        }
        for u in &q {
            let c = u.dot(&v);
            v -= u * c;
        }
        let norm = v.norm();
        if norm > 1e-8 * norm0 {
            q.push(v / norm);
            basis.push(i);
            if basis.len() == p {
                return Some(basis);
            }
        }
    }
    None
}

fn edge_slope(a: f64, tau: f64) -> f64 {
    // Right derivative of pinball(r + t a) at r = 0.
    if a > 0.0 {
        a * tau
    } else {
        -a * (1.0 - tau)
    }
}

fn slope_at(r: f64, a: f64, tau: f64) -> f64 {
    if r > 0.0 {
        a * tau
    } else if r < 0.0 {
        a * (tau - 1.0)
    } else {
        edge_slope(a, tau)
    }
}

/// Minimise `sum pinball(y - X b, tau)` exactly, optionally warm-started.
pub fn qr_fit_from(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    tau: f64,
    start: Option<&DVector<f64>>,
) -> Result<QuantileFit> {
    check_inputs(y, x, tau)?;
    let (n, p) = x.shape();
    let beta0 = match start {
        Some(b) if b.len() == p => b.clone(),
        _ => {
            let (q, r) = thin_qr(x);
            r.solve_upper_triangular(&(q.transpose() * y))
                .ok_or_else(|| Error::Numeric("least-squares start failed".into()))?
        }
    };
    let mut basis = initial_basis(x, &(y - x * &beta0))
        .ok_or_else(|| Error::Singular {
            what: "quantile regression basis".into(),
            cond: f64::INFINITY,
        })?;
    let scale = y.amax().max(1.0);
    let max_iter = 50 * n + 100;
    for _ in 0..max_iter {
        let xh = DMatrix::from_fn(p, p, |i, j| x[(basis[i], j)]);
        let yh = DVector::from_fn(p, |i, _| y[basis[i]]);
        let lu = xh.clone().lu();
        let inv = lu.try_inverse().ok_or_else(|| Error::Singular {
            what: "quantile regression basis".into(),
            cond: f64::INFINITY,
        })?;
        let beta = &inv * yh;
        let mut resid = y - x * &beta;
        for &b in &basis {
            resid[b] = 0.0;
        }
        let in_basis = |i: usize| basis.contains(&i);
        // Best descending edge over the 2p candidates.
        let mut best: Option<(f64, usize, f64, DVector<f64>)> = None;
        for j in 0..p {
            let d = inv.column(j).into_owned();
            let xd = x * &d;
            for s in [1.0, -1.0] {
                let mut slope = edge_slope(-s, tau);
                for i in 0..n {
                    if in_basis(i) {
                        continue;
                    }
                    slope += slope_at(resid[i], -s * xd[i], tau);
                }
                if slope < -1e-12 * scale && best.as_ref().is_none_or(|b| slope < b.0) {
                    best = Some((slope, j, s, xd.clone()));
                }
            }
        }
        let Some((slope, j, s, xd)) = best else {
            let loss = resid.iter().map(|u| pinball(*u, tau)).sum();
            return Ok(QuantileFit {
                tau,
                coefficients: beta,
                loss,
                n,
                p,
            });
        };
        // Exact line search: residual i becomes r_i - t s xd_i.
        let mut breaks: Vec<(f64, usize, f64)> = (0..n)
            .filter(|&i| !in_basis(i))
            .filter_map(|i| {
                let a = -s * xd[i];
                if a == 0.0 {
                    return None;
                }
                let t = -resid[i] / a;
                (t > 0.0 || (t == 0.0 && resid[i] == 0.0)).then_some((t, i, a.abs()))
            })
            .collect();
        breaks.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut acc = slope;
        let mut entering = None;
        for &(_, i, w) in &breaks {
            acc += w;
            if acc >= 0.0 {
                entering = Some(i);
                break;
            }
        }
        let Some(enter) = entering else {
            return Err(Error::Numeric("quantile regression objective unbounded".into()));
        };
        basis[j] = enter;
    }
    Err(Error::Numeric(format!(
        "quantile regression did not converge in {max_iter} pivots"
    )))
}

pub fn qr_fit(y: &DVector<f64>, x: &DMatrix<f64>, tau: f64) -> Result<QuantileFit> {
    qr_fit_from(y, x, tau, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn ones(n: usize) -> DMatrix<f64> {
        DMatrix::from_element(n, 1, 1.0)
    }

    #[test]
    fn intercept_only_median_and_quartile() {
        let fit = qr_fit(&DVector::from_vec(vec![1.0, 2.0, 3.0]), &ones(3), 0.5).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!((fit.loss - 1.0).abs() < 1e-12);
        assert!(qr_fit(&DVector::from_vec(vec![1.0, 2.0]), &ones(2), 0.5).is_err());
        let y = DVector::from_vec(vec![3.0, 1.0, 5.0, 2.0, 4.0]);
        let q = qr_fit(&y, &ones(5), 0.25).unwrap();
        assert!((q.coefficients[0] - 2.0).abs() < 1e-12);
        let m = qr_fit(&y, &ones(5), 0.5).unwrap();
        assert!((m.coefficients[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn bad_inputs_error() {
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!(qr_fit(&y, &ones(5), 0.0).is_err());
        assert!(qr_fit(&y, &ones(5), 1.0).is_err());
        let x = DMatrix::from_fn(5, 2, |_, _| 1.0);
        assert!(matches!(qr_fit(&y, &x, 0.5), Err(Error::Singular { .. })));
    }

    #[test]
    fn no_random_perturbation_improves_the_objective() {
        let mut g = rng::seeded(31);
        let n = 60;
        let x = DMatrix::from_fn(n, 3, |_, j| if j == 0 { 1.0 } else { rng::std_normal(&mut g) });
        let y = DVector::from_fn(n, |i, _| 0.5 + x[(i, 1)] - 0.3 * x[(i, 2)] + rng::std_normal(&mut g));
        for tau in [0.1, 0.5, 0.9] {
            let fit = qr_fit(&y, &x, tau).unwrap();
            for _ in 0..1000 {
                let scale = 10f64.powf(g.random_range(-6.0..0.0));
                let pert = DVector::from_fn(3, |_, _| scale * rng::std_normal(&mut g));
                let b = &fit.coefficients + pert;
                assert!(pinball_sum(&y, &x, &b, tau) >= fit.loss - 1e-9);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn warm_start_reaches_the_same_optimum(seed in 0u64..10_000, tau in 0.05f64..0.95) {
            let mut g = rng::seeded(seed);
            let n = 40;
            let x = DMatrix::from_fn(n, 2, |_, j| if j == 0 { 1.0 } else { rng::std_normal(&mut g) });
            let y = DVector::from_fn(n, |_, _| rng::std_normal(&mut g));
            let cold = qr_fit(&y, &x, tau).unwrap();
            let guess = DVector::from_vec(vec![3.0, -2.0]);
            let warm = qr_fit_from(&y, &x, tau, Some(&guess)).unwrap();
            prop_assert!((cold.loss - warm.loss).abs() <= 1e-9 * cold.loss.max(1.0));
        }
    }
}
