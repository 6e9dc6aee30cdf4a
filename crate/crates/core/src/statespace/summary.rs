use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{correlation, mean, variance};
use crate::panel::is_missing;

/// Share of total panel variance attributed to each factor.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplainedVariance {
    pub shares: Vec<f64>,
    pub cumulative: Vec<f64>,
}

fn observed(col: impl Iterator<Item = f64>) -> Vec<f64> {
    col.filter(|v| !is_missing(*v)).collect()
}

/// `sum_i var(L_ij f_j) / sum_i var(x_i)` for each factor `j`, with variances
/// taken over the periods where series `i` is observed.
pub fn explained_variance(
    loadings: &DMatrix<f64>,
    factors: &DMatrix<f64>,
    x: &DMatrix<f64>,
) -> Result<ExplainedVariance> {
    let (t_len, m) = x.shape();
    let r = loadings.ncols();
    if loadings.nrows() != m || factors.nrows() != t_len || factors.ncols() != r {
        return Err(Error::InvalidInput("explained variance: dimension mismatch".into()));
    }
    let mut total = 0.0;
    let mut parts = vec![0.0; r];
    for i in 0..m {
        let rows: Vec<usize> = (0..t_len).filter(|&t| !is_missing(x[(t, i)])).collect();
        if rows.len() < 2 {
            continue;
        }
        total += variance(&observed(rows.iter().map(|&t| x[(t, i)])));
        for (j, part) in parts.iter_mut().enumerate() {
            let path: Vec<f64> = rows.iter().map(|&t| factors[(t, j)]).collect();
            *part += loadings[(i, j)].powi(2) * variance(&path);
        }
    }
    if !(total > 0.0) {
        return Err(Error::ZeroVariance("panel".into()));
    }
    let shares: Vec<f64> = parts.iter().map(|p| p / total).collect();
    let cumulative = shares
        .iter()
        .scan(0.0, |acc, s| {
            *acc += s;
            Some(*acc)
        })
        .collect();
    Ok(ExplainedVariance { shares, cumulative })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CombineMethod {
    #[default]
    Mean,
}

/// Row-wise combination of factor columns.
pub fn combine_factors(factors: &DMatrix<f64>, method: CombineMethod) -> Result<Vec<f64>> {
    let r = factors.ncols();
    if r == 0 {
        return Err(Error::InvalidInput("no factors to combine".into()));
    }
    match method {
        CombineMethod::Mean => Ok(factors
            .row_iter()
            .map(|row| row.iter().sum::<f64>() / r as f64)
            .collect()),
    }
}

/// Scale each factor to zero mean and unit variance and flip its sign so it
/// correlates positively with the cross-sectional mean of `x`.
///
/// `x` should be the standardized inputs; missing cells are skipped in the
/// cross-sectional mean.
pub fn align_factors(factors: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let t_len = factors.nrows();
    if x.nrows() != t_len {
        return Err(Error::InvalidInput("align factors: row mismatch".into()));
    }
    let reference: Vec<f64> = x
        .row_iter()
        .map(|row| {
            let obs = observed(row.iter().copied());
            if obs.is_empty() {
                f64::NAN
            } else {
                mean(&obs)
            }
        })
        .collect();
    let rows: Vec<usize> = (0..t_len).filter(|&t| !is_missing(reference[t])).collect();
    let reference: Vec<f64> = rows.iter().map(|&t| reference[t]).collect();
    let mut out = factors.clone();
    for j in 0..factors.ncols() {
        let col: Vec<f64> = factors.column(j).iter().copied().collect();
        let mu = mean(&col);
        let sd = variance(&col).sqrt();
        if !(sd > 0.0) {
            return Err(Error::ZeroVariance(format!("factor {}", j + 1)));
        }
        let sub: Vec<f64> = rows.iter().map(|&t| col[t]).collect();
        let sign = if correlation(&sub, &reference) < 0.0 {
            -1.0
        } else {
            1.0
        };
        for (t, v) in col.iter().enumerate() {
            out[(t, j)] = sign * (v - mu) / sd;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn identical_columns_combine_to_themselves() {
        let f = DMatrix::from_fn(10, 3, |t, _| t as f64 * 0.5 - 1.0);
        let c = combine_factors(&f, CombineMethod::Mean).unwrap();
        for (t, v) in c.iter().enumerate() {
            assert!((v - f[(t, 0)]).abs() < 1e-15);
        }
        assert!(combine_factors(&DMatrix::zeros(4, 0), CombineMethod::Mean).is_err());
    }

    #[test]
    fn opposite_columns_align_before_averaging() {
        let mut g = rng::seeded(8);
        let z: Vec<f64> = (0..50).map(|_| rng::std_normal(&mut g)).collect();
        let zs = {
            let (mu, sd) = (mean(&z), variance(&z).sqrt());
            z.iter().map(|v| (v - mu) / sd).collect::<Vec<_>>()
        };
        let f = DMatrix::from_fn(50, 2, |t, j| if j == 0 { zs[t] } else { -zs[t] });
        let x = DMatrix::from_fn(50, 3, |t, _| zs[t]);
        let aligned = align_factors(&f, &x).unwrap();
        let c = combine_factors(&aligned, CombineMethod::Mean).unwrap();
        for t in 0..50 {
            assert!((c[t] - zs[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn random_panel_matches_rowwise_mean() {
        let mut g = rng::seeded(21);
        let f = DMatrix::from_fn(30, 5, |_, _| rng::std_normal(&mut g));
        let c = combine_factors(&f, CombineMethod::Mean).unwrap();
        for t in 0..30 {
            let mut s = 0.0;
            for j in 0..5 {
                s += f[(t, j)];
            }
            assert!((c[t] - s / 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_single_factor_explains_everything() {
        let mut g = rng::seeded(4);
        let f = DMatrix::from_fn(100, 1, |_, _| rng::std_normal(&mut g));
        let l = DMatrix::from_column_slice(3, 1, &[0.6, 0.0, 0.8]);
        let x = &f * l.transpose();
        let ev = explained_variance(&l, &f, &x).unwrap();
        assert!((ev.shares[0] - 1.0).abs() < 1e-12);
        assert_eq!(ev.cumulative, ev.shares);
    }
}
