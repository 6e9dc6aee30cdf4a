#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use nsfsi_core::rng;
use nsfsi_core::statespace::StateSpaceModel;
use rand::Rng;

pub struct Oracle {
    pub loglik: f64,
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
    pub lag_covs: Vec<DMatrix<f64>>,
}

/// Small random model with T <= 6 and, optionally, a few missing cells.
pub fn random_model(seed: u64, with_missing: bool) -> (StateSpaceModel, DMatrix<f64>) {
    let mut g = rng::seeded(seed);
    let n = g.random_range(1..=3);
    let m = g.random_range(1..=3);
    let t_len = g.random_range(2..=6);
    let mut normal = |s: f64| s * rng::std_normal(&mut g);
    let transition = DMatrix::from_fn(n, n, |_, _| normal(0.5));
    let a = DMatrix::from_fn(n, n, |_, _| normal(0.7));
    let state_noise = &a * a.transpose() + DMatrix::identity(n, n) * 0.1;
    let design = DMatrix::from_fn(m, n, |_, _| normal(1.0));
    let obs_noise = DVector::from_fn(m, |_, _| 0.2 + normal(0.5).abs());
    let b = DMatrix::from_fn(n, n, |_, _| normal(1.0));
    let initial_cov = &b * b.transpose() + DMatrix::identity(n, n);
    let mut model =
        StateSpaceModel::new(transition, state_noise, design, obs_noise, initial_cov).unwrap();
    model.initial_mean = DVector::from_fn(n, |_, _| normal(1.0));
    model.state_intercept = DVector::from_fn(n, |_, _| normal(0.3));
    model.obs_intercept = DVector::from_fn(m, |_, _| normal(0.3));
    let mut g2 = rng::seeded(seed + 10_000);
    let (_, mut y) = model.simulate(t_len, &mut g2).unwrap();
    if with_missing {
        let cells = t_len * m;
        let k = g2.random_range(1..cells.max(2));
        y[(k / m % t_len, k % m)] = f64::NAN;
    }
    (model, y)
}

/// Exact conditional moments from the joint Gaussian of all states and observed cells.
pub fn stacked_oracle(model: &StateSpaceModel, y: &DMatrix<f64>) -> Oracle {
    let (t_len, m) = y.shape();
    let n = model.state_dim();
    let tt = &model.transition;
    let mut mu = vec![model.initial_mean.clone()];
    for t in 1..t_len {
        let next = model.intercept_at(t - 1) + tt * &mu[t - 1];
        mu.push(next);
    }
    // cross[s][t] = Cov(a_s, a_t)
    let mut cross = vec![vec![DMatrix::<f64>::zeros(n, n); t_len]; t_len];
    cross[0][0] = model.initial_cov.clone();
    for t in 1..t_len {
        cross[t][t] = tt * &cross[t - 1][t - 1] * tt.transpose() + &model.state_noise;
        for s in 0..t {
            cross[s][t] = &cross[s][t - 1] * tt.transpose();
            cross[t][s] = cross[s][t].transpose();
        }
    }
    let cells: Vec<(usize, usize)> = (0..t_len)
        .flat_map(|t| (0..m).map(move |i| (t, i)))
        .filter(|&(t, i)| y[(t, i)].is_finite())
        .collect();
    let k = cells.len();
    let z = &model.design;
    let mut sy = DMatrix::<f64>::zeros(k, k);
    let mut resid = DVector::<f64>::zeros(k);
    for (a, &(t, i)) in cells.iter().enumerate() {
        resid[a] = y[(t, i)] - model.obs_intercept[i] - (z.row(i) * &mu[t])[(0, 0)];
        for (b, &(s, j)) in cells.iter().enumerate() {
            sy[(a, b)] = (z.row(i) * &cross[t][s] * z.row(j).transpose())[(0, 0)];
            if a == b {
                sy[(a, b)] += model.obs_noise[i];
            }
        }
    }
    let chol = sy.clone().cholesky().unwrap();
    let sol = chol.solve(&resid);
    let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let loglik =
        -0.5 * (k as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + resid.dot(&sol));
    // Cov(a_t, Y)
    let cov_ay = |t: usize| {
        DMatrix::from_fn(n, k, |r, c| {
            let (s, j) = cells[c];
            (cross[t][s].row(r) * z.row(j).transpose())[(0, 0)]
        })
    };
    let sy_inv = chol.inverse();
    let mut means = Vec::new();
    let mut covs = Vec::new();
    let mut lag_covs = Vec::new();
    for t in 0..t_len {
        let ca = cov_ay(t);
        means.push(&mu[t] + &ca * &sol);
        covs.push(&cross[t][t] - &ca * &sy_inv * ca.transpose());
        if t + 1 < t_len {
            let cb = cov_ay(t + 1);
            lag_covs.push(&cross[t][t + 1] - &ca * &sy_inv * cb.transpose());
        }
    }
    Oracle {
        loglik,
        means,
        covs,
        lag_covs,
    }
}
