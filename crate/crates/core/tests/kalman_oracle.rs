//! Filter and smoother against the joint Gaussian of the stacked system.

mod common;

use common::{random_model, stacked_oracle};
use nsfsi_core::rng;
use nsfsi_core::statespace::{kalman_filter, kalman_smoother, simulation_smoother};
use nalgebra::DMatrix;

#[test]
fn loglik_and_smoother_match_stacked_gaussian() {
    for seed in 0..40u64 {
        let (model, y) = random_model(seed, seed % 3 == 0);
        let filt = kalman_filter(&model, &y).unwrap();
        let sm = kalman_smoother(&model, &y).unwrap();
        let oracle = stacked_oracle(&model, &y);
        assert!(
            (filt.loglik - oracle.loglik).abs() < 1e-8 * oracle.loglik.abs().max(1.0),
            "seed {seed}: {} vs {}",
            filt.loglik,
            oracle.loglik
        );
        for t in 0..y.nrows() {
            assert!((&sm.means[t] - &oracle.means[t]).amax() < 1e-8, "seed {seed} mean t={t}");
            assert!((&sm.covs[t] - &oracle.covs[t]).amax() < 1e-8, "seed {seed} cov t={t}");
            if t + 1 < y.nrows() {
                assert!(
                    (&sm.lag_covs[t] - &oracle.lag_covs[t]).amax() < 1e-8,
                    "seed {seed} lag cov t={t}"
                );
            }
        }
    }
}

#[test]
fn smoother_variance_never_exceeds_filter_variance() {
    for seed in 100..130u64 {
        let (model, y) = random_model(seed, true);
        let filt = kalman_filter(&model, &y).unwrap();
        let sm = kalman_smoother(&model, &y).unwrap();
        for t in 0..y.nrows() {
            for i in 0..model.state_dim() {
                assert!(sm.covs[t][(i, i)] <= filt.filtered_covs[t][(i, i)] + 1e-9);
            }
        }
    }
}

#[test]
fn simulation_smoother_draws_have_posterior_moments() {
    let (model, y) = random_model(7, true);
    let oracle = stacked_oracle(&model, &y);
    let n = model.state_dim();
    let draws = 20_000;
    let mut g = rng::seeded(99);
    let mut sum = DMatrix::<f64>::zeros(y.nrows(), n);
    let mut sq = DMatrix::<f64>::zeros(y.nrows(), n);
    for _ in 0..draws {
        let d = simulation_smoother(&model, &y, &mut g).unwrap();
        sum += &d;
        sq += d.component_mul(&d);
    }
    for t in 0..y.nrows() {
        for i in 0..n {
            let mean = sum[(t, i)] / draws as f64;
            let var = sq[(t, i)] / draws as f64 - mean * mean;
            let sd = oracle.covs[t][(i, i)].sqrt();
            assert!((mean - oracle.means[t][i]).abs() < 5.0 * sd / (draws as f64).sqrt() + 1e-9);
            assert!((var / oracle.covs[t][(i, i)] - 1.0).abs() < 0.06);
        }
    }
}
