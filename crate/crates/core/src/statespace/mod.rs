//! Linear Gaussian state-space machinery and the dynamic factor model
//! estimated on top of it.

mod bayes;
mod em;
mod factor;
mod kalman;
mod model;
mod summary;

pub use bayes::{ffbs_sample, ffbs_sample_values, BayesOptions, BayesPriors, PosteriorDraws};
pub use em::{em_estimate, em_estimate_values, em_from, EmOptions, EstimatedFactorModel};
pub use factor::{starting_params, FactorParams};
pub use kalman::{
    kalman_filter, kalman_smoother, loglik, simulation_smoother, smooth_from_filter,
    FilterOutput, SmootherOutput,
};
pub use model::{StateSpaceModel, DIFFUSE_VARIANCE};
pub use summary::{align_factors, combine_factors, explained_variance, CombineMethod, ExplainedVariance};
