//! Latent monthly GDP growth reconciled from two noisy quarterly measures.

pub mod gibbs;
pub mod indicators;
pub mod model;

pub use gibbs::{
    reconcile, reconcile_gibbs, GdpDraw, GdpPriors, MonthlyGdpPosterior, ReconcileOptions, XiAcceptance,
    CHAIN_AGREEMENT_TOL,
};
pub use indicators::{default_transform, transform_indicators, transform_series, IndicatorTransform};
pub use model::{
    build_mf_model, implied_xi, xi_in_bounds, xi_ratio, MfModelConfig, MfParams, MixedFrequencyGdpModel,
    DEFAULT_XI_BOUNDS,
};
