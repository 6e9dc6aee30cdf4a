//! Financial stress indices from non-stationary dynamic factor models, and a
//! growth-at-risk backtest for judging any candidate stress index.
//!
//! The crate is organised by pipeline stage:
//!
//! * [`panel`]: dated panels, CSV ingestion, monthly aggregation, standardization.
//! * [`transforms`]: CMAX drawdowns, EWSD volatility, bond spreads and the ADF screen.
//! * [`nsfactor`]: generalized and canonical covariances and the chi-square factor-number test.
//! * [`statespace`]: Kalman filtering/smoothing, EM and Gibbs estimation of the factor model.
//! * [`gar`]: quantile regression, density scoring and the growth-at-risk backtest.
//! * [`gdp`]: latent monthly GDP from two noisy quarterly measures.
//! * [`synth`]: seeded data-generating processes with known truth.

pub mod error;
pub mod gar;
pub mod gdp;
pub mod linalg;
pub mod nsfactor;
pub mod panel;
pub mod rng;
pub mod special;
pub mod statespace;
pub mod synth;
pub mod transforms;

pub use error::{Error, ErrorKind, Result};
pub use panel::{Frequency, TimeSeriesPanel};
