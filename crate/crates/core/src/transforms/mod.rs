//! Stress-indicator construction from raw market series and the unit-root screen.

mod adf;
mod cmax;
mod ewsd;
mod spread;

pub use adf::{
    adf_test, mackinnon_p, mackinnon_p_raw, schwert_max_lags, AdfResult, AdfSpec, LagRule,
    P_VALUE_CEIL, P_VALUE_FLOOR,
};
pub use cmax::{cmax, CmaxOutput, DEFAULT_CMAX_WINDOW};
pub use ewsd::{
    ewsd, ewsd_with, log_changes, EwsdConfig, DEFAULT_BURN_IN, DEFAULT_DECAY, DEFAULT_LOOKBACK,
};
pub use spread::{corp_spread, matching_govt_yield, MaturityBucket};
