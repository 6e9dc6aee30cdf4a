//! Growth-at-risk: quantile regression, density forecasts and their scores.

pub mod backtest;
pub mod pit;
pub mod qr;
pub mod scoring;

pub use backtest::{
    align_inputs, backtest, backtest_values, pit_csv, report_table_csv, BacktestConfig, HorizonReport,
    OriginForecast, QuantileBacktestReport, DEFAULT_HORIZONS,
};
pub use pit::{ks_uniform, pit, KsResult, KS_COEF_5PCT};
pub use qr::{pinball, pinball_sum, qr_fit, qr_fit_from, QuantileFit};
pub use scoring::{
    check_tau_grid, default_tau_grid, quantile_ic, quantile_score, qwcrps, tau_cell_widths,
    DensityForecast, ScoreWeight,
};
