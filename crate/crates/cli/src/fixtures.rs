//! Synthetic input files shaped like the real pipeline inputs: market
//! prices and yields, two quarterly GDP measures and monthly indicators.

use nalgebra::DMatrix;
use nsfsi_core::synth::{gen_factor_panel, gen_mf_gdp, FactorDgpSpec, MfGdpData, MfGdpSpec};
use nsfsi_core::TimeSeriesPanel;

use crate::error::CliResult;

pub const MARKET_COLUMNS: [&str; 6] = ["equity_a", "equity_b", "fx", "corp_yield", "gilt_yield", "bank_rate"];

pub struct Fixtures {
    pub market: TimeSeriesPanel,
    pub gdp: MfGdpData,
}

/// `months` must be a multiple of three.
pub fn make_fixtures(months: usize, seed: u64) -> CliResult<Fixtures> {
    let spec = FactorDgpSpec {
        noise_var: 0.1,
        ..FactorDgpSpec::new(MARKET_COLUMNS.len(), 1, 1, months)
    };
    let (panel, _) = gen_factor_panel(&spec, seed)?;
    let x = panel.values();
    // Prices move in logs, yields in levels.
    let values = DMatrix::from_fn(months, MARKET_COLUMNS.len(), |t, j| match j {
        0 => 100.0 * (0.05 * x[(t, 0)]).exp(),
        1 => 50.0 * (0.05 * x[(t, 1)]).exp(),
        2 => 1.5 * (0.02 * x[(t, 2)]).exp(),
        3 => 5.0 + 0.1 * x[(t, 3)],
        4 => 3.5 + 0.05 * x[(t, 4)],
        _ => 2.0 + 0.1 * x[(t, 5)],
    });
    let market = TimeSeriesPanel::monthly_from(
        spec.start,
        MARKET_COLUMNS.iter().map(|s| s.to_string()).collect(),
        values,
    )?;
    let gdp = gen_mf_gdp(
        &MfGdpSpec {
            months,
            start: spec.start,
            ..MfGdpSpec::default()
        },
        seed.wrapping_add(1),
    )?;
    Ok(Fixtures { market, gdp })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_positive_and_aligned() {
        let f = make_fixtures(60, 3).unwrap();
        assert_eq!(f.market.n_obs(), 60);
        assert!(f.market.values().iter().all(|v| *v > 0.0));
        assert_eq!(f.market.dates()[0], f.gdp.monthly.dates()[0]);
        assert_eq!(f.gdp.quarterly.n_obs(), 20);
    }
}
