use chrono::NaiveDate;
use nalgebra::DMatrix;

use super::{first_of_month, is_missing, month_index, Frequency, TimeSeriesPanel, MISSING};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AggregationMethod {
    #[default]
    Mean,
    Last,
}

impl AggregationMethod {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Self::Mean),
            "last" => Ok(Self::Last),
            other => Err(Error::InvalidInput(format!("unknown aggregation '{other}'"))),
        }
    }
}

/// Collapse a daily panel to one row per calendar month, dated on the first
/// of the month. Months without any daily row are emitted as all-missing.
pub fn aggregate_to_monthly(
    panel: &TimeSeriesPanel,
    method: AggregationMethod,
) -> Result<TimeSeriesPanel> {
    if panel.n_obs() == 0 {
        return Err(Error::InvalidPanel("cannot aggregate an empty panel".into()));
    }
    if panel.frequency() != Frequency::Daily {
        return Err(Error::InvalidPanel(format!(
            "monthly aggregation needs daily input, got {}",
            panel.frequency().as_str()
        )));
    }
    let dates = panel.dates();
    let first = month_index(dates[0]);
    let last = month_index(dates[dates.len() - 1]);
    let n_months = (last - first + 1) as usize;
    let m = panel.n_series();

    let mut sums = DMatrix::<f64>::zeros(n_months, m);
    let mut counts = DMatrix::<usize>::zeros(n_months, m);
    let mut lasts = DMatrix::<f64>::from_element(n_months, m, MISSING);
    for (i, d) in dates.iter().enumerate() {
        let row = (month_index(*d) - first) as usize;
        for j in 0..m {
            let v = panel.values()[(i, j)];
            if !is_missing(v) {
                sums[(row, j)] += v;
                counts[(row, j)] += 1;
                lasts[(row, j)] = v;
            }
        }
    }
    let values = match method {
        AggregationMethod::Mean => DMatrix::from_fn(n_months, m, |i, j| {
            if counts[(i, j)] == 0 {
                MISSING
            } else {
                sums[(i, j)] / counts[(i, j)] as f64
            }
        }),
        AggregationMethod::Last => lasts,
    };
    let start = first_of_month(dates[0]);
    let month_dates: Vec<NaiveDate> = (0..n_months)
        .map(|k| start + chrono::Months::new(k as u32))
        .collect();
    TimeSeriesPanel::new(month_dates, panel.names().to_vec(), values, Frequency::Monthly)
}
