//! Dated, aligned multivariate time-series panels.
//!
//! Missing cells are stored as `NaN`; every consumer checks with
//! [`is_missing`] rather than comparing values.

mod aggregate;
mod csvio;
mod standardize;

pub use aggregate::{aggregate_to_monthly, AggregationMethod};
pub use csvio::{format_float, ingest_csv, parse_csv, write_csv, write_csv_string, CsvSchema};
pub use standardize::{destandardize, standardize, StandardizationRecord, StandardizeWindow};

use chrono::{Datelike, NaiveDate};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const MISSING: f64 = f64::NAN;

#[inline]
pub fn is_missing(x: f64) -> bool {
    x.is_nan()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frequency {
    Daily,
    Monthly,
    Quarterly,
}

impl Frequency {
    pub fn as_str(&self) -> &'static str {
        match self {
            Frequency::Daily => "daily",
            Frequency::Monthly => "monthly",
            Frequency::Quarterly => "quarterly",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "daily" | "d" => Ok(Frequency::Daily),
            "monthly" | "m" => Ok(Frequency::Monthly),
            "quarterly" | "q" => Ok(Frequency::Quarterly),
            other => Err(Error::InvalidInput(format!("unknown frequency '{other}'"))),
        }
    }
}

/// Months since year 0, used for monthly/quarterly spacing checks.
pub fn month_index(d: NaiveDate) -> i64 {
    d.year() as i64 * 12 + d.month0() as i64
}

pub fn first_of_month(d: NaiveDate) -> NaiveDate {
    NaiveDate::from_ymd_opt(d.year(), d.month(), 1).expect("valid month")
}

fn spacing_ok(freq: Frequency, a: NaiveDate, b: NaiveDate) -> bool {
    match freq {
        // Weekends and holidays leave gaps of a few days.
        Frequency::Daily => (b - a).num_days() <= 7,
        Frequency::Monthly => month_index(b) - month_index(a) == 1,
        Frequency::Quarterly => month_index(b) - month_index(a) == 3,
    }
}

/// Infer the frequency from the typical gap between consecutive dates.
pub fn infer_frequency(dates: &[NaiveDate]) -> Frequency {
    if dates.len() < 2 {
        return Frequency::Daily;
    }
    let mut gaps: Vec<i64> = dates.windows(2).map(|w| (w[1] - w[0]).num_days()).collect();
    gaps.sort_unstable();
    let median = gaps[gaps.len() / 2];
    if median <= 7 {
        Frequency::Daily
    } else if median <= 45 {
        Frequency::Monthly
    } else {
        Frequency::Quarterly
    }
}

/// `T x m` panel of real values with explicit missing markers.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel {
    dates: Vec<NaiveDate>,
    names: Vec<String>,
    values: DMatrix<f64>,
    frequency: Frequency,
}

impl TimeSeriesPanel {
    pub fn new(
        dates: Vec<NaiveDate>,
        names: Vec<String>,
        values: DMatrix<f64>,
        frequency: Frequency,
    ) -> Result<Self> {
        if dates.len() != values.nrows() {
            return Err(Error::InvalidPanel(format!(
                "{} dates for {} rows",
                dates.len(),
                values.nrows()
            )));
        }
        if names.len() != values.ncols() {
            return Err(Error::InvalidPanel(format!(
                "{} names for {} columns",
                names.len(),
                values.ncols()
            )));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::InvalidPanel(format!("duplicate series name '{n}'")));
            }
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidPanel(format!(
                    "dates not strictly increasing at {}",
                    w[1]
                )));
            }
            if !spacing_ok(frequency, w[0], w[1]) {
                return Err(Error::InvalidPanel(format!(
                    "gap {} -> {} inconsistent with {} frequency",
                    w[0],
                    w[1],
                    frequency.as_str()
                )));
            }
        }
        if values.iter().any(|v| v.is_infinite()) {
            return Err(Error::InvalidPanel("infinite value".into()));
        }
        Ok(Self {
            dates,
            names,
            values,
            frequency,
        })
    }

    /// Build a panel whose frequency is inferred from the dates.
    pub fn with_inferred_frequency(
        dates: Vec<NaiveDate>,
        names: Vec<String>,
        values: DMatrix<f64>,
    ) -> Result<Self> {
        let freq = infer_frequency(&dates);
        Self::new(dates, names, values, freq)
    }

    /// Monthly panel with consecutive month-start dates from `start`.
    pub fn monthly_from(start: NaiveDate, names: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        let start = first_of_month(start);
        let dates = (0..values.nrows())
            .map(|i| start + chrono::Months::new(i as u32))
            .collect();
        Self::new(dates, names, values, Frequency::Monthly)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }
    pub fn names(&self) -> &[String] {
        &self.names
    }
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
    pub fn frequency(&self) -> Frequency {
        self.frequency
    }
    pub fn n_obs(&self) -> usize {
        self.values.nrows()
    }
    pub fn n_series(&self) -> usize {
        self.values.ncols()
    }
    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0 || self.values.ncols() == 0
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).iter().copied().collect()
    }

    pub fn column_by_name(&self, name: &str) -> Result<Vec<f64>> {
        self.column_index(name)
            .map(|j| self.column(j))
            .ok_or_else(|| Error::InvalidInput(format!("no series named '{name}'")))
    }

    pub fn has_missing(&self) -> bool {
        self.values.iter().any(|v| is_missing(*v))
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| is_missing(**v)).count()
    }

    /// Error unless every cell is observed.
    pub fn require_complete(&self, context: &str) -> Result<()> {
        if self.has_missing() {
            Err(Error::MissingValues(format!(
                "{context}: {} missing cells",
                self.missing_count()
            )))
        } else {
            Ok(())
        }
    }

    pub fn with_values(&self, values: DMatrix<f64>) -> Result<Self> {
        Self::new(self.dates.clone(), self.names.clone(), values, self.frequency)
    }

    pub fn select(&self, names: &[&str]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| Error::InvalidInput(format!("no series named '{n}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        let values = DMatrix::from_fn(self.n_obs(), idx.len(), |i, j| self.values[(i, idx[j])]);
        Self::new(
            self.dates.clone(),
            names.iter().map(|s| s.to_string()).collect(),
            values,
            self.frequency,
        )
    }

    /// Rows `start..end`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Self> {
        let end = end.min(self.n_obs());
        let values = self.values.rows(start, end.saturating_sub(start)).into_owned();
        Self::new(
            self.dates[start..end].to_vec(),
            self.names.clone(),
            values,
            self.frequency,
        )
    }

    /// Drop every row that has at least one missing cell.
    pub fn drop_incomplete_rows(&self) -> Result<Self> {
        let keep: Vec<usize> = (0..self.n_obs())
            .filter(|&i| self.values.row(i).iter().all(|v| !is_missing(*v)))
            .collect();
        let values = DMatrix::from_fn(keep.len(), self.n_series(), |i, j| self.values[(keep[i], j)]);
        let dates = keep.iter().map(|&i| self.dates[i]).collect();
        // Row removal can break the spacing rule for monthly data; keep the
        // declared frequency only when it still holds.
        Self::new(dates, self.names.clone(), values.clone(), self.frequency).or_else(|_| {
            let dates: Vec<NaiveDate> = keep.iter().map(|&i| self.dates[i]).collect();
            Self::new(dates, self.names.clone(), values, Frequency::Daily)
        })
    }

    /// Inner join on dates with another panel of the same frequency.
    pub fn join(&self, other: &TimeSeriesPanel) -> Result<Self> {
        let mut names = self.names.clone();
        for n in &other.names {
            if names.contains(n) {
                return Err(Error::InvalidPanel(format!("duplicate series name '{n}' in join")));
            }
            names.push(n.clone());
        }
        let mut rows = Vec::new();
        let mut j = 0;
        for (i, d) in self.dates.iter().enumerate() {
            while j < other.dates.len() && other.dates[j] < *d {
                j += 1;
            }
            if j < other.dates.len() && other.dates[j] == *d {
                rows.push((i, j));
            }
        }
        let m1 = self.n_series();
        let values = DMatrix::from_fn(rows.len(), names.len(), |r, c| {
            let (i, j) = rows[r];
            if c < m1 {
                self.values[(i, c)]
            } else {
                other.values[(j, c - m1)]
            }
        });
        let dates: Vec<NaiveDate> = rows.iter().map(|(i, _)| self.dates[*i]).collect();
        Self::new(dates.clone(), names.clone(), values.clone(), self.frequency)
            .or_else(|_| Self::new(dates, names, values, Frequency::Daily))
    }

    /// Full-sample mean of each column over observed cells.
    pub fn column_means(&self) -> DVector<f64> {
        DVector::from_fn(self.n_series(), |j, _| {
            let (s, n) = self
                .values
                .column(j)
                .iter()
                .filter(|v| !is_missing(**v))
                .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
            if n == 0 {
                MISSING
            } else {
                s / n as f64
            }
        })
    }
}
