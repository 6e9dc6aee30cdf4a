use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;

use super::{infer_frequency, is_missing, Frequency, TimeSeriesPanel, MISSING};
use crate::error::{Error, Result};

/// Which columns to keep and how to interpret the date spacing.
#[derive(Debug, Clone, Default)]
pub struct CsvSchema {
    /// Keep only these columns (in this order); `None` keeps all.
    pub columns: Option<Vec<String>>,
    /// Override the inferred frequency.
    pub frequency: Option<Frequency>,
}

pub fn ingest_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<TimeSeriesPanel> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_csv(&text, schema)
}

pub fn parse_csv(text: &str, schema: &CsvSchema) -> Result<TimeSeriesPanel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers()?.iter().map(|s| s.to_string()).collect();
    if headers.is_empty() || !headers[0].eq_ignore_ascii_case("date") {
        return Err(Error::Ingest {
            row: 0,
            column: headers.first().cloned().unwrap_or_default(),
            msg: "first header must be 'date'".into(),
        });
    }
    let all_names: Vec<String> = headers[1..].to_vec();
    let keep: Vec<usize> = match &schema.columns {
        None => (0..all_names.len()).collect(),
        Some(cols) => cols
            .iter()
            .map(|c| {
                all_names.iter().position(|n| n == c).ok_or_else(|| Error::Ingest {
                    row: 0,
                    column: c.clone(),
                    msg: "column not found in header".into(),
                })
            })
            .collect::<Result<_>>()?,
    };

    let mut rows: Vec<(NaiveDate, Vec<f64>)> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let raw_date = rec.get(0).unwrap_or("");
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|e| Error::Ingest {
            row,
            column: "date".into(),
            msg: format!("unparseable date '{raw_date}': {e}"),
        })?;
        let mut vals = Vec::with_capacity(keep.len());
        for &j in &keep {
            let cell = rec.get(j + 1).unwrap_or("");
            let v = if cell.is_empty() {
                MISSING
            } else {
                cell.parse::<f64>().map_err(|e| Error::Ingest {
                    row,
                    column: all_names[j].clone(),
                    msg: format!("unparseable number '{cell}': {e}"),
                })?
            };
            vals.push(v);
        }
        rows.push((date, vals));
    }
    rows.sort_by_key(|(d, _)| *d);
    for w in rows.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::Ingest {
                row: 0,
                column: "date".into(),
                msg: format!("duplicate date {}", w[0].0),
            });
        }
    }
    let dates: Vec<NaiveDate> = rows.iter().map(|(d, _)| *d).collect();
    let values = DMatrix::from_fn(rows.len(), keep.len(), |i, j| rows[i].1[j]);
    let names = keep.iter().map(|&j| all_names[j].clone()).collect();
    let freq = schema.frequency.unwrap_or_else(|| infer_frequency(&dates));
    TimeSeriesPanel::new(dates, names, values, freq)
}

/// Serialize with 12 significant digits in the shortest form that parses back
/// to the rounded value.
pub fn format_float(x: f64) -> String {
    if is_missing(x) {
        return String::new();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    format!("{rounded:?}")
}

pub fn write_csv_string(panel: &TimeSeriesPanel) -> String {
    let mut out = String::from("date");
    for n in panel.names() {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for (i, d) in panel.dates().iter().enumerate() {
        out.push_str(&d.format("%Y-%m-%d").to_string());
        for j in 0..panel.n_series() {
            out.push(',');
            out.push_str(&format_float(panel.values()[(i, j)]));
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(panel: &TimeSeriesPanel, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(write_csv_string(panel).as_bytes())?;
    Ok(())
}
