use chrono::{Duration, NaiveDate, Weekday, Datelike};
use nsfsi_core::panel::{
    aggregate_to_monthly, ingest_csv, parse_csv, standardize, write_csv, AggregationMethod,
    CsvSchema, StandardizeWindow,
};
use nsfsi_core::Frequency;

fn daily_file(columns: usize, days: i64) -> String {
    let mut text = String::from("date");
    for j in 0..columns {
        text.push_str(&format!(",s{j}"));
    }
    text.push('\n');
    let start = NaiveDate::from_ymd_opt(2005, 1, 3).unwrap();
    for d in 0..days {
        let date = start + Duration::days(d);
        if matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
            continue;
        }
        text.push_str(&date.format("%Y-%m-%d").to_string());
        for j in 0..columns {
            if (d + j as i64) % 97 == 0 {
                text.push(',');
            } else {
                text.push_str(&format!(",{}", 100.0 + (d as f64 * 0.01 + j as f64).sin()));
            }
        }
        text.push('\n');
    }
    text
}

#[test]
fn eighteen_column_daily_file() {
    let dir = std::env::temp_dir().join(format!("nsfsi-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("daily.csv");
    std::fs::write(&path, daily_file(18, 800)).unwrap();
    let panel = ingest_csv(&path, &CsvSchema::default()).unwrap();
    assert_eq!(panel.n_series(), 18);
    assert_eq!(panel.frequency(), Frequency::Daily);
    assert!(panel.has_missing());

    let monthly = aggregate_to_monthly(&panel, AggregationMethod::Mean).unwrap();
    assert_eq!(monthly.frequency(), Frequency::Monthly);
    assert_eq!(monthly.n_series(), 18);
    assert!(!monthly.has_missing());

    let out = dir.join("monthly.csv");
    write_csv(&monthly, &out).unwrap();
    let back = ingest_csv(&out, &CsvSchema::default()).unwrap();
    assert_eq!(back.dates(), monthly.dates());
    let (z, record) = standardize(&back, StandardizeWindow::FullSample).unwrap();
    assert_eq!(record.names.len(), 18);
    assert_eq!(z.n_obs(), back.n_obs());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn small_file_with_gap() {
    let panel =
        parse_csv("date,a\n2020-01-01,1\n2020-01-02,\n2020-01-03,3\n", &CsvSchema::default())
            .unwrap();
    assert_eq!(panel.n_obs(), 3);
    assert_eq!(panel.missing_count(), 1);
    assert!(panel.values()[(1, 0)].is_nan());
}

#[test]
fn duplicate_dates_and_bad_numbers_are_rejected() {
    let dup = "date,a\n2020-01-01,1\n2020-01-01,2\n";
    assert!(parse_csv(dup, &CsvSchema::default()).is_err());
    let bad = "date,a\n2020-01-01,1\n2020-01-02,x\n";
    let err = parse_csv(bad, &CsvSchema::default()).unwrap_err().to_string();
    assert!(err.contains("row") && err.contains("'a'"), "{err}");
}
