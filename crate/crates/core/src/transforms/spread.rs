use crate::error::{Error, Result};

/// `corp - govt`, elementwise.
pub fn corp_spread(corp_yield: &[f64], govt_yield: &[f64]) -> Result<Vec<f64>> {
    if corp_yield.len() != govt_yield.len() {
        return Err(Error::InvalidInput(format!(
            "spread length mismatch: {} vs {}",
            corp_yield.len(),
            govt_yield.len()
        )));
    }
    Ok(corp_yield.iter().zip(govt_yield).map(|(c, g)| c - g).collect())
}

/// Residual maturity bucket of a corporate bond index, in years.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaturityBucket {
    pub min_years: f64,
    pub max_years: Option<f64>,
}

/// Pick the government benchmark for a corporate index: the shortest tenor at
/// or beyond the bucket's upper end, or the longest tenor for open-ended
/// buckets.
pub fn matching_govt_yield<'a>(
    bucket: MaturityBucket,
    govt: &'a [(String, f64)],
) -> Result<&'a str> {
    if govt.is_empty() {
        return Err(Error::InvalidInput("no government yields to match against".into()));
    }
    let longest = govt
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty");
    let pick = match bucket.max_years {
        None => longest,
        Some(upper) => govt
            .iter()
            .filter(|(_, tenor)| *tenor >= upper)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or(longest),
    };
    Ok(pick.0.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_difference() {
        let s = corp_spread(&[5.0], &[3.5]).unwrap();
        assert!((s[0] - 1.5).abs() < 1e-12);
        let z = corp_spread(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!(z, vec![0.0, 0.0]);
        assert!(corp_spread(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn three_to_five_year_index_uses_five_year_gilt() {
        let govt = vec![("gilt_10y".to_string(), 10.0), ("gilt_5y".to_string(), 5.0)];
        let b = MaturityBucket {
            min_years: 3.0,
            max_years: Some(5.0),
        };
        assert_eq!(matching_govt_yield(b, &govt).unwrap(), "gilt_5y");
        let broad = MaturityBucket {
            min_years: 1.0,
            max_years: None,
        };
        assert_eq!(matching_govt_yield(broad, &govt).unwrap(), "gilt_10y");
    }
}
