//! Chronological train/validation/test split by report date.

use chrono::NaiveDate;
use thiserror::Error;

use super::QuarterRecord;

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("cannot split an empty panel")]
    Empty,
    #[error("fractions must sum to 1, got {0}")]
    BadFractions(f64),
}

/// Ordered partitions plus the boundary dates (last train date, last
/// validation date).
#[derive(Clone, Debug)]
pub struct SplitDataset {
    pub train: Vec<QuarterRecord>,
    pub validation: Vec<QuarterRecord>,
    pub test: Vec<QuarterRecord>,
    pub boundaries: (NaiveDate, NaiveDate),
}

impl SplitDataset {
    pub fn total(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }
}

/// Sorts by report date (ties broken by firm then quarter for determinism)
/// and cuts at the cumulative fractions, rounding boundaries to the nearest
/// record.
pub fn chronological_split(
    records: Vec<QuarterRecord>,
    fractions: (f64, f64, f64),
) -> Result<SplitDataset, SplitError> {
    if records.is_empty() {
        return Err(SplitError::Empty);
    }
    let sum = fractions.0 + fractions.1 + fractions.2;
    if (sum - 1.0).abs() > 1e-9 {
        return Err(SplitError::BadFractions(sum));
    }

    let mut sorted = records;
    sorted.sort_by(|a, b| {
        (a.report_date, &a.firm_id, a.fiscal_quarter, a.fiscal_year)
            .cmp(&(b.report_date, &b.firm_id, b.fiscal_quarter, b.fiscal_year))
    });

    let n = sorted.len();
    let cut1 = ((n as f64) * fractions.0).round() as usize;
    let cut2 = ((n as f64) * (fractions.0 + fractions.1)).round() as usize;
    let cut1 = cut1.min(n);
    let cut2 = cut2.clamp(cut1, n);

    let test = sorted.split_off(cut2);
    let validation = sorted.split_off(cut1);
    let train = sorted;

    let last_date = |part: &[QuarterRecord], fallback: NaiveDate| {
        part.last().map(|r| r.report_date).unwrap_or(fallback)
    };
    let first_date = train
        .first()
        .or(validation.first())
        .or(test.first())
        .map(|r| r.report_date)
        .expect("non-empty checked");
    let b1 = last_date(&train, first_date);
    let b2 = last_date(&validation, b1);

    Ok(SplitDataset { train, validation, test, boundaries: (b1, b2) })
}
