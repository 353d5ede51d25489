//! Percentage-difference accuracy and bias measures. MPD is the median of
//! (actual − forecast) / actual; MAPD the median of its absolute value. A
//! negative MPD means systematically over-optimistic forecasts.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("percentage difference undefined for actual = 0")]
    ZeroActual,
    #[error("empty sample")]
    Empty,
}

#[inline]
pub fn percentage_difference(actual: f64, predicted: f64) -> Result<f64, MetricError> {
    if actual == 0.0 {
        return Err(MetricError::ZeroActual);
    }
    Ok((actual - predicted) / actual)
}

/// Median with the even-count midpoint convention.
pub fn median(values: &[f64]) -> Result<f64, MetricError> {
    if values.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Ok(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    })
}

/// Median percentage difference (bias), as a fraction.
pub fn mpd(errors: &[f64]) -> Result<f64, MetricError> {
    median(errors)
}

/// Median absolute percentage difference (accuracy), as a fraction.
pub fn mapd(errors: &[f64]) -> Result<f64, MetricError> {
    let abs: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    median(&abs)
}

/// Which measure a significance test refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricKind {
    Mapd,
    Mpd,
}

#[derive(Clone, Debug)]
pub struct TestResult {
    pub name: String,
    pub metric: MetricKind,
    pub statistic: f64,
    pub p_value: f64,
}

/// Metric values for one evaluation slice and model. Percentages are stored
/// ×100 for reporting.
#[derive(Clone, Debug)]
pub struct EvalReport {
    pub slice: String,
    pub model: String,
    pub n: usize,
    pub mapd_pct: f64,
    pub mpd_pct: f64,
    pub tests: Vec<TestResult>,
}
