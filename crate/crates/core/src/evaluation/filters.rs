//! Common-sample filters: every compared model must have a prediction, penny
//! stocks are dropped, and the pooled extreme percentage errors are trimmed
//! so all models are evaluated on one shared row set.

use thiserror::Error;

use super::{ForecastRow, Frequency, ModelTag};

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("no rows left after filtering")]
    AllFiltered,
    #[error("trim fraction must be in [0, 0.5), got {0}")]
    BadTrim(f64),
}

/// Apply the evaluation filters for one run:
/// 1. drop rows missing any of `models`' predictions at `freq`,
/// 2. drop rows with stock price below `penny_threshold`,
/// 3. drop rows whose actual EPS is zero (percentage error undefined),
/// 4. pool each surviving row's percentage error across `models` and drop
///    the rows carrying the ⌊trim·n⌋ smallest and largest pooled errors.
pub fn apply_sample_filters(
    rows: &[ForecastRow],
    models: &[ModelTag],
    freq: Frequency,
    trim: f64,
    penny_threshold: f64,
) -> Result<Vec<ForecastRow>, FilterError> {
    if !(0.0..0.5).contains(&trim) {
        return Err(FilterError::BadTrim(trim));
    }
    let retained: Vec<&ForecastRow> = rows
        .iter()
        .filter(|r| models.iter().all(|&m| r.prediction(m, freq).is_some()))
        .filter(|r| r.stock_price >= penny_threshold)
        .filter(|r| r.actual(freq) != 0.0)
        .collect();
    if retained.is_empty() {
        return Err(FilterError::AllFiltered);
    }

    // Pooled error ordering over (row, model) pairs, deterministic tie-break.
    let mut pooled: Vec<(f64, usize)> = Vec::with_capacity(retained.len() * models.len());
    for (i, row) in retained.iter().enumerate() {
        for &m in models {
            let err = row.error(m, freq).expect("prediction and actual checked above");
            pooled.push((err, i));
        }
    }
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let k = (trim * retained.len() as f64).floor() as usize;
    let mut drop = vec![false; retained.len()];
    let mut marked = 0usize;
    for &(_, idx) in pooled.iter() {
        if marked == k {
            break;
        }
        if !drop[idx] {
            drop[idx] = true;
            marked += 1;
        }
    }
    let mut marked_top = 0usize;
    for &(_, idx) in pooled.iter().rev() {
        if marked_top == k {
            break;
        }
        if !drop[idx] {
            drop[idx] = true;
            marked_top += 1;
        }
    }

    let kept: Vec<ForecastRow> = retained
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !drop[*i])
        .map(|(_, r)| r.clone())
        .collect();
    if kept.is_empty() {
        return Err(FilterError::AllFiltered);
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::super::tests_support::forecast_row;
    use super::*;

    #[test]
    fn penny_stock_dropped() {
        let mut cheap = forecast_row("a", 2020, 1, 0.5, 2.0);
        cheap.stock_price = 4.99;
        let ok = forecast_row("b", 2020, 1, 0.5, 2.0);
        let rows = vec![cheap, ok.clone(), ok];
        let kept =
            apply_sample_filters(&rows, &[ModelTag::Rnn], Frequency::Annual, 0.0, 5.0).unwrap();
        assert_eq!(kept.len(), 2);
        assert!(kept.iter().all(|r| r.firm_id.0 == "b"));
    }

    #[test]
    fn zero_actual_dropped_before_trimming() {
        let zero = forecast_row("z", 2020, 1, 0.4, 0.0);
        let ok = forecast_row("a", 2020, 1, 0.4, 1.0);
        let kept = apply_sample_filters(
            &[zero, ok],
            &[ModelTag::Rnn],
            Frequency::Annual,
            0.0,
            5.0,
        )
        .unwrap();
        assert_eq!(kept.len(), 1);
    }

    #[test]
    fn hundred_rows_single_model_trims_to_ninety() {
        let rows: Vec<ForecastRow> = (0..100)
            .map(|i| {
                let mut r = forecast_row(&format!("f{i:03}"), 2020, 1, 0.5, 1.0);
                // Spread the errors so the ordering is unambiguous.
                r.rnn_y = Some(1.0 - 0.01 * i as f64);
                r
            })
            .collect();
        let kept =
            apply_sample_filters(&rows, &[ModelTag::Rnn], Frequency::Annual, 0.05, 5.0).unwrap();
        assert_eq!(kept.len(), 90);
    }

    #[test]
    fn trim_count_exact_for_various_sizes() {
        for n in [20usize, 37, 100, 241] {
            let rows: Vec<ForecastRow> = (0..n)
                .map(|i| {
                    let mut r = forecast_row(&format!("f{i:04}"), 2020, 1, 0.5, 1.0);
                    r.rnn_y = Some(1.0 + 0.01 * i as f64);
                    r.analyst_y = Some(1.0 - 0.013 * i as f64);
                    r
                })
                .collect();
            let models = [ModelTag::Rnn, ModelTag::Analyst];
            let kept =
                apply_sample_filters(&rows, &models, Frequency::Annual, 0.05, 5.0).unwrap();
            let k = (0.05 * n as f64).floor() as usize;
            assert_eq!(kept.len(), n - 2 * k, "n = {n}");
        }
    }

    #[test]
    fn rows_missing_a_model_are_dropped() {
        let mut uncovered = forecast_row("u", 2020, 1, 0.5, 1.0);
        uncovered.analyst_y = None;
        uncovered.covered = false;
        let covered = forecast_row("c", 2020, 1, 0.5, 1.0);
        let rows = vec![uncovered.clone(), covered];
        let all = apply_sample_filters(&rows, &ModelTag::ALL, Frequency::Annual, 0.0, 5.0).unwrap();
        assert_eq!(all.len(), 1);
        // Excluding the analyst keeps the uncovered row.
        let three = [ModelTag::Rnn, ModelTag::Regression, ModelTag::RandomWalk];
        let no_analyst =
            apply_sample_filters(&rows, &three, Frequency::Annual, 0.0, 5.0).unwrap();
        assert_eq!(no_analyst.len(), 2);
    }

    #[test]
    fn all_rows_filtered_is_error() {
        let mut r = forecast_row("a", 2020, 1, 0.5, 1.0);
        r.stock_price = 1.0;
        let err = apply_sample_filters(&[r], &[ModelTag::Rnn], Frequency::Annual, 0.05, 5.0)
            .unwrap_err();
        assert_eq!(err, FilterError::AllFiltered);
    }
}
