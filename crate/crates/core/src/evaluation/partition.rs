//! Partitioned comparisons: per-quarter, size-decile, industry, year,
//! covid-window and coverage slices, plus the whole-sample model comparison
//! and the sign-prediction scoring.

use std::collections::BTreeMap;

use chrono::NaiveDate;

use super::metrics::{mapd, mpd, EvalReport, MetricKind, TestResult};
use super::rank_tests::{mann_whitney_u, wilcoxon_signed_rank};
use super::sign::{macro_metrics, sign_classify, SignConfusion, SignReport};
use super::{ForecastRow, Frequency, ModelTag};

/// Slicing dimension for [`partition_evaluate`].
#[derive(Clone, Debug, PartialEq)]
pub enum SliceKey {
    /// Fiscal quarter of the announcement; annual runs compare Q1 vs Q4.
    Quarter,
    /// Size deciles by total assets over the evaluation sample.
    SizeDecile,
    /// Sector label, "Other" for missing.
    Industry,
    /// Fiscal year.
    Year,
    /// Pre/during split at the given start date; the during-cell runs to
    /// the sample end.
    Covid(NaiveDate),
    /// Analyst coverage.
    Coverage,
}

fn cell_metrics(
    slice: &str,
    model: ModelTag,
    rows: &[&ForecastRow],
    freq: Frequency,
) -> EvalReport {
    let errors: Vec<f64> = rows.iter().filter_map(|r| r.error(model, freq)).collect();
    let (mapd_pct, mpd_pct) = if errors.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (100.0 * mapd(&errors).unwrap(), 100.0 * mpd(&errors).unwrap())
    };
    EvalReport {
        slice: slice.to_string(),
        model: model.as_str().to_string(),
        n: errors.len(),
        mapd_pct,
        mpd_pct,
        tests: Vec::new(),
    }
}

/// Unpaired cell-vs-cell comparison on |error| (MAPD) and error (MPD).
fn cell_comparison_tests(
    name: &str,
    a: &[f64],
    b: &[f64],
) -> Vec<TestResult> {
    let mut out = Vec::new();
    if a.is_empty() || b.is_empty() {
        return out;
    }
    let abs_a: Vec<f64> = a.iter().map(|e| e.abs()).collect();
    let abs_b: Vec<f64> = b.iter().map(|e| e.abs()).collect();
    if let Ok(r) = mann_whitney_u(&abs_a, &abs_b) {
        out.push(TestResult {
            name: format!("mann_whitney {name}"),
            metric: MetricKind::Mapd,
            statistic: r.statistic,
            p_value: r.p_value,
        });
    }
    if let Ok(r) = mann_whitney_u(a, b) {
        out.push(TestResult {
            name: format!("mann_whitney {name}"),
            metric: MetricKind::Mpd,
            statistic: r.statistic,
            p_value: r.p_value,
        });
    }
    out
}

/// Nearest-rank decile boundaries; values at or below the d-th boundary fall
/// in decile d.
fn decile_of(value: f64, boundaries: &[f64; 9]) -> usize {
    for (d, b) in boundaries.iter().enumerate() {
        if value <= *b {
            return d + 1;
        }
    }
    10
}

/// Metric reports per cell per model. Cells with a fixed universe (quarters,
/// deciles, covid, coverage) are always emitted, empty ones with n = 0;
/// industries and years emit observed cells only.
pub fn partition_evaluate(
    rows: &[ForecastRow],
    key: &SliceKey,
    models: &[ModelTag],
    freq: Frequency,
) -> Vec<EvalReport> {
    // Cell label per row, plus the fixed cell universe when one exists.
    let mut boundaries = [0.0f64; 9];
    if matches!(key, SliceKey::SizeDecile) {
        let mut assets: Vec<f64> = rows.iter().map(|r| r.total_assets).collect();
        assets.sort_by(f64::total_cmp);
        if !assets.is_empty() {
            let n = assets.len();
            for d in 1..=9usize {
                let rank = ((0.1 * d as f64) * n as f64).ceil() as usize;
                boundaries[d - 1] = assets[rank.clamp(1, n) - 1];
            }
        }
    }
    let label_of = |r: &ForecastRow| -> String {
        match key {
            SliceKey::Quarter => format!("Q{}", r.fiscal_quarter),
            SliceKey::SizeDecile => format!("decile {:02}", decile_of(r.total_assets, &boundaries)),
            SliceKey::Industry => r.industry.clone(),
            SliceKey::Year => r.fiscal_year.to_string(),
            SliceKey::Covid(start) => match r.report_date {
                Some(d) if d >= *start => "during-covid".to_string(),
                Some(_) => "pre-covid".to_string(),
                None => "undated".to_string(),
            },
            SliceKey::Coverage => {
                if r.covered {
                    "covered".to_string()
                } else {
                    "uncovered".to_string()
                }
            }
        }
    };

    let mut cells: BTreeMap<String, Vec<&ForecastRow>> = BTreeMap::new();
    match key {
        SliceKey::Quarter => {
            for q in 1..=4 {
                cells.insert(format!("Q{q}"), Vec::new());
            }
        }
        SliceKey::SizeDecile => {
            for d in 1..=10 {
                cells.insert(format!("decile {d:02}"), Vec::new());
            }
        }
        SliceKey::Covid(_) => {
            cells.insert("pre-covid".to_string(), Vec::new());
            cells.insert("during-covid".to_string(), Vec::new());
        }
        SliceKey::Coverage => {
            cells.insert("covered".to_string(), Vec::new());
            cells.insert("uncovered".to_string(), Vec::new());
        }
        SliceKey::Industry | SliceKey::Year => {}
    }
    for r in rows {
        cells.entry(label_of(r)).or_default().push(r);
    }

    let mut reports = Vec::new();
    for (label, cell_rows) in &cells {
        for &model in models {
            let mut report = cell_metrics(label, model, cell_rows, freq);
            // Caption-mandated comparisons, attached to the right-hand cell.
            match key {
                SliceKey::Quarter if label == "Q4" => {
                    let q1: Vec<f64> = cells["Q1"].iter().filter_map(|r| r.error(model, freq)).collect();
                    let q4: Vec<f64> = cell_rows.iter().filter_map(|r| r.error(model, freq)).collect();
                    report.tests = cell_comparison_tests("Q1 vs Q4", &q1, &q4);
                }
                SliceKey::Covid(_) if label == "during-covid" => {
                    let pre: Vec<f64> =
                        cells["pre-covid"].iter().filter_map(|r| r.error(model, freq)).collect();
                    let during: Vec<f64> = cell_rows.iter().filter_map(|r| r.error(model, freq)).collect();
                    report.tests = cell_comparison_tests("pre vs during", &pre, &during);
                }
                SliceKey::Coverage if label == "uncovered" => {
                    let covered: Vec<f64> =
                        cells["covered"].iter().filter_map(|r| r.error(model, freq)).collect();
                    let uncovered: Vec<f64> =
                        cell_rows.iter().filter_map(|r| r.error(model, freq)).collect();
                    report.tests = cell_comparison_tests("covered vs uncovered", &covered, &uncovered);
                }
                _ => {}
            }
            reports.push(report);
        }
    }
    reports
}

/// Whole-sample metrics with paired Wilcoxon tests of every other model
/// against `base`, on |error| (MAPD row) and error (MPD row).
pub fn overall_evaluate(
    rows: &[ForecastRow],
    models: &[ModelTag],
    freq: Frequency,
    base: ModelTag,
) -> Vec<EvalReport> {
    let base_errors: Vec<f64> = rows.iter().filter_map(|r| r.error(base, freq)).collect();
    let mut reports = Vec::new();
    for &model in models {
        let errors: Vec<f64> = rows.iter().filter_map(|r| r.error(model, freq)).collect();
        let mut report = cell_metrics("all", model, &rows.iter().collect::<Vec<_>>(), freq);
        if model != base && errors.len() == base_errors.len() && !errors.is_empty() {
            let abs_base: Vec<f64> = base_errors.iter().map(|e| e.abs()).collect();
            let abs_model: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
            if let Ok(r) = wilcoxon_signed_rank(&abs_model, &abs_base) {
                report.tests.push(TestResult {
                    name: format!("wilcoxon vs {}", base.as_str()),
                    metric: MetricKind::Mapd,
                    statistic: r.statistic,
                    p_value: r.p_value,
                });
            }
            if let Ok(r) = wilcoxon_signed_rank(&errors, &base_errors) {
                report.tests.push(TestResult {
                    name: format!("wilcoxon vs {}", base.as_str()),
                    metric: MetricKind::Mpd,
                    statistic: r.statistic,
                    p_value: r.p_value,
                });
            }
        }
        reports.push(report);
    }
    reports
}

/// Sign-prediction scoring per model: classify the year-over-year change of
/// the actual and of each model's prediction against the same base, then
/// compute macro metrics. Rows without a usable base are excluded.
pub fn sign_prediction_report(
    rows: &[ForecastRow],
    models: &[ModelTag],
    freq: Frequency,
    threshold: f64,
) -> Vec<(ModelTag, SignReport)> {
    let mut out = Vec::new();
    for &model in models {
        let mut confusion = SignConfusion::default();
        for r in rows {
            let Some(prev) = r.prev_actual(freq) else { continue };
            let Some(actual_class) = sign_classify(r.actual(freq), prev, threshold) else {
                continue;
            };
            let Some(pred) = r.prediction(model, freq) else { continue };
            let Some(pred_class) = sign_classify(pred, prev, threshold) else { continue };
            confusion.add(actual_class, pred_class);
        }
        if let Ok(report) = macro_metrics(&confusion) {
            out.push((model, report));
        }
    }
    out
}
