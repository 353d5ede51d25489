//! End-to-end wiring: raw panel → cleaned split → windows → trained
//! ensemble → aligned forecast rows for every model.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::benchmarks::{
    fit_regression_benchmark, regression_predict, AnnouncementState, PanelIndex, RandomWalk,
    RegressionBenchError, RegressionBenchmark,
};
use crate::evaluation::ForecastRow;
use crate::features::{
    apply_transforms, build_raw_windows, fit_feature_stats, FeatureStats, FeatureWindow, RawWindow,
    WindowLog,
};
use crate::forecaster::{train_ensemble, EnsembleModel, TrainConfig, TrainError};
use crate::panel::{
    chronological_split, prepare_panel, CleanLog, DailyMarketRecord, FirmId, QuarterRecord,
    SplitDataset, SplitError,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Regression(#[from] RegressionBenchError),
    #[error("no feature windows in the {0} partition")]
    EmptyWindows(&'static str),
}

/// Cleaned panel with its audit log and chronological split.
pub struct PreparedPanel {
    pub records: Vec<QuarterRecord>,
    pub clean_log: CleanLog,
    pub split: SplitDataset,
}

pub fn prepare_and_split(
    raw: Vec<QuarterRecord>,
    fractions: (f64, f64, f64),
) -> Result<PreparedPanel, PipelineError> {
    let (records, clean_log) = prepare_panel(raw);
    let split = chronological_split(records.clone(), fractions)?;
    Ok(PreparedPanel { records, clean_log, split })
}

fn key_set(records: &[QuarterRecord]) -> HashSet<(FirmId, i32, u8)> {
    records
        .iter()
        .filter_map(|r| r.yq().map(|(y, q)| (r.firm_id.clone(), y, q)))
        .collect()
}

/// Feature windows split by the target's partition membership.
pub struct WindowPartitions {
    pub train: Vec<FeatureWindow>,
    pub validation: Vec<FeatureWindow>,
    pub test: Vec<FeatureWindow>,
    pub stats: FeatureStats,
    pub log: WindowLog,
}

/// Build all windows over the full cleaned panel (history crosses partition
/// boundaries), fit transform stats on the training windows only, and
/// standardize everything with those frozen stats.
pub fn build_window_partitions(
    prepared: &PreparedPanel,
    market: &[DailyMarketRecord],
) -> Result<WindowPartitions, PipelineError> {
    partition_impl(prepared, market, None)
}

/// Same construction with externally supplied stats (e.g. from a saved model
/// bundle), so inference uses identical transforms to training.
pub fn build_window_partitions_with_stats(
    prepared: &PreparedPanel,
    market: &[DailyMarketRecord],
    stats: &FeatureStats,
) -> Result<WindowPartitions, PipelineError> {
    partition_impl(prepared, market, Some(stats))
}

fn partition_impl(
    prepared: &PreparedPanel,
    market: &[DailyMarketRecord],
    given_stats: Option<&FeatureStats>,
) -> Result<WindowPartitions, PipelineError> {
    let (raw, log) = build_raw_windows(&prepared.records, market);
    let train_keys = key_set(&prepared.split.train);
    let val_keys = key_set(&prepared.split.validation);
    let test_keys = key_set(&prepared.split.test);

    let of_partition = |keys: &HashSet<(FirmId, i32, u8)>| -> Vec<&RawWindow> {
        raw.iter()
            .filter(|w| {
                keys.contains(&(w.meta.firm_id.clone(), w.meta.fiscal_year, w.meta.fiscal_quarter))
            })
            .collect()
    };
    let train_raw = of_partition(&train_keys);
    if train_raw.is_empty() {
        return Err(PipelineError::EmptyWindows("train"));
    }
    let stats = match given_stats {
        Some(s) => s.clone(),
        None => {
            let train_owned: Vec<RawWindow> = train_raw.iter().map(|w| (*w).clone()).collect();
            fit_feature_stats(&train_owned)
        }
    };

    let finalize = |subset: Vec<&RawWindow>| -> Vec<FeatureWindow> {
        subset.into_iter().map(|w| apply_transforms(w, &stats)).collect()
    };
    let train = finalize(train_raw);
    let validation = finalize(of_partition(&val_keys));
    let test = finalize(of_partition(&test_keys));
    if validation.is_empty() {
        return Err(PipelineError::EmptyWindows("validation"));
    }
    Ok(WindowPartitions { train, validation, test, stats, log })
}

/// Train the ensemble on prepared window partitions.
pub fn train_model(
    partitions: &WindowPartitions,
    config: &TrainConfig,
) -> Result<EnsembleModel, PipelineError> {
    Ok(train_ensemble(config, &partitions.train, &partitions.validation, &partitions.stats)?)
}

/// Per-firm market day index for announcement-time lookups.
pub struct MarketIndex<'a> {
    by_firm: HashMap<&'a FirmId, Vec<&'a DailyMarketRecord>>,
}

impl<'a> MarketIndex<'a> {
    pub fn new(market: &'a [DailyMarketRecord]) -> MarketIndex<'a> {
        let mut by_firm: HashMap<&FirmId, Vec<&DailyMarketRecord>> = HashMap::new();
        for d in market {
            by_firm.entry(&d.firm_id).or_default().push(d);
        }
        for days in by_firm.values_mut() {
            days.sort_by_key(|d| d.date);
        }
        MarketIndex { by_firm }
    }

    /// Most recent Tobin's q strictly before the date.
    pub fn tobins_q_before(&self, firm: &FirmId, date: chrono::NaiveDate) -> Option<f64> {
        let days = self.by_firm.get(firm)?;
        let idx = days.partition_point(|d| d.date < date);
        if idx == 0 {
            None
        } else {
            Some(days[idx - 1].tobins_q)
        }
    }
}

/// Assemble the aligned forecast rows for a set of target windows: ensemble
/// predictions, analyst columns from the target record, the regression
/// benchmark and the seasonal random walk, plus the metadata the evaluation
/// slices need.
pub fn build_forecast_rows(
    panel: &[QuarterRecord],
    market: &[DailyMarketRecord],
    model: &EnsembleModel,
    regression: &RegressionBenchmark,
    targets: &[FeatureWindow],
) -> Vec<ForecastRow> {
    let record_by_key: HashMap<(FirmId, i32, u8), &QuarterRecord> = panel
        .iter()
        .filter_map(|r| r.yq().map(|(y, q)| ((r.firm_id.clone(), y, q), r)))
        .collect();
    let index = PanelIndex::new(panel);
    let random_walk = RandomWalk::new(panel);
    let market_index = MarketIndex::new(market);
    let rnn = model.predict(targets);

    let mut rows = Vec::with_capacity(targets.len());
    for (w, &(rnn_q, rnn_y)) in targets.iter().zip(&rnn) {
        let key = (w.meta.firm_id.clone(), w.meta.fiscal_year, w.meta.fiscal_quarter);
        let Some(record) = record_by_key.get(&key) else { continue };

        let rw = random_walk.predict(&w.meta.firm_id, w.meta.fiscal_year, w.meta.fiscal_quarter);
        let reg = AnnouncementState::from_index(
            &index,
            &w.meta.firm_id,
            w.meta.fiscal_year,
            w.meta.fiscal_quarter,
        )
        .map(|state| regression_predict(regression, &state))
        .unwrap_or_default();

        let covered = record.analyst_q_eps.is_some() || record.analyst_y_eps.is_some();
        rows.push(ForecastRow {
            firm_id: w.meta.firm_id.clone(),
            report_date: Some(w.meta.report_date),
            fiscal_year: w.meta.fiscal_year,
            fiscal_quarter: w.meta.fiscal_quarter,
            industry: record.industry.clone(),
            total_assets: record.total_assets,
            stock_price: record.stock_price,
            tobins_q: market_index
                .tobins_q_before(&w.meta.firm_id, w.meta.report_date)
                .unwrap_or(f64::NAN),
            covered,
            actual_q: w.target_q_eps,
            actual_y: w.target_y_eps,
            prev_q_eps: index.eps(&w.meta.firm_id, w.meta.fiscal_year - 1, w.meta.fiscal_quarter),
            prev_y_eps: index.annual_eps(&w.meta.firm_id, w.meta.fiscal_year - 1),
            rnn_q: Some(rnn_q),
            rnn_y: Some(rnn_y),
            analyst_q: record.analyst_q_eps,
            analyst_y: record.analyst_y_eps,
            regression_q: reg.q_eps,
            regression_y: reg.y_eps,
            random_walk_q: rw.q_eps,
            random_walk_y: rw.y_eps,
        });
    }
    rows
}

/// Fit the regression benchmark on the training partition.
pub fn fit_benchmark(prepared: &PreparedPanel) -> Result<RegressionBenchmark, PipelineError> {
    Ok(fit_regression_benchmark(&prepared.split.train)?)
}
