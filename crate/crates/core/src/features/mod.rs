//! Model input construction: the 20×6 standardized accounting time series
//! and the 10-element market vector, with per-share scaling, signed-log
//! transforms, winsorization and studentization.

mod market;
mod stats;

pub use market::{compress_market_window, tobins_q, MarketError, MARKET_WINDOW_DAYS, TRADING_DAYS_PER_YEAR};
pub use stats::{percentile_bounds, FeatureStat, FeatureStats, TargetStat, FEATURE_STATS_VERSION};

use std::collections::HashMap;

use chrono::NaiveDate;
use thiserror::Error;

use crate::panel::{DailyMarketRecord, FirmId, QuarterRecord};

/// Quarters of accounting history per window.
pub const WINDOW_LEN: usize = 20;
/// Columns of the accounting matrix.
pub const ACC_DIM: usize = 6;
/// Length of the market feature vector (6 compressed variables + 4 dummies).
pub const MARKET_DIM: usize = 10;

pub const ACC_FEATURE_NAMES: [&str; ACC_DIM] = [
    "eps_ps",
    "log_total_assets",
    "equity_ratio",
    "dividend_ps",
    "accruals_ps",
    "time_to_announcement_years",
];

pub const MARKET_FEATURE_NAMES: [&str; 6] = [
    "avg_daily_stock_return",
    "avg_daily_volume_ps",
    "avg_daily_market_return",
    "avg_daily_dvol_index",
    "avg_daily_dtobins_q",
    "period_length_years",
];

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("shares outstanding must be positive, got {0}")]
    ZeroShares(f64),
}

/// log(1 + |x|) · sign(x): defined for negative and zero values, unlike a
/// plain log, which the index and Tobin's q changes require.
#[inline]
pub fn signed_log(x: f64) -> f64 {
    (1.0 + x.abs()).ln() * x.signum()
}

/// Per-share quantities of one record. EPS arrives per share already;
/// dividends and accruals are totals and get divided by shares.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledQuarter {
    pub eps_ps: f64,
    pub dividend_ps: f64,
    pub accruals_ps: f64,
    pub equity_ratio: f64,
}

pub fn per_share_scale(record: &QuarterRecord) -> Result<ScaledQuarter, FeatureError> {
    if record.shares_outstanding <= 0.0 || record.shares_outstanding.is_nan() {
        return Err(FeatureError::ZeroShares(record.shares_outstanding));
    }
    Ok(ScaledQuarter {
        eps_ps: record.eps,
        dividend_ps: record.dividends_total / record.shares_outstanding,
        accruals_ps: record.accruals_total / record.shares_outstanding,
        equity_ratio: record.book_equity / record.total_assets,
    })
}

/// Identifying metadata of one window.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowMeta {
    pub firm_id: FirmId,
    pub report_date: NaiveDate,
    pub fiscal_year: i32,
    pub fiscal_quarter: u8,
    /// Newest accounting input date; strictly before `report_date`.
    pub newest_input_date: NaiveDate,
    /// Last market day used; strictly before `report_date`.
    pub market_end_date: NaiveDate,
}

/// Window in raw feature space: signed-log transforms applied, but not yet
/// winsorized/studentized or padded. Rows are oldest→newest.
#[derive(Clone, Debug)]
pub struct RawWindow {
    pub acc_rows: Vec<[f64; ACC_DIM]>,
    pub market_raw: [f64; 6],
    pub target_q_eps: f64,
    pub target_y_eps: f64,
    pub meta: WindowMeta,
}

/// Finished model input: standardized, zero-padded at the oldest end.
#[derive(Clone, Debug)]
pub struct FeatureWindow {
    /// Exactly [`WINDOW_LEN`] rows; rows `0..pad_len` are all zero.
    pub acc: Vec<[f64; ACC_DIM]>,
    pub pad_len: usize,
    pub market: [f64; MARKET_DIM],
    pub target_q_eps: f64,
    pub target_y_eps: f64,
    pub meta: WindowMeta,
}

/// Skipped-announcement counters from window construction.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WindowLog {
    pub built: usize,
    pub skipped_no_history: usize,
    pub skipped_no_market: usize,
    pub skipped_incomplete_year: usize,
    pub skipped_invalid: usize,
}

/// Build windows in raw feature space for every eligible announcement in the
/// panel. History and annual-target sums come from the same panel.
pub fn build_raw_windows(
    panel: &[QuarterRecord],
    market: &[DailyMarketRecord],
) -> (Vec<RawWindow>, WindowLog) {
    let mut log = WindowLog::default();

    // Per-firm history sorted by report date.
    let mut by_firm: HashMap<&FirmId, Vec<&QuarterRecord>> = HashMap::new();
    for r in panel {
        by_firm.entry(&r.firm_id).or_default().push(r);
    }
    for records in by_firm.values_mut() {
        records.sort_by_key(|r| (r.report_date, r.fiscal_year, r.fiscal_quarter));
    }

    // Fiscal-year EPS sums for the annual target.
    let mut year_sum: HashMap<(&FirmId, i32), (f64, u8)> = HashMap::new();
    for r in panel {
        if let Some((y, _)) = r.yq() {
            let e = year_sum.entry((&r.firm_id, y)).or_insert((0.0, 0));
            e.0 += r.eps;
            e.1 += 1;
        }
    }

    // Per-firm market days sorted by date.
    let mut market_by_firm: HashMap<&FirmId, Vec<&DailyMarketRecord>> = HashMap::new();
    for d in market {
        market_by_firm.entry(&d.firm_id).or_default().push(d);
    }
    for days in market_by_firm.values_mut() {
        days.sort_by_key(|d| d.date);
    }

    let mut ordered: Vec<&QuarterRecord> = panel.iter().collect();
    ordered.sort_by(|a, b| {
        (&a.firm_id, a.report_date, a.fiscal_year, a.fiscal_quarter)
            .cmp(&(&b.firm_id, b.report_date, b.fiscal_year, b.fiscal_quarter))
    });

    let mut windows = Vec::new();
    for target in ordered {
        let Some((year, quarter)) = target.yq() else {
            log.skipped_invalid += 1;
            continue;
        };

        let history = &by_firm[&target.firm_id];
        let cut = history.partition_point(|r| r.report_date < target.report_date);
        if cut == 0 {
            log.skipped_no_history += 1;
            continue;
        }
        let start = cut.saturating_sub(WINDOW_LEN);
        let used = &history[start..cut];

        let (sum, count) = year_sum[&(&target.firm_id, year)];
        if count != 4 {
            log.skipped_incomplete_year += 1;
            continue;
        }

        let days_all = match market_by_firm.get(&target.firm_id) {
            Some(d) => d,
            None => {
                log.skipped_no_market += 1;
                continue;
            }
        };
        let mcut = days_all.partition_point(|d| d.date < target.report_date);
        if mcut == 0 {
            log.skipped_no_market += 1;
            continue;
        }
        let mstart = mcut.saturating_sub(MARKET_WINDOW_DAYS);
        let day_refs: Vec<DailyMarketRecord> =
            days_all[mstart..mcut].iter().map(|d| (*d).clone()).collect();
        let mut market_raw =
            compress_market_window(&day_refs).expect("window non-empty by construction");
        market_raw[3] = signed_log(market_raw[3]);
        market_raw[4] = signed_log(market_raw[4]);

        let mut acc_rows = Vec::with_capacity(used.len());
        let mut scale_failed = false;
        for h in used {
            let scaled = match per_share_scale(h) {
                Ok(s) => s,
                Err(_) => {
                    scale_failed = true;
                    break;
                }
            };
            let tta =
                (target.report_date - h.report_date).num_days() as f64 / 365.25;
            acc_rows.push([
                scaled.eps_ps,
                signed_log(h.total_assets),
                scaled.equity_ratio,
                signed_log(scaled.dividend_ps),
                scaled.accruals_ps,
                tta,
            ]);
        }
        if scale_failed {
            log.skipped_invalid += 1;
            continue;
        }

        windows.push(RawWindow {
            acc_rows,
            market_raw,
            target_q_eps: target.eps,
            target_y_eps: sum,
            meta: WindowMeta {
                firm_id: target.firm_id.clone(),
                report_date: target.report_date,
                fiscal_year: year,
                fiscal_quarter: quarter,
                newest_input_date: used.last().unwrap().report_date,
                market_end_date: day_refs.last().unwrap().date,
            },
        });
        log.built += 1;
    }
    (windows, log)
}

/// Fit winsor bounds and moments on training windows. Accounting features
/// pool every real (unpadded) row; market features and targets pool one
/// value per window.
pub fn fit_feature_stats(train: &[RawWindow]) -> FeatureStats {
    assert!(!train.is_empty(), "cannot fit stats on an empty training set");
    let mut acc_cols: Vec<Vec<f64>> = vec![Vec::new(); ACC_DIM];
    let mut market_cols: Vec<Vec<f64>> = vec![Vec::new(); 6];
    let mut tq = Vec::with_capacity(train.len());
    let mut ty = Vec::with_capacity(train.len());
    for w in train {
        for row in &w.acc_rows {
            for (col, &v) in acc_cols.iter_mut().zip(row) {
                col.push(v);
            }
        }
        for (col, &v) in market_cols.iter_mut().zip(&w.market_raw) {
            col.push(v);
        }
        tq.push(w.target_q_eps);
        ty.push(w.target_y_eps);
    }
    FeatureStats {
        format_version: FEATURE_STATS_VERSION,
        fitted_on: "train".to_string(),
        acc: ACC_FEATURE_NAMES
            .iter()
            .zip(&acc_cols)
            .map(|(name, col)| FeatureStat::fit(name, col))
            .collect(),
        market: MARKET_FEATURE_NAMES
            .iter()
            .zip(&market_cols)
            .map(|(name, col)| FeatureStat::fit(name, col))
            .collect(),
        target_q: TargetStat::fit(&tq),
        target_y: TargetStat::fit(&ty),
    }
}

/// Winsorize + studentize one raw window with frozen stats, then zero-pad to
/// the fixed shape. Quarter dummies are binary and pass through untouched.
pub fn apply_transforms(raw: &RawWindow, stats: &FeatureStats) -> FeatureWindow {
    let pad_len = WINDOW_LEN - raw.acc_rows.len();
    let mut acc = vec![[0.0; ACC_DIM]; WINDOW_LEN];
    for (i, row) in raw.acc_rows.iter().enumerate() {
        let out = &mut acc[pad_len + i];
        for j in 0..ACC_DIM {
            out[j] = stats.acc[j].transform(row[j]);
        }
    }
    let mut market = [0.0; MARKET_DIM];
    for j in 0..6 {
        market[j] = stats.market[j].transform(raw.market_raw[j]);
    }
    market[5 + raw.meta.fiscal_quarter as usize] = 1.0;
    FeatureWindow {
        acc,
        pad_len,
        market,
        target_q_eps: raw.target_q_eps,
        target_y_eps: raw.target_y_eps,
        meta: raw.meta.clone(),
    }
}

/// Full construction with frozen stats: every eligible announcement in the
/// panel becomes one standardized window.
pub fn build_windows(
    panel: &[QuarterRecord],
    market: &[DailyMarketRecord],
    stats: &FeatureStats,
) -> (Vec<FeatureWindow>, WindowLog) {
    let (raw, log) = build_raw_windows(panel, market);
    let windows = raw.iter().map(|w| apply_transforms(w, stats)).collect();
    (windows, log)
}
