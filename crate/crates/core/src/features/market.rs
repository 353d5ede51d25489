//! Compression of the daily market window into per-day features.

use thiserror::Error;

use crate::panel::DailyMarketRecord;

pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;
/// Days observed before an announcement: one quarter of trading days.
pub const MARKET_WINDOW_DAYS: usize = 63;

#[derive(Debug, Error, PartialEq)]
pub enum MarketError {
    #[error("market window needs at least one day")]
    EmptyWindow,
    #[error("Tobin's q denominator is zero (bve + bvl = 0)")]
    ZeroDenominator,
}

/// (market equity + book liabilities) / (book equity + book liabilities).
pub fn tobins_q(mve: f64, bvl: f64, bve: f64) -> Result<f64, MarketError> {
    let denom = bve + bvl;
    if denom == 0.0 {
        return Err(MarketError::ZeroDenominator);
    }
    Ok((mve + bvl) / denom)
}

/// Raw per-day market features of one announcement window, before any
/// winsorization/studentization:
/// `[avg log stock return, avg volume per share, avg log market return,
///   Δ vol index / day, Δ Tobin's q / day, period length in years]`.
///
/// Returns from the records are simple daily returns; cumulation happens in
/// log space. Index and Tobin's q changes are end minus start. Everything
/// except the period length is divided by the day count.
pub fn compress_market_window(days: &[DailyMarketRecord]) -> Result<[f64; 6], MarketError> {
    if days.is_empty() {
        return Err(MarketError::EmptyWindow);
    }
    let n = days.len() as f64;
    let mut log_stock = 0.0;
    let mut volume = 0.0;
    let mut log_market = 0.0;
    for d in days {
        log_stock += (1.0 + d.stock_return).ln();
        volume += d.volume_per_share;
        log_market += (1.0 + d.market_return).ln();
    }
    let first = &days[0];
    let last = &days[days.len() - 1];
    Ok([
        log_stock / n,
        volume / n,
        log_market / n,
        (last.vol_index_level - first.vol_index_level) / n,
        (last.tobins_q - first.tobins_q) / n,
        n / TRADING_DAYS_PER_YEAR,
    ])
}
