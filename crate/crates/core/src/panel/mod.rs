//! Panel ingest: CSV loading with a configurable column mapping, the
//! cleaning cascade, and the chronological train/validation/test split.

mod clean;
mod load;
mod split;
mod write;

pub use clean::{clean_panel, prepare_panel, CleanLog};
pub use load::{
    load_market_panel, load_quarter_panel, LoadReport, MarketSchema, PanelSchema, RowError,
    SchemaError,
};
pub use split::{chronological_split, SplitDataset, SplitError};
pub use write::{
    write_market_panel_csv, write_quarter_panel_csv, MARKET_PANEL_HEADER, QUARTER_PANEL_HEADER,
};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

/// Opaque firm identifier.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FirmId(pub String);

impl std::fmt::Display for FirmId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

impl From<&str> for FirmId {
    fn from(s: &str) -> Self {
        FirmId(s.to_string())
    }
}

/// One firm-quarter accounting observation.
///
/// `fiscal_year`/`fiscal_quarter` are optional on load (raw vendor files can
/// lack them); after [`clean_panel`] they are guaranteed present with
/// quarter in 1..=4 and at most one record per (firm, year, quarter).
#[derive(Clone, Debug, PartialEq)]
pub struct QuarterRecord {
    pub firm_id: FirmId,
    pub fiscal_year: Option<i32>,
    pub fiscal_quarter: Option<u8>,
    /// True for annual-granularity rows, which the cleaning cascade removes.
    pub annual_only: bool,
    pub report_date: NaiveDate,
    /// Diluted earnings per share (already per share).
    pub eps: f64,
    pub total_assets: f64,
    pub book_equity: f64,
    /// Weighted average common shares outstanding.
    pub shares_outstanding: f64,
    /// Total cash dividends (per-share scaling happens in the feature stage).
    pub dividends_total: f64,
    pub accruals_total: f64,
    /// Price at the trading day before `report_date`.
    pub stock_price: f64,
    /// Economic-sector label; missing labels map to "Other".
    pub industry: String,
    pub analyst_q_eps: Option<f64>,
    pub analyst_y_eps: Option<f64>,
}

impl QuarterRecord {
    /// (year, quarter) key; only valid after cleaning.
    pub fn yq(&self) -> Option<(i32, u8)> {
        match (self.fiscal_year, self.fiscal_quarter) {
            (Some(y), Some(q)) => Some((y, q)),
            _ => None,
        }
    }
}

/// One firm-day market observation.
#[derive(Clone, Debug, PartialEq)]
pub struct DailyMarketRecord {
    pub firm_id: FirmId,
    pub date: NaiveDate,
    /// Simple daily return of the stock.
    pub stock_return: f64,
    /// Traded volume divided by shares outstanding.
    pub volume_per_share: f64,
    /// Simple daily return of the market index.
    pub market_return: f64,
    /// Volatility index level.
    pub vol_index_level: f64,
    pub tobins_q: f64,
    /// Daily risk-free rate.
    pub risk_free_rate: f64,
}
