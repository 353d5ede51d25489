//! CSV loading for the quarterly panel and the daily market panel.
//!
//! Column names are remappable through a schema so user-supplied exports can
//! be consumed without rewriting headers. Malformed rows are collected into
//! a [`LoadReport`] instead of being dropped silently.

use std::collections::HashMap;
use std::path::Path;

use chrono::NaiveDate;
use thiserror::Error;

use super::{DailyMarketRecord, FirmId, QuarterRecord};

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("cannot open {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("missing mandatory column {column:?} in {path}")]
    MissingColumn { column: String, path: String },
}

/// One rejected row: line number (1-based, header is line 1) plus the fields
/// that failed to parse.
#[derive(Clone, Debug)]
pub struct RowError {
    pub line: u64,
    pub fields: Vec<String>,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct LoadReport {
    pub rows_seen: usize,
    pub rows_loaded: usize,
    pub row_errors: Vec<RowError>,
}

/// Column mapping for the quarterly panel CSV. Values are header names.
#[derive(Clone, Debug)]
pub struct PanelSchema {
    pub firm_id: String,
    pub fiscal_year: String,
    pub fiscal_quarter: String,
    pub period_type: Option<String>,
    pub report_date: String,
    pub eps: String,
    pub total_assets: String,
    pub book_equity: String,
    pub shares_outstanding: String,
    pub dividends_total: String,
    pub accruals_total: String,
    pub stock_price: String,
    pub industry: String,
    pub analyst_q_eps: Option<String>,
    pub analyst_y_eps: Option<String>,
}

impl Default for PanelSchema {
    fn default() -> Self {
        PanelSchema {
            firm_id: "firm_id".into(),
            fiscal_year: "fiscal_year".into(),
            fiscal_quarter: "fiscal_quarter".into(),
            period_type: Some("period_type".into()),
            report_date: "report_date".into(),
            eps: "eps".into(),
            total_assets: "total_assets".into(),
            book_equity: "book_equity".into(),
            shares_outstanding: "shares_outstanding".into(),
            dividends_total: "dividends_total".into(),
            accruals_total: "accruals_total".into(),
            stock_price: "stock_price".into(),
            industry: "industry".into(),
            analyst_q_eps: Some("analyst_q_eps".into()),
            analyst_y_eps: Some("analyst_y_eps".into()),
        }
    }
}

impl PanelSchema {
    /// Apply `key = column` overrides, e.g. from a config file.
    pub fn with_overrides(mut self, overrides: &HashMap<String, String>) -> Self {
        for (key, col) in overrides {
            let col = col.clone();
            match key.as_str() {
                "firm_id" => self.firm_id = col,
                "fiscal_year" => self.fiscal_year = col,
                "fiscal_quarter" => self.fiscal_quarter = col,
                "period_type" => self.period_type = Some(col),
                "report_date" => self.report_date = col,
                "eps" => self.eps = col,
                "total_assets" => self.total_assets = col,
                "book_equity" => self.book_equity = col,
                "shares_outstanding" => self.shares_outstanding = col,
                "dividends_total" => self.dividends_total = col,
                "accruals_total" => self.accruals_total = col,
                "stock_price" => self.stock_price = col,
                "industry" => self.industry = col,
                "analyst_q_eps" => self.analyst_q_eps = Some(col),
                "analyst_y_eps" => self.analyst_y_eps = Some(col),
                _ => {}
            }
        }
        self
    }
}

/// Column mapping for the daily market CSV.
#[derive(Clone, Debug)]
pub struct MarketSchema {
    pub firm_id: String,
    pub date: String,
    pub stock_return: String,
    pub volume_per_share: String,
    pub market_return: String,
    pub vol_index_level: String,
    pub tobins_q: String,
    pub risk_free_rate: String,
}

impl Default for MarketSchema {
    fn default() -> Self {
        MarketSchema {
            firm_id: "firm_id".into(),
            date: "date".into(),
            stock_return: "stock_return".into(),
            volume_per_share: "volume_per_share".into(),
            market_return: "market_return".into(),
            vol_index_level: "vol_index_level".into(),
            tobins_q: "tobins_q".into(),
            risk_free_rate: "risk_free_rate".into(),
        }
    }
}

struct HeaderIndex {
    by_name: HashMap<String, usize>,
    path: String,
}

impl HeaderIndex {
    fn new(headers: &csv::StringRecord, path: &str) -> Self {
        let by_name = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_string(), i))
            .collect();
        HeaderIndex { by_name, path: path.to_string() }
    }

    fn require(&self, column: &str) -> Result<usize, SchemaError> {
        self.by_name.get(column).copied().ok_or_else(|| SchemaError::MissingColumn {
            column: column.to_string(),
            path: self.path.clone(),
        })
    }

    fn optional(&self, column: &Option<String>) -> Option<usize> {
        column.as_ref().and_then(|c| self.by_name.get(c).copied())
    }
}

fn field<'a>(rec: &'a csv::StringRecord, idx: usize) -> &'a str {
    rec.get(idx).unwrap_or("").trim()
}

struct RowParser {
    bad_fields: Vec<String>,
}

impl RowParser {
    fn new() -> Self {
        RowParser { bad_fields: Vec::new() }
    }

    /// Mandatory numeric: empty or unparseable text flags the field.
    /// A literal "NaN" parses; missingness of that kind is left to cleaning.
    fn num(&mut self, rec: &csv::StringRecord, idx: usize, name: &str) -> f64 {
        let raw = field(rec, idx);
        match raw.parse::<f64>() {
            Ok(v) => v,
            Err(_) => {
                self.bad_fields.push(name.to_string());
                f64::NAN
            }
        }
    }

    /// Optional numeric: empty means absent, anything else must parse.
    fn opt_num(&mut self, rec: &csv::StringRecord, idx: Option<usize>, name: &str) -> Option<f64> {
        let idx = idx?;
        let raw = field(rec, idx);
        if raw.is_empty() {
            return None;
        }
        match raw.parse::<f64>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.bad_fields.push(name.to_string());
                None
            }
        }
    }

    fn date(&mut self, rec: &csv::StringRecord, idx: usize, name: &str) -> Option<NaiveDate> {
        let raw = field(rec, idx);
        match NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
            Ok(d) => Some(d),
            Err(_) => {
                self.bad_fields.push(name.to_string());
                None
            }
        }
    }
}

/// Parse the quarterly panel. Rows with unparseable mandatory fields are
/// reported in the [`LoadReport`] and excluded from the output.
pub fn load_quarter_panel(
    path: &Path,
    schema: &PanelSchema,
) -> Result<(Vec<QuarterRecord>, LoadReport), SchemaError> {
    let path_str = path.display().to_string();
    let file = std::fs::File::open(path)
        .map_err(|source| SchemaError::Io { path: path_str.clone(), source })?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|source| SchemaError::Csv { path: path_str.clone(), source })?
        .clone();
    let index = HeaderIndex::new(&headers, &path_str);

    let firm_idx = index.require(&schema.firm_id)?;
    let year_idx = index.require(&schema.fiscal_year)?;
    let quarter_idx = index.require(&schema.fiscal_quarter)?;
    let period_idx = index.optional(&schema.period_type);
    let date_idx = index.require(&schema.report_date)?;
    let eps_idx = index.require(&schema.eps)?;
    let assets_idx = index.require(&schema.total_assets)?;
    let bve_idx = index.require(&schema.book_equity)?;
    let shares_idx = index.require(&schema.shares_outstanding)?;
    let div_idx = index.require(&schema.dividends_total)?;
    let acc_idx = index.require(&schema.accruals_total)?;
    let price_idx = index.require(&schema.stock_price)?;
    let industry_idx = index.require(&schema.industry)?;
    let aq_idx = index.optional(&schema.analyst_q_eps);
    let ay_idx = index.optional(&schema.analyst_y_eps);

    let mut records = Vec::new();
    let mut report = LoadReport::default();

    for (row_no, result) in reader.records().enumerate() {
        let line = row_no as u64 + 2; // header is line 1
        report.rows_seen += 1;
        let rec = match result {
            Ok(r) => r,
            Err(e) => {
                report.row_errors.push(RowError {
                    line,
                    fields: vec![],
                    message: e.to_string(),
                });
                continue;
            }
        };
        let mut p = RowParser::new();

        let firm = field(&rec, firm_idx);
        if firm.is_empty() {
            p.bad_fields.push("firm_id".into());
        }
        // Year/quarter may be genuinely absent in vendor data; absence is a
        // cleaning concern, not a parse error. Garbage text still is one.
        let year_raw = field(&rec, year_idx);
        let fiscal_year = if year_raw.is_empty() {
            None
        } else {
            match year_raw.parse::<i32>() {
                Ok(v) => Some(v),
                Err(_) => {
                    p.bad_fields.push("fiscal_year".into());
                    None
                }
            }
        };
        let quarter_raw = field(&rec, quarter_idx);
        let fiscal_quarter = if quarter_raw.is_empty() {
            None
        } else {
            match quarter_raw.parse::<u8>() {
                Ok(v) if (1..=4).contains(&v) => Some(v),
                _ => {
                    p.bad_fields.push("fiscal_quarter".into());
                    None
                }
            }
        };
        let annual_only = period_idx
            .map(|i| field(&rec, i).eq_ignore_ascii_case("A"))
            .unwrap_or(false);

        let report_date = p.date(&rec, date_idx, "report_date");
        let eps = p.num(&rec, eps_idx, "eps");
        let total_assets = p.num(&rec, assets_idx, "total_assets");
        let book_equity = p.num(&rec, bve_idx, "book_equity");
        let shares_outstanding = p.num(&rec, shares_idx, "shares_outstanding");
        let dividends_total = p.num(&rec, div_idx, "dividends_total");
        let accruals_total = p.num(&rec, acc_idx, "accruals_total");
        let stock_price = p.num(&rec, price_idx, "stock_price");
        let industry_raw = field(&rec, industry_idx);
        let industry = if industry_raw.is_empty() { "Other".to_string() } else { industry_raw.to_string() };
        let analyst_q_eps = p.opt_num(&rec, aq_idx, "analyst_q_eps");
        let analyst_y_eps = p.opt_num(&rec, ay_idx, "analyst_y_eps");

        if !p.bad_fields.is_empty() {
            report.row_errors.push(RowError {
                line,
                message: format!("unparseable field(s): {}", p.bad_fields.join(", ")),
                fields: p.bad_fields,
            });
            continue;
        }

        records.push(QuarterRecord {
            firm_id: FirmId(firm.to_string()),
            fiscal_year,
            fiscal_quarter,
            annual_only,
            report_date: report_date.expect("date parse checked above"),
            eps,
            total_assets,
            book_equity,
            shares_outstanding,
            dividends_total,
            accruals_total,
            stock_price,
            industry,
            analyst_q_eps,
            analyst_y_eps,
        });
        report.rows_loaded += 1;
    }

    Ok((records, report))
}

/// Parse the daily market panel. Duplicate (firm, date) rows keep the first
/// occurrence and report the rest.
pub fn load_market_panel(
    path: &Path,
    schema: &MarketSchema,
) -> Result<(Vec<DailyMarketRecord>, LoadReport), SchemaError> {
    let path_str = path.display().to_string();
    let file = std::fs::File::open(path)
        .map_err(|source| SchemaError::Io { path: path_str.clone(), source })?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|source| SchemaError::Csv { path: path_str.clone(), source })?
        .clone();
    let index = HeaderIndex::new(&headers, &path_str);

    let firm_idx = index.require(&schema.firm_id)?;
    let date_idx = index.require(&schema.date)?;
    let ret_idx = index.require(&schema.stock_return)?;
    let vol_idx = index.require(&schema.volume_per_share)?;
    let mret_idx = index.require(&schema.market_return)?;
    let vix_idx = index.require(&schema.vol_index_level)?;
    let q_idx = index.require(&schema.tobins_q)?;
    let rf_idx = index.require(&schema.risk_free_rate)?;

    let mut records: Vec<DailyMarketRecord> = Vec::new();
    let mut seen: std::collections::HashSet<(FirmId, NaiveDate)> = std::collections::HashSet::new();
    let mut report = LoadReport::default();

    for (row_no, result) in reader.records().enumerate() {
        let line = row_no as u64 + 2;
        report.rows_seen += 1;
        let rec = match result {
            Ok(r) => r,
            Err(e) => {
                report.row_errors.push(RowError { line, fields: vec![], message: e.to_string() });
                continue;
            }
        };
        let mut p = RowParser::new();
        let firm = field(&rec, firm_idx);
        if firm.is_empty() {
            p.bad_fields.push("firm_id".into());
        }
        let date = p.date(&rec, date_idx, "date");
        let stock_return = p.num(&rec, ret_idx, "stock_return");
        let volume_per_share = p.num(&rec, vol_idx, "volume_per_share");
        let market_return = p.num(&rec, mret_idx, "market_return");
        let vol_index_level = p.num(&rec, vix_idx, "vol_index_level");
        let tobins_q = p.num(&rec, q_idx, "tobins_q");
        let risk_free_rate = p.num(&rec, rf_idx, "risk_free_rate");

        if !p.bad_fields.is_empty() {
            report.row_errors.push(RowError {
                line,
                message: format!("unparseable field(s): {}", p.bad_fields.join(", ")),
                fields: p.bad_fields,
            });
            continue;
        }
        let key = (FirmId(firm.to_string()), date.expect("checked"));
        if !seen.insert(key.clone()) {
            report.row_errors.push(RowError {
                line,
                fields: vec!["date".into()],
                message: format!("duplicate (firm, date) row for {} {}", key.0, key.1),
            });
            continue;
        }
        records.push(DailyMarketRecord {
            firm_id: key.0,
            date: key.1,
            stock_return,
            volume_per_share,
            market_return,
            vol_index_level,
            tobins_q,
            risk_free_rate,
        });
        report.rows_loaded += 1;
    }

    records.sort_by(|a, b| (&a.firm_id, a.date).cmp(&(&b.firm_id, b.date)));
    Ok((records, report))
}
