//! CSV writers emitting the same schema the loaders consume. Floats use the
//! shortest round-trip representation, so write → load is lossless and
//! byte-deterministic.

use super::{DailyMarketRecord, QuarterRecord};

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fmt_opt_int<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Industry labels are free text; quote when they contain separators.
fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub const QUARTER_PANEL_HEADER: &str = "firm_id,fiscal_year,fiscal_quarter,period_type,report_date,eps,total_assets,book_equity,shares_outstanding,dividends_total,accruals_total,stock_price,industry,analyst_q_eps,analyst_y_eps";

pub fn write_quarter_panel_csv(records: &[QuarterRecord]) -> String {
    let mut out = String::from(QUARTER_PANEL_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            csv_field(&r.firm_id.0),
            fmt_opt_int(r.fiscal_year),
            fmt_opt_int(r.fiscal_quarter),
            if r.annual_only { "A" } else { "Q" },
            r.report_date.format("%Y-%m-%d"),
            r.eps,
            r.total_assets,
            r.book_equity,
            r.shares_outstanding,
            r.dividends_total,
            r.accruals_total,
            r.stock_price,
            csv_field(&r.industry),
            fmt_opt(r.analyst_q_eps),
            fmt_opt(r.analyst_y_eps),
        ));
    }
    out
}

pub const MARKET_PANEL_HEADER: &str =
    "firm_id,date,stock_return,volume_per_share,market_return,vol_index_level,tobins_q,risk_free_rate";

pub fn write_market_panel_csv(records: &[DailyMarketRecord]) -> String {
    let mut out = String::from(MARKET_PANEL_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            csv_field(&r.firm_id.0),
            r.date.format("%Y-%m-%d"),
            r.stock_return,
            r.volume_per_share,
            r.market_return,
            r.vol_index_level,
            r.tobins_q,
            r.risk_free_rate,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::{load_market_panel, load_quarter_panel, MarketSchema, PanelSchema};
    use super::*;
    use crate::synth::{generate_panel, SynthConfig};
    use std::io::Write;

    #[test]
    fn synth_panel_roundtrips_through_loader() {
        let panel = generate_panel(&SynthConfig {
            n_firms: 6,
            quarters_per_firm: 8,
            ..SynthConfig::default()
        });

        let csv = write_quarter_panel_csv(&panel.quarters);
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(csv.as_bytes()).unwrap();
        let (loaded, report) =
            load_quarter_panel(f.path(), &PanelSchema::default()).unwrap();
        assert!(report.row_errors.is_empty());
        assert_eq!(loaded, panel.quarters);

        let mcsv = write_market_panel_csv(&panel.market);
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(mcsv.as_bytes()).unwrap();
        let (mloaded, mreport) = load_market_panel(f.path(), &MarketSchema::default()).unwrap();
        assert!(mreport.row_errors.is_empty());
        assert_eq!(mloaded, panel.market);
    }

    #[test]
    fn writer_is_deterministic() {
        let config = SynthConfig { n_firms: 3, quarters_per_firm: 8, ..SynthConfig::default() };
        let a = write_quarter_panel_csv(&generate_panel(&config).quarters);
        let b = write_quarter_panel_csv(&generate_panel(&config).quarters);
        assert_eq!(a, b);
    }

    #[test]
    fn quoted_industry_roundtrips() {
        let mut r = crate::panel::tests_support::record_with_dates("f", 2020, 1, "2020-05-01");
        r.industry = "Food, Beverage & Tobacco".to_string();
        let csv = write_quarter_panel_csv(&[r.clone()]);
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(csv.as_bytes()).unwrap();
        let (loaded, _) = load_quarter_panel(f.path(), &PanelSchema::default()).unwrap();
        assert_eq!(loaded[0].industry, r.industry);
    }
}
