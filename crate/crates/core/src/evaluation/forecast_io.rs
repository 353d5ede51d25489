//! Forecast-set CSV: one row per announcement with the actuals, metadata and
//! every model's predictions. Written by `predict`, consumed by `evaluate`
//! and `erc`.

use std::path::Path;

use chrono::NaiveDate;
use thiserror::Error;

use super::ForecastRow;
use crate::panel::FirmId;

pub const FORECAST_CSV_HEADER: &str = "firm_id,report_date,fiscal_year,fiscal_quarter,industry,total_assets,stock_price,tobins_q,covered,actual_q_eps,actual_y_eps,prev_q_eps,prev_y_eps,rnn_q,rnn_y,analyst_q,analyst_y,regression_q,regression_y,random_walk_q,random_walk_y";

#[derive(Debug, Error)]
pub enum ForecastIoError {
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
    #[error("{path}: expected forecast header, found {found:?}")]
    BadHeader { path: String, found: String },
    #[error("{path} line {line}: {message}")]
    BadRow { path: String, line: u64, message: String },
}

fn opt_str(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_forecast_csv(rows: &[ForecastRow]) -> String {
    let mut out = String::from(FORECAST_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            field(&r.firm_id.0),
            r.report_date.map(|d| d.format("%Y-%m-%d").to_string()).unwrap_or_default(),
            r.fiscal_year,
            r.fiscal_quarter,
            field(&r.industry),
            r.total_assets,
            r.stock_price,
            r.tobins_q,
            if r.covered { 1 } else { 0 },
            r.actual_q,
            r.actual_y,
            opt_str(r.prev_q_eps),
            opt_str(r.prev_y_eps),
            opt_str(r.rnn_q),
            opt_str(r.rnn_y),
            opt_str(r.analyst_q),
            opt_str(r.analyst_y),
            opt_str(r.regression_q),
            opt_str(r.regression_y),
            opt_str(r.random_walk_q),
            opt_str(r.random_walk_y),
        ));
    }
    out
}

pub fn read_forecast_csv(path: &Path) -> Result<Vec<ForecastRow>, ForecastIoError> {
    let path_str = path.display().to_string();
    let file = std::fs::File::open(path)
        .map_err(|source| ForecastIoError::Io { path: path_str.clone(), source })?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader
        .headers()
        .map_err(|source| ForecastIoError::Csv { path: path_str.clone(), source })?;
    let expected: Vec<&str> = FORECAST_CSV_HEADER.split(',').collect();
    let found: Vec<&str> = headers.iter().collect();
    if found != expected {
        return Err(ForecastIoError::BadHeader {
            path: path_str,
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut rows = Vec::new();
    for (i, result) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let rec = result.map_err(|source| ForecastIoError::Csv { path: path_str.clone(), source })?;
        let get = |j: usize| rec.get(j).unwrap_or("").trim();
        let bad = |message: String| ForecastIoError::BadRow {
            path: path_str.clone(),
            line,
            message,
        };
        let num = |j: usize, name: &str| -> Result<f64, ForecastIoError> {
            get(j).parse::<f64>().map_err(|_| bad(format!("unparseable {name}")))
        };
        let opt_num = |j: usize, name: &str| -> Result<Option<f64>, ForecastIoError> {
            let raw = get(j);
            if raw.is_empty() {
                Ok(None)
            } else {
                raw.parse::<f64>().map(Some).map_err(|_| bad(format!("unparseable {name}")))
            }
        };
        let report_date = {
            let raw = get(1);
            if raw.is_empty() {
                None
            } else {
                Some(
                    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
                        .map_err(|_| bad("unparseable report_date".into()))?,
                )
            }
        };
        rows.push(ForecastRow {
            firm_id: FirmId(get(0).to_string()),
            report_date,
            fiscal_year: get(2).parse().map_err(|_| bad("unparseable fiscal_year".into()))?,
            fiscal_quarter: get(3).parse().map_err(|_| bad("unparseable fiscal_quarter".into()))?,
            industry: get(4).to_string(),
            total_assets: num(5, "total_assets")?,
            stock_price: num(6, "stock_price")?,
            tobins_q: num(7, "tobins_q")?,
            covered: get(8) == "1",
            actual_q: num(9, "actual_q_eps")?,
            actual_y: num(10, "actual_y_eps")?,
            prev_q_eps: opt_num(11, "prev_q_eps")?,
            prev_y_eps: opt_num(12, "prev_y_eps")?,
            rnn_q: opt_num(13, "rnn_q")?,
            rnn_y: opt_num(14, "rnn_y")?,
            analyst_q: opt_num(15, "analyst_q")?,
            analyst_y: opt_num(16, "analyst_y")?,
            regression_q: opt_num(17, "regression_q")?,
            regression_y: opt_num(18, "regression_y")?,
            random_walk_q: opt_num(19, "random_walk_q")?,
            random_walk_y: opt_num(20, "random_walk_y")?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::super::tests_support::forecast_row;
    use super::*;
    use std::io::Write;

    #[test]
    fn roundtrip_preserves_rows() {
        let mut rows = vec![
            forecast_row("a", 2020, 1, 0.5123456789, 2.0),
            forecast_row("b", 2021, 4, -0.25, -1.0),
        ];
        rows[1].analyst_q = None;
        rows[1].analyst_y = None;
        rows[1].covered = false;
        rows[1].report_date = None;

        let csv = write_forecast_csv(&rows);
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(csv.as_bytes()).unwrap();
        let back = read_forecast_csv(f.path()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].actual_q, rows[0].actual_q);
        assert_eq!(back[1].analyst_q, None);
        assert_eq!(back[1].report_date, None);
        assert!(!back[1].covered);
        assert_eq!(back[0].rnn_y, rows[0].rnn_y);
    }

    #[test]
    fn wrong_header_rejected() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(b"foo,bar\n1,2\n").unwrap();
        match read_forecast_csv(f.path()) {
            Err(ForecastIoError::BadHeader { .. }) => {}
            other => panic!("expected header error, got {other:?}"),
        }
    }
}
