//! Report rendering: machine-readable CSV (one row per slice × model) and
//! aligned text tables.

use super::metrics::{EvalReport, MetricKind};
use super::sign::SignReport;
use super::ModelTag;

fn fmt_pct(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.4}")
    }
}

fn test_columns(report: &EvalReport, kind: MetricKind) -> (String, String, String) {
    match report.tests.iter().find(|t| t.metric == kind) {
        Some(t) => (t.name.clone(), format!("{:.6}", t.statistic), format!("{:.6}", t.p_value)),
        None => (String::new(), String::new(), String::new()),
    }
}

/// One CSV row per report: slice, model, n, MAPD %, MPD % plus any attached
/// MAPD/MPD significance tests.
pub fn reports_to_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from(
        "slice,model,n,mapd_pct,mpd_pct,mapd_test,mapd_statistic,mapd_p,mpd_test,mpd_statistic,mpd_p\n",
    );
    for r in reports {
        let (mt, ms, mp) = test_columns(r, MetricKind::Mapd);
        let (bt, bs, bp) = test_columns(r, MetricKind::Mpd);
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.slice,
            r.model,
            r.n,
            fmt_pct(r.mapd_pct),
            fmt_pct(r.mpd_pct),
            mt,
            ms,
            mp,
            bt,
            bs,
            bp
        ));
    }
    out
}

/// Aligned text table in the layout of the partitioned comparisons.
pub fn reports_to_text(title: &str, reports: &[EvalReport]) -> String {
    let mut out = format!("{title}\n");
    out.push_str(&format!(
        "{:<24} {:<12} {:>8} {:>10} {:>10} {:>12} {:>12}\n",
        "Slice", "Model", "N", "MAPD %", "MPD %", "P(MAPD)", "P(MPD)"
    ));
    for r in reports {
        let p_of = |kind| {
            r.tests
                .iter()
                .find(|t: &&super::metrics::TestResult| t.metric == kind)
                .map(|t| format!("{:.4}", t.p_value))
                .unwrap_or_default()
        };
        out.push_str(&format!(
            "{:<24} {:<12} {:>8} {:>10} {:>10} {:>12} {:>12}\n",
            r.slice,
            r.model,
            r.n,
            fmt_pct(r.mapd_pct),
            fmt_pct(r.mpd_pct),
            p_of(MetricKind::Mapd),
            p_of(MetricKind::Mpd),
        ));
    }
    out
}

pub fn sign_reports_to_csv(reports: &[(ModelTag, SignReport)]) -> String {
    let mut out = String::from(
        "model,n,average_accuracy,macro_precision,macro_recall,macro_f1,macro_f1_harmonic\n",
    );
    for (model, r) in reports {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            model.as_str(),
            r.n,
            r.average_accuracy,
            r.macro_precision,
            r.macro_recall,
            r.macro_f1,
            r.macro_f1_harmonic
        ));
    }
    out
}

pub fn sign_reports_to_text(title: &str, reports: &[(ModelTag, SignReport)]) -> String {
    let mut out = format!("{title}\n");
    out.push_str(&format!(
        "{:<12} {:>8} {:>10} {:>10} {:>10} {:>10}\n",
        "Model", "N", "Accuracy", "Precision", "Recall", "F1"
    ));
    for (model, r) in reports {
        out.push_str(&format!(
            "{:<12} {:>8} {:>9.2}% {:>9.2}% {:>9.2}% {:>9.2}%\n",
            model.as_str(),
            r.n,
            100.0 * r.average_accuracy,
            100.0 * r.macro_precision,
            100.0 * r.macro_recall,
            100.0 * r.macro_f1
        ));
    }
    out
}
