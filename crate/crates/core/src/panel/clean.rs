//! The cleaning cascade. Steps run in a fixed order and each logs how many
//! records it removed, mirroring the usual data-preparation audit table.
//!
//! [`clean_panel`] applies the idempotent quality steps and is safe to rerun
//! on its own output. [`prepare_panel`] additionally removes each firm's
//! first observation (which has no predecessors to learn from); that step
//! inherently shrinks a panel every time, so it belongs to one-shot raw
//! ingest only.

use std::collections::HashMap;

use super::{FirmId, QuarterRecord};

/// Per-step removal counts, in application order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CleanLog {
    pub input_count: usize,
    pub output_count: usize,
    pub steps: Vec<(String, usize)>,
}

impl CleanLog {
    pub fn removed_total(&self) -> usize {
        self.steps.iter().map(|(_, n)| n).sum()
    }

    /// Aligned text rendering in the audit-table layout.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<40} {:>12} {:>12}\n",
            "Preparation Step", "Num. Obs.", "Removed"
        ));
        out.push_str(&format!("{:<40} {:>12} {:>12}\n", "Raw panel", self.input_count, ""));
        let mut remaining = self.input_count;
        for (name, removed) in &self.steps {
            remaining -= removed;
            out.push_str(&format!(
                "{:<40} {:>12} {:>12}\n",
                name,
                remaining,
                format_args!("-{removed}")
            ));
        }
        out
    }

    /// CSV rendering: step,remaining,removed.
    pub fn render_csv(&self) -> String {
        let mut out = String::from("step,remaining,removed\n");
        out.push_str(&format!("Raw panel,{},0\n", self.input_count));
        let mut remaining = self.input_count;
        for (name, removed) in &self.steps {
            remaining -= removed;
            out.push_str(&format!("{name},{remaining},{removed}\n"));
        }
        out
    }
}

fn finite(x: f64) -> bool {
    x.is_finite()
}

struct Cascade {
    records: Vec<QuarterRecord>,
    steps: Vec<(String, usize)>,
}

impl Cascade {
    fn filter(&mut self, name: &str, keep: impl Fn(&QuarterRecord) -> bool) {
        let before = self.records.len();
        self.records.retain(|r| keep(r));
        self.steps.push((name.to_string(), before - self.records.len()));
    }

    /// Keep the earliest report date per (firm, year, quarter); the earliest
    /// filing is the information event.
    fn dedup(&mut self) {
        let before = self.records.len();
        let mut best: HashMap<(FirmId, i32, u8), QuarterRecord> = HashMap::new();
        for r in self.records.drain(..) {
            let (y, q) = r.yq().expect("year/quarter present after the missing-field step");
            let key = (r.firm_id.clone(), y, q);
            match best.get(&key) {
                Some(existing) if existing.report_date <= r.report_date => {}
                _ => {
                    best.insert(key, r);
                }
            }
        }
        self.records = best.into_values().collect();
        sort_panel(&mut self.records);
        self.steps.push(("Remove Duplicate Quarters".to_string(), before - self.records.len()));
    }

    fn require_multiple_obs(&mut self) {
        let before = self.records.len();
        let mut counts: HashMap<&FirmId, usize> = HashMap::new();
        for r in &self.records {
            *counts.entry(&r.firm_id).or_default() += 1;
        }
        let singles: std::collections::HashSet<FirmId> = counts
            .into_iter()
            .filter(|(_, n)| *n <= 1)
            .map(|(f, _)| f.clone())
            .collect();
        self.records.retain(|r| !singles.contains(&r.firm_id));
        self.steps.push(("Require >1 Obs. Per Company".to_string(), before - self.records.len()));
    }

    fn remove_first_obs(&mut self) {
        let before = self.records.len();
        let mut first: HashMap<FirmId, (chrono::NaiveDate, i32, u8)> = HashMap::new();
        for r in &self.records {
            let (y, q) = r.yq().unwrap();
            let key = (r.report_date, y, q);
            first
                .entry(r.firm_id.clone())
                .and_modify(|cur| {
                    if key < *cur {
                        *cur = key;
                    }
                })
                .or_insert(key);
        }
        self.records.retain(|r| {
            let (y, q) = r.yq().unwrap();
            first[&r.firm_id] != (r.report_date, y, q)
        });
        self.steps.push(("Remove Company First Obs.".to_string(), before - self.records.len()));
    }

    fn remove_non_finite(&mut self) {
        self.filter("Remove NaN Or Inf. Obs.", |r| {
            finite(r.eps)
                && finite(r.total_assets)
                && finite(r.book_equity)
                && finite(r.shares_outstanding)
                && finite(r.dividends_total)
                && finite(r.accruals_total)
                && finite(r.stock_price)
        });
    }

    fn run(records: Vec<QuarterRecord>, include_first_obs: bool) -> (Vec<QuarterRecord>, CleanLog) {
        let input_count = records.len();
        let mut c = Cascade { records, steps: Vec::new() };
        c.filter("Missing Year Or Quarter", |r| r.yq().is_some());
        c.filter("Missing Total Assets Or Shares", |r| {
            finite(r.total_assets) && finite(r.shares_outstanding) && r.shares_outstanding > 0.0
        });
        c.filter("Missing EPS Or BVE", |r| finite(r.eps) && finite(r.book_equity));
        c.filter("Remove Yearly Data", |r| !r.annual_only);
        c.dedup();
        c.require_multiple_obs();
        if include_first_obs {
            c.remove_first_obs();
        }
        c.remove_non_finite();
        sort_panel(&mut c.records);
        let log = CleanLog { input_count, output_count: c.records.len(), steps: c.steps };
        (c.records, log)
    }
}

/// Idempotent quality cascade: missing-field, annual-row, duplicate,
/// single-observation-firm and non-finite removal. Rerunning it on its own
/// output removes nothing.
pub fn clean_panel(records: Vec<QuarterRecord>) -> (Vec<QuarterRecord>, CleanLog) {
    Cascade::run(records, false)
}

/// Full raw-ingest cascade: [`clean_panel`]'s steps plus the removal of each
/// firm's first observation. Run once per raw panel; rerunning would strip
/// another observation per firm.
pub fn prepare_panel(records: Vec<QuarterRecord>) -> (Vec<QuarterRecord>, CleanLog) {
    Cascade::run(records, true)
}

/// Deterministic panel order: firm, then report date, then (year, quarter).
pub(crate) fn sort_panel(records: &mut [QuarterRecord]) {
    records.sort_by(|a, b| {
        (&a.firm_id, a.report_date, a.fiscal_year, a.fiscal_quarter)
            .cmp(&(&b.firm_id, b.report_date, b.fiscal_year, b.fiscal_quarter))
    });
}
