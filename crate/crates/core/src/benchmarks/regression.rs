//! Cross-sectional regression benchmark: OLS per horizon of the cumulative
//! EPS of the quarters still unreported before the next annual result, on
//! the four most recent quarterly EPS and per-share fundamentals.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::linalg::Matrix;
use crate::panel::{FirmId, QuarterRecord};

use super::ols::{ols, OlsError, OlsFit};

pub const RECIPE: &str =
    "cum_future_eps ~ 1 + eps_recent0..3 + bve_ps + accruals_ps + dividend_ps (v1)";

const PREDICTORS: usize = 8;

#[derive(Debug, Error)]
pub enum RegressionBenchError {
    #[error("horizon {horizon}: {rows} rows but {PREDICTORS} predictors required")]
    TooFewRows { horizon: u8, rows: usize },
    #[error("horizon {horizon}: {source}")]
    Fit {
        horizon: u8,
        #[source]
        source: OlsError,
    },
}

/// One OLS fit per horizon h ∈ 1..=4 (the number of unreported quarters
/// until the next annual result).
#[derive(Debug)]
pub struct RegressionBenchmark {
    pub fits: BTreeMap<u8, OlsFit>,
    pub recipe: String,
}

impl RegressionBenchmark {
    /// JSON document with the recipe id and per-horizon coefficients.
    pub fn to_json(&self) -> String {
        let fits: serde_json::Map<String, serde_json::Value> = self
            .fits
            .iter()
            .map(|(h, fit)| (h.to_string(), serde_json::to_value(fit).expect("fit serialize")))
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({
            "format_version": 1,
            "recipe": self.recipe,
            "fits": fits,
        }))
        .expect("benchmark serialize")
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RegressionPrediction {
    pub q_eps: Option<f64>,
    pub y_eps: Option<f64>,
}

/// Everything known about a firm just before an announcement: the reported
/// quarters of the target fiscal year, the four most recent reported EPS
/// values (newest first) and the newest record's per-share fundamentals.
#[derive(Clone, Debug)]
pub struct AnnouncementState {
    pub known_current_year: Vec<f64>,
    pub recent_eps: [f64; 4],
    pub bve_ps: f64,
    pub accruals_ps: f64,
    pub dividend_ps: f64,
}

fn prev_yq(year: i32, quarter: u8) -> (i32, u8) {
    if quarter == 1 {
        (year - 1, 4)
    } else {
        (year, quarter - 1)
    }
}

fn per_share(r: &QuarterRecord) -> Option<(f64, f64, f64)> {
    if r.shares_outstanding > 0.0 {
        Some((
            r.book_equity / r.shares_outstanding,
            r.accruals_total / r.shares_outstanding,
            r.dividends_total / r.shares_outstanding,
        ))
    } else {
        None
    }
}

/// EPS and per-share fundamentals keyed by (firm, year, quarter); shared by
/// the fitter and the per-announcement prediction path.
pub struct PanelIndex {
    eps: HashMap<(FirmId, i32, u8), f64>,
    fundamentals: HashMap<(FirmId, i32, u8), (f64, f64, f64)>,
}

impl PanelIndex {
    pub fn new(panel: &[QuarterRecord]) -> PanelIndex {
        let mut eps = HashMap::new();
        let mut fundamentals = HashMap::new();
        for r in panel {
            if let Some((y, q)) = r.yq() {
                eps.insert((r.firm_id.clone(), y, q), r.eps);
                if let Some(f) = per_share(r) {
                    fundamentals.insert((r.firm_id.clone(), y, q), f);
                }
            }
        }
        PanelIndex { eps, fundamentals }
    }

    pub fn eps(&self, firm: &FirmId, y: i32, q: u8) -> Option<f64> {
        self.eps.get(&(firm.clone(), y, q)).copied()
    }

    /// Annual EPS of a fiscal year when all four quarters exist.
    pub fn annual_eps(&self, firm: &FirmId, y: i32) -> Option<f64> {
        let mut sum = 0.0;
        for q in 1..=4u8 {
            sum += self.eps(firm, y, q)?;
        }
        Some(sum)
    }

    /// Four most recent EPS values ending at (y, q), newest first.
    fn recent_eps(&self, firm: &FirmId, y: i32, q: u8) -> Option<[f64; 4]> {
        let mut out = [0.0; 4];
        let (mut cy, mut cq) = (y, q);
        for slot in out.iter_mut() {
            *slot = self.eps(firm, cy, cq)?;
            (cy, cq) = prev_yq(cy, cq);
        }
        Some(out)
    }
}

/// Cumulative EPS of the h quarters following the anchor (y, q) up to the
/// next annual result. Anchored at q4, the target is the whole next year.
fn cumulative_target(index: &PanelIndex, firm: &FirmId, y: i32, q: u8) -> Option<(u8, f64)> {
    let (h, quarters): (u8, Vec<(i32, u8)>) = if q == 4 {
        (4, (1..=4).map(|j| (y + 1, j)).collect())
    } else {
        (4 - q, (q + 1..=4).map(|j| (y, j)).collect())
    };
    let mut sum = 0.0;
    for (ty, tq) in quarters {
        sum += index.eps(firm, ty, tq)?;
    }
    Some((h, sum))
}

/// Fit the per-horizon regressions on a training panel. Rows need the four
/// trailing EPS values and a complete cumulative target; incomplete fiscal
/// sequences are skipped.
pub fn fit_regression_benchmark(
    train: &[QuarterRecord],
) -> Result<RegressionBenchmark, RegressionBenchError> {
    let index = PanelIndex::new(train);
    let mut rows: BTreeMap<u8, (Vec<Vec<f64>>, Vec<f64>)> = BTreeMap::new();

    for r in train {
        let Some((y, q)) = r.yq() else { continue };
        let Some(recent) = index.recent_eps(&r.firm_id, y, q) else { continue };
        let Some((h, target)) = cumulative_target(&index, &r.firm_id, y, q) else { continue };
        let Some((bve_ps, accruals_ps, dividend_ps)) = per_share(r) else { continue };
        let row = vec![
            1.0, recent[0], recent[1], recent[2], recent[3], bve_ps, accruals_ps, dividend_ps,
        ];
        let entry = rows.entry(h).or_default();
        entry.0.push(row);
        entry.1.push(target);
    }

    let mut fits = BTreeMap::new();
    for (h, (x_rows, y)) in rows {
        if x_rows.len() < PREDICTORS {
            return Err(RegressionBenchError::TooFewRows { horizon: h, rows: x_rows.len() });
        }
        let x = Matrix::from_rows(&x_rows);
        let fit = ols(&x, &y).map_err(|source| RegressionBenchError::Fit { horizon: h, source })?;
        fits.insert(h, fit);
    }
    for h in 1..=4u8 {
        if !fits.contains_key(&h) {
            return Err(RegressionBenchError::TooFewRows { horizon: h, rows: 0 });
        }
    }
    Ok(RegressionBenchmark { fits, recipe: RECIPE.to_string() })
}

impl AnnouncementState {
    /// Assemble the state for the announcement (target_year, target_quarter).
    /// Requires the reported quarters of the target year to be contiguous
    /// from Q1 and four trailing EPS values.
    pub fn from_index(
        index: &PanelIndex,
        firm: &FirmId,
        target_year: i32,
        target_quarter: u8,
    ) -> Option<AnnouncementState> {
        let mut known = Vec::new();
        for j in 1..target_quarter {
            known.push(index.eps(firm, target_year, j)?);
        }
        let (ay, aq) = prev_yq(target_year, target_quarter);
        let recent = index.recent_eps(firm, ay, aq)?;
        let (bve_ps, accruals_ps, dividend_ps) =
            *index.fundamentals.get(&(firm.clone(), ay, aq))?;
        Some(AnnouncementState {
            known_current_year: known,
            recent_eps: recent,
            bve_ps,
            accruals_ps,
            dividend_ps,
        })
    }

    pub fn from_panel(
        panel: &[QuarterRecord],
        firm: &FirmId,
        target_year: i32,
        target_quarter: u8,
    ) -> Option<AnnouncementState> {
        Self::from_index(&PanelIndex::new(panel), firm, target_year, target_quarter)
    }
}

/// Predict from an announcement state: annual = Σ known + predicted
/// cumulative remainder; quarterly = remainder / h. With all four quarters
/// known the annual is their sum and there is no quarterly prediction.
pub fn regression_predict(
    model: &RegressionBenchmark,
    state: &AnnouncementState,
) -> RegressionPrediction {
    let known: f64 = state.known_current_year.iter().sum();
    let h = 4usize.saturating_sub(state.known_current_year.len()) as u8;
    if h == 0 {
        return RegressionPrediction { q_eps: None, y_eps: Some(known) };
    }
    let Some(fit) = model.fits.get(&h) else {
        return RegressionPrediction::default();
    };
    let x = [
        1.0,
        state.recent_eps[0],
        state.recent_eps[1],
        state.recent_eps[2],
        state.recent_eps[3],
        state.bve_ps,
        state.accruals_ps,
        state.dividend_ps,
    ];
    let cumulative = fit.predict_row(&x);
    RegressionPrediction {
        q_eps: Some(cumulative / h as f64),
        y_eps: Some(known + cumulative),
    }
}
