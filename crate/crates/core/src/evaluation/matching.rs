//! Matched-firm comparison: each covered announcement is paired with the
//! nearest uncovered announcement from the same industry whose standardized
//! (total assets, Tobin's q) coordinates lie within a distance limit.

use std::collections::BTreeMap;

use thiserror::Error;

use super::metrics::mapd;
use super::rank_tests::wilcoxon_signed_rank;
use super::{ForecastRow, Frequency, ModelTag};

#[derive(Debug, Error, PartialEq)]
pub enum MatchError {
    #[error("one of the match sides is empty")]
    EmptySide,
    #[error("no pairs within the distance limit")]
    NoPairs,
}

#[derive(Clone, Debug)]
pub struct MatchedPair {
    pub covered_idx: usize,
    pub uncovered_idx: usize,
    pub distance: f64,
    pub industry: String,
}

#[derive(Clone, Debug)]
pub struct MatchCell {
    pub industry: String,
    pub n: usize,
    pub mapd_covered_pct: f64,
    pub mapd_uncovered_pct: f64,
    pub wilcoxon_p: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct MatchReport {
    pub pairs: Vec<MatchedPair>,
    pub per_industry: Vec<MatchCell>,
    pub total: MatchCell,
}

fn standardizer(values: &[f64]) -> impl Fn(f64) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = if var.sqrt() > 0.0 { var.sqrt() } else { 1.0 };
    move |x: f64| (x - mean) / std
}

/// Match covered rows to their nearest uncovered candidate. Standardization
/// statistics come from the union of both sides; candidates must share the
/// industry and lie strictly within `limit`; covered rows with no candidate
/// are dropped. Metric columns use `model`'s predictions at `freq`.
pub fn match_similar_firms(
    covered: &[ForecastRow],
    uncovered: &[ForecastRow],
    limit: f64,
    model: ModelTag,
    freq: Frequency,
) -> Result<MatchReport, MatchError> {
    if covered.is_empty() || uncovered.is_empty() {
        return Err(MatchError::EmptySide);
    }
    let assets: Vec<f64> = covered
        .iter()
        .chain(uncovered)
        .map(|r| r.total_assets)
        .collect();
    let qs: Vec<f64> = covered.iter().chain(uncovered).map(|r| r.tobins_q).collect();
    let std_assets = standardizer(&assets);
    let std_q = standardizer(&qs);

    let coord = |r: &ForecastRow| (std_assets(r.total_assets), std_q(r.tobins_q));
    let uncovered_coords: Vec<(f64, f64)> = uncovered.iter().map(coord).collect();

    let mut pairs = Vec::new();
    for (ci, c) in covered.iter().enumerate() {
        let (cx, cy) = coord(c);
        let mut best: Option<(usize, f64)> = None;
        for (ui, u) in uncovered.iter().enumerate() {
            if u.industry != c.industry {
                continue;
            }
            let (ux, uy) = uncovered_coords[ui];
            let dist = ((cx - ux).powi(2) + (cy - uy).powi(2)).sqrt();
            if dist < limit {
                match best {
                    Some((_, bd)) if bd <= dist => {}
                    _ => best = Some((ui, dist)),
                }
            }
        }
        if let Some((ui, dist)) = best {
            pairs.push(MatchedPair {
                covered_idx: ci,
                uncovered_idx: ui,
                distance: dist,
                industry: c.industry.clone(),
            });
        }
    }
    if pairs.is_empty() {
        return Err(MatchError::NoPairs);
    }

    let cell = |pairs: &[&MatchedPair], industry: &str| -> MatchCell {
        let mut cov_err = Vec::new();
        let mut unc_err = Vec::new();
        for p in pairs {
            if let (Some(c), Some(u)) = (
                covered[p.covered_idx].error(model, freq),
                uncovered[p.uncovered_idx].error(model, freq),
            ) {
                cov_err.push(c.abs());
                unc_err.push(u.abs());
            }
        }
        let wilcoxon_p = wilcoxon_signed_rank(&cov_err, &unc_err).ok().map(|r| r.p_value);
        MatchCell {
            industry: industry.to_string(),
            n: cov_err.len(),
            mapd_covered_pct: mapd(&cov_err).map(|v| 100.0 * v).unwrap_or(f64::NAN),
            mapd_uncovered_pct: mapd(&unc_err).map(|v| 100.0 * v).unwrap_or(f64::NAN),
            wilcoxon_p,
        }
    };

    let mut by_industry: BTreeMap<&str, Vec<&MatchedPair>> = BTreeMap::new();
    for p in &pairs {
        by_industry.entry(p.industry.as_str()).or_default().push(p);
    }
    let per_industry: Vec<MatchCell> =
        by_industry.iter().map(|(ind, ps)| cell(ps, ind)).collect();
    let all: Vec<&MatchedPair> = pairs.iter().collect();
    let total = cell(&all, "total");

    Ok(MatchReport { pairs, per_industry, total })
}
