//! Winsorization bounds and studentization moments, fitted on the training
//! partition only and frozen for validation/test so training and inference
//! share identical transforms.

use serde::{Deserialize, Serialize};

use super::{ACC_FEATURE_NAMES, MARKET_FEATURE_NAMES};

pub const FEATURE_STATS_VERSION: u32 = 1;

/// Moments and percentile bounds of one non-binary feature.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FeatureStat {
    pub name: String,
    pub mean: f64,
    /// Population standard deviation (divide by n).
    pub std: f64,
    pub lower: f64,
    pub upper: f64,
    /// A constant feature cannot be studentized; it maps to 0.
    pub degenerate: bool,
}

impl FeatureStat {
    /// Fit on raw values: nearest-rank 1st/99th bounds, then moments of the
    /// clamped values.
    pub fn fit(name: &str, values: &[f64]) -> FeatureStat {
        assert!(values.len() >= 2, "need at least 2 observations for {name}");
        let mut sorted: Vec<f64> = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (lower, upper) = percentile_bounds(&sorted, 0.01);
        let clamped: Vec<f64> = values.iter().map(|&v| v.clamp(lower, upper)).collect();
        let n = clamped.len() as f64;
        let mean = clamped.iter().sum::<f64>() / n;
        let var = clamped.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        // Constant features leave float residue in the variance; anything at
        // rounding scale counts as degenerate.
        let degenerate = std <= 1e-12 * (1.0 + mean.abs());
        FeatureStat { name: name.to_string(), mean, std, lower, upper, degenerate }
    }

    /// Clamp to the winsor bounds, then studentize.
    #[inline]
    pub fn transform(&self, x: f64) -> f64 {
        if self.degenerate {
            return 0.0;
        }
        (x.clamp(self.lower, self.upper) - self.mean) / self.std
    }
}

/// Nearest-rank symmetric tail bounds on a sorted slice: the k-th smallest
/// and k-th largest value with k = ceil(alpha * n).
pub fn percentile_bounds(sorted: &[f64], alpha: f64) -> (f64, f64) {
    let n = sorted.len();
    assert!(n > 0);
    let k = ((alpha * n as f64).ceil() as usize).clamp(1, n);
    (sorted[k - 1], sorted[n - k])
}

/// Mean/std used to standardize the two training targets.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TargetStat {
    pub mean: f64,
    pub std: f64,
}

impl TargetStat {
    pub fn fit(values: &[f64]) -> TargetStat {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        let degenerate = std <= 1e-12 * (1.0 + mean.abs());
        TargetStat { mean, std: if degenerate { 1.0 } else { std } }
    }

    #[inline]
    pub fn standardize(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    #[inline]
    pub fn destandardize(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// The full transform state shared by training and inference.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FeatureStats {
    pub format_version: u32,
    /// Partition the stats were fitted on, e.g. "train".
    pub fitted_on: String,
    pub acc: Vec<FeatureStat>,
    pub market: Vec<FeatureStat>,
    pub target_q: TargetStat,
    pub target_y: TargetStat,
}

impl FeatureStats {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }

    pub fn from_json(text: &str) -> Result<FeatureStats, serde_json::Error> {
        let stats: FeatureStats = serde_json::from_str(text)?;
        Ok(stats)
    }

    pub fn feature_names_match(&self) -> bool {
        self.acc.len() == ACC_FEATURE_NAMES.len()
            && self.market.len() == MARKET_FEATURE_NAMES.len()
            && self.acc.iter().zip(ACC_FEATURE_NAMES).all(|(s, n)| s.name == n)
            && self.market.iter().zip(MARKET_FEATURE_NAMES).all(|(s, n)| s.name == n)
    }
}
