//! Ensemble training and prediction: several members with identical setup
//! but different initial weights; the served prediction is their mean.

use serde::{Deserialize, Serialize};

use crate::features::{FeatureStats, FeatureWindow};
use crate::forecaster::net::ForecastNet;
use crate::forecaster::train::{train_one, StopReport, TrainConfig, TrainError};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainingManifest {
    pub format_version: u32,
    pub config: TrainConfig,
    pub seeds: Vec<u64>,
    pub reports: Vec<StopReport>,
}

#[derive(Clone, Debug)]
pub struct EnsembleModel {
    pub members: Vec<ForecastNet>,
    pub stats: FeatureStats,
    pub manifest: TrainingManifest,
}

/// Parallelism cap: `QC_THREADS` when set, otherwise the machine's
/// available parallelism.
pub fn thread_cap() -> usize {
    std::env::var("QC_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        })
}

/// Train `config.ensemble_size` members with seeds `seed + 0..n`. Members
/// are independent, so they run in parallel waves; results are ordered by
/// member index and bit-reproducible regardless of scheduling.
pub fn train_ensemble(
    config: &TrainConfig,
    train: &[FeatureWindow],
    validation: &[FeatureWindow],
    stats: &FeatureStats,
) -> Result<EnsembleModel, TrainError> {
    let seeds: Vec<u64> = (0..config.ensemble_size as u64).map(|i| config.seed + i).collect();
    let cap = thread_cap().max(1);

    let mut members: Vec<Option<ForecastNet>> = (0..seeds.len()).map(|_| None).collect();
    let mut reports: Vec<Option<StopReport>> = (0..seeds.len()).map(|_| None).collect();

    for wave in seeds.chunks(cap) {
        let offset = seeds.iter().position(|s| s == &wave[0]).unwrap();
        let results: Vec<Result<(ForecastNet, StopReport), TrainError>> =
            std::thread::scope(|scope| {
                let handles: Vec<_> = wave
                    .iter()
                    .map(|&seed| {
                        scope.spawn(move || train_one(config, train, validation, stats, seed))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("member thread panicked")).collect()
            });
        for (i, result) in results.into_iter().enumerate() {
            let (net, report) = result?;
            members[offset + i] = Some(net);
            reports[offset + i] = Some(report);
        }
    }

    Ok(EnsembleModel {
        members: members.into_iter().map(Option::unwrap).collect(),
        stats: stats.clone(),
        manifest: TrainingManifest {
            format_version: MANIFEST_VERSION,
            config: config.clone(),
            seeds,
            reports: reports.into_iter().map(Option::unwrap).collect(),
        },
    })
}

impl EnsembleModel {
    /// Per-window (quarterly, annual) EPS predictions: the arithmetic mean
    /// of the members' de-standardized outputs, summed in member order.
    pub fn predict(&self, windows: &[FeatureWindow]) -> Vec<(f64, f64)> {
        if windows.is_empty() {
            return Vec::new();
        }
        let n = windows.len();
        let mut sums = vec![(0.0f64, 0.0f64); n];
        let batch = self.manifest.config.batch_size.max(1);
        for member in &self.members {
            let mut row = 0usize;
            for chunk in windows.chunks(batch) {
                let refs: Vec<&FeatureWindow> = chunk.iter().collect();
                let (seq, market) = ForecastNet::batch_inputs(&refs);
                let out = member.forward_infer(&seq, &market);
                for i in 0..chunk.len() {
                    sums[row + i].0 += self.stats.target_q.destandardize(out.at(i, 0));
                    sums[row + i].1 += self.stats.target_y.destandardize(out.at(i, 1));
                }
                row += chunk.len();
            }
        }
        let k = self.members.len() as f64;
        sums.into_iter().map(|(q, y)| (q / k, y / k)).collect()
    }

    /// One member's de-standardized predictions; the ensemble mean is the
    /// member-order average of these.
    pub fn predict_member(&self, member: usize, windows: &[FeatureWindow]) -> Vec<(f64, f64)> {
        let net = &self.members[member];
        let mut out_all = Vec::with_capacity(windows.len());
        let batch = self.manifest.config.batch_size.max(1);
        for chunk in windows.chunks(batch) {
            let refs: Vec<&FeatureWindow> = chunk.iter().collect();
            let (seq, market) = ForecastNet::batch_inputs(&refs);
            let out = net.forward_infer(&seq, &market);
            for i in 0..chunk.len() {
                out_all.push((
                    self.stats.target_q.destandardize(out.at(i, 0)),
                    self.stats.target_y.destandardize(out.at(i, 1)),
                ));
            }
        }
        out_all
    }
}
