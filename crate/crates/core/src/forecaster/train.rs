//! Minibatch training with EMA-tracked early stopping on the validation
//! score.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureStats, FeatureWindow};
use crate::linalg::Matrix;
use crate::nn::{two_head_mae, AdamState, Dropout};
use crate::rng::Rng;

use super::net::ForecastNet;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub dropout: f64,
    pub ema_lambda: f64,
    pub ensemble_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 512,
            learning_rate: 0.0075,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            dropout: 0.001,
            ema_lambda: 0.2,
            ensemble_size: 5,
            max_epochs: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("empty {0} partition")]
    EmptyPartition(&'static str),
}

/// Exponential-moving-average trend watcher. Stops at the first strict EMA
/// increase from one epoch to the next.
#[derive(Clone, Debug)]
pub struct EarlyStopper {
    lambda: f64,
    ema: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop,
}

impl EarlyStopper {
    pub fn new(lambda: f64) -> EarlyStopper {
        assert!(lambda > 0.0 && lambda <= 1.0);
        EarlyStopper { lambda, ema: None }
    }

    /// Feed this epoch's validation score. The incremental EMA form
    /// `ema += λ(score − ema)` is exact at the fixed point, so equal scores
    /// never trigger a spurious stop.
    pub fn observe(&mut self, score: f64) -> StopDecision {
        match self.ema {
            None => {
                self.ema = Some(score);
                StopDecision::Continue
            }
            Some(prev) => {
                let next = prev + self.lambda * (score - prev);
                self.ema = Some(next);
                if next > prev {
                    StopDecision::Stop
                } else {
                    StopDecision::Continue
                }
            }
        }
    }

    pub fn ema(&self) -> Option<f64> {
        self.ema
    }
}

/// Per-member training report.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StopReport {
    pub seed: u64,
    pub epochs_run: usize,
    pub stopped_early: bool,
    /// Epoch whose parameters were returned (1-based).
    pub returned_epoch: usize,
    pub val_scores: Vec<f64>,
    /// Parameter fingerprint at the end of each epoch.
    pub param_checksums: Vec<u64>,
}

fn batch_targets(windows: &[&FeatureWindow], stats: &FeatureStats) -> Matrix {
    Matrix::from_fn(windows.len(), 2, |i, j| {
        if j == 0 {
            stats.target_q.standardize(windows[i].target_q_eps)
        } else {
            stats.target_y.standardize(windows[i].target_y_eps)
        }
    })
}

/// Mean validation loss (standardized two-head MAE), batched for memory.
pub fn validation_score(
    net: &ForecastNet,
    windows: &[FeatureWindow],
    stats: &FeatureStats,
    batch_size: usize,
) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for chunk in windows.chunks(batch_size) {
        let refs: Vec<&FeatureWindow> = chunk.iter().collect();
        let (seq, market) = ForecastNet::batch_inputs(&refs);
        let out = net.forward_infer(&seq, &market);
        let targets = batch_targets(&refs, stats);
        let (loss, _) = two_head_mae(&out, &targets);
        total += loss * chunk.len() as f64;
        count += chunk.len();
    }
    total / count as f64
}

/// Train one member network: seeded shuffling, minibatch Adam on the summed
/// two-head MAE, early stopping on the validation EMA, restoring the
/// parameters of the epoch preceding the stop.
pub fn train_one(
    config: &TrainConfig,
    train: &[FeatureWindow],
    validation: &[FeatureWindow],
    stats: &FeatureStats,
    seed: u64,
) -> Result<(ForecastNet, StopReport), TrainError> {
    if train.is_empty() {
        return Err(TrainError::EmptyPartition("train"));
    }
    if validation.is_empty() {
        return Err(TrainError::EmptyPartition("validation"));
    }

    let mut rng = Rng::new(seed);
    let mut net = ForecastNet::new(&mut rng);
    let shapes = net.param_shapes();
    let mut adam = AdamState::new(
        &shapes,
        config.learning_rate,
        config.beta1,
        config.beta2,
        config.epsilon,
    );
    let dropout = Dropout::new(config.dropout);
    let mut stopper = EarlyStopper::new(config.ema_lambda);

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut prev_snapshot: Option<ForecastNet> = None;
    let mut val_scores = Vec::new();
    let mut checksums = Vec::new();

    for epoch in 1..=config.max_epochs {
        rng.shuffle(&mut order);
        for (batch_no, batch_idx) in order.chunks(config.batch_size).enumerate() {
            let refs: Vec<&FeatureWindow> = batch_idx.iter().map(|&i| &train[i]).collect();
            let (seq, market) = ForecastNet::batch_inputs(&refs);
            let targets = batch_targets(&refs, stats);
            let (out, cache) = net.forward_train(&seq, &market, dropout, &mut rng);
            let (loss, grad) = two_head_mae(&out, &targets);
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, batch: batch_no });
            }
            let grads = net.backward(&cache, &grad);
            let mut params = net.param_slices_mut();
            adam.step(&mut params, &grads);
        }

        let score = validation_score(&net, validation, stats, config.batch_size);
        val_scores.push(score);
        checksums.push(net.param_checksum());

        if stopper.observe(score) == StopDecision::Stop {
            let restored = prev_snapshot.unwrap_or_else(|| net.clone());
            let report = StopReport {
                seed,
                epochs_run: epoch,
                stopped_early: true,
                returned_epoch: epoch - 1,
                val_scores,
                param_checksums: checksums,
            };
            return Ok((restored, report));
        }
        prev_snapshot = Some(net.clone());
    }

    let report = StopReport {
        seed,
        epochs_run: config.max_epochs,
        stopped_early: false,
        returned_epoch: config.max_epochs,
        val_scores,
        param_checksums: checksums,
    };
    Ok((net, report))
}
