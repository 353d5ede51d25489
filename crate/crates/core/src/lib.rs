//! Earnings forecasting toolkit: panel ingest and cleaning, feature
//! construction, a GRU-based forecaster with ensembling, benchmark models,
//! and the statistical evaluation suite (accuracy/bias, sign prediction,
//! rank tests, announcement event study).
//!
//! The crate is organized along the pipeline:
//!
//! * [`panel`] — CSV ingest, cleaning cascade, chronological split
//! * [`features`] — per-share scaling, market-window compression, winsorize/studentize
//! * [`nn`] — dense/GRU/batchnorm/dropout layers with analytic gradients, Adam
//! * [`forecaster`] — the two-head network, training loop, ensemble, model bundle
//! * [`benchmarks`] — random walk and cross-sectional regression baselines
//! * [`evaluation`] — sample filters, MAPD/MPD, sign metrics, rank tests, slices
//! * [`event_study`] — market-model abnormal returns and the ERC panel regression
//! * [`synth`] — synthetic panel generator with known dynamics
//! * [`pipeline`] — end-to-end wiring from raw panel to aligned forecasts

pub mod benchmarks;
pub mod evaluation;
pub mod event_study;
pub mod features;
pub mod forecaster;
pub mod linalg;
pub mod nn;
pub mod panel;
pub mod pipeline;
pub mod rng;
pub mod synth;
