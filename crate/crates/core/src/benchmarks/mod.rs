//! Benchmark models: the naive random walk and the cross-sectional
//! regression of cumulative future quarterly EPS, plus the shared OLS core.

mod ols;
mod random_walk;
mod regression;

pub use ols::{ols, OlsError, OlsFit};
pub use random_walk::{RandomWalk, RandomWalkPrediction};
pub use regression::{
    fit_regression_benchmark, regression_predict, AnnouncementState, PanelIndex,
    RegressionBenchError, RegressionBenchmark, RegressionPrediction, RECIPE,
};
