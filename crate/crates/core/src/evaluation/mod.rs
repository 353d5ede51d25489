//! Evaluation protocol: sample filters, accuracy/bias measures, sign
//! prediction, rank tests, partitioned comparisons and the matched-firm
//! analysis.

mod filters;
mod forecast_io;
mod matching;
mod metrics;
mod partition;
mod report;
mod sign;

pub use filters::{apply_sample_filters, FilterError};
pub use forecast_io::{
    read_forecast_csv, write_forecast_csv, ForecastIoError, FORECAST_CSV_HEADER,
};
pub use matching::{match_similar_firms, MatchError, MatchReport, MatchedPair};
pub use metrics::{
    mapd, median, mpd, percentage_difference, EvalReport, MetricError, MetricKind, TestResult,
};
pub use partition::{overall_evaluate, partition_evaluate, sign_prediction_report, SliceKey};
pub use rank_tests::{
    mann_whitney_u, normal_cdf, wilcoxon_signed_rank, MannWhitneyResult, RankTestError,
    WilcoxonResult,
};
pub use report::{reports_to_csv, reports_to_text, sign_reports_to_csv, sign_reports_to_text};
pub use sign::{macro_metrics, sign_classify, Sign, SignConfusion, SignError, SignReport};

use chrono::NaiveDate;

use crate::panel::FirmId;

/// Forecast source used in the comparisons.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelTag {
    Rnn,
    Analyst,
    Regression,
    RandomWalk,
}

impl ModelTag {
    pub const ALL: [ModelTag; 4] =
        [ModelTag::Rnn, ModelTag::Analyst, ModelTag::Regression, ModelTag::RandomWalk];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelTag::Rnn => "rnn",
            ModelTag::Analyst => "analyst",
            ModelTag::Regression => "regression",
            ModelTag::RandomWalk => "random_walk",
        }
    }

    pub fn parse(s: &str) -> Option<ModelTag> {
        match s {
            "rnn" => Some(ModelTag::Rnn),
            "analyst" => Some(ModelTag::Analyst),
            "regression" => Some(ModelTag::Regression),
            "random_walk" => Some(ModelTag::RandomWalk),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frequency {
    Annual,
    Quarterly,
}

impl Frequency {
    pub fn as_str(self) -> &'static str {
        match self {
            Frequency::Annual => "annual",
            Frequency::Quarterly => "quarterly",
        }
    }
}

/// Aligned predictions and metadata for one announcement.
#[derive(Clone, Debug)]
pub struct ForecastRow {
    pub firm_id: FirmId,
    /// Missing report dates are tolerated here and filtered in the event
    /// study, which needs them to link announcements to returns.
    pub report_date: Option<NaiveDate>,
    pub fiscal_year: i32,
    pub fiscal_quarter: u8,
    pub industry: String,
    pub total_assets: f64,
    pub stock_price: f64,
    pub tobins_q: f64,
    /// Analyst consensus exists for this announcement.
    pub covered: bool,
    pub actual_q: f64,
    pub actual_y: f64,
    /// Same quarter of the previous fiscal year (sign prediction base).
    pub prev_q_eps: Option<f64>,
    /// Previous fiscal year's annual EPS.
    pub prev_y_eps: Option<f64>,
    pub rnn_q: Option<f64>,
    pub rnn_y: Option<f64>,
    pub analyst_q: Option<f64>,
    pub analyst_y: Option<f64>,
    pub regression_q: Option<f64>,
    pub regression_y: Option<f64>,
    pub random_walk_q: Option<f64>,
    pub random_walk_y: Option<f64>,
}

impl ForecastRow {
    pub fn actual(&self, freq: Frequency) -> f64 {
        match freq {
            Frequency::Annual => self.actual_y,
            Frequency::Quarterly => self.actual_q,
        }
    }

    pub fn prev_actual(&self, freq: Frequency) -> Option<f64> {
        match freq {
            Frequency::Annual => self.prev_y_eps,
            Frequency::Quarterly => self.prev_q_eps,
        }
    }

    pub fn prediction(&self, model: ModelTag, freq: Frequency) -> Option<f64> {
        match (model, freq) {
            (ModelTag::Rnn, Frequency::Annual) => self.rnn_y,
            (ModelTag::Rnn, Frequency::Quarterly) => self.rnn_q,
            (ModelTag::Analyst, Frequency::Annual) => self.analyst_y,
            (ModelTag::Analyst, Frequency::Quarterly) => self.analyst_q,
            (ModelTag::Regression, Frequency::Annual) => self.regression_y,
            (ModelTag::Regression, Frequency::Quarterly) => self.regression_q,
            (ModelTag::RandomWalk, Frequency::Annual) => self.random_walk_y,
            (ModelTag::RandomWalk, Frequency::Quarterly) => self.random_walk_q,
        }
    }

    /// Percentage error of one model; requires the prediction to exist and
    /// the actual to be nonzero.
    pub fn error(&self, model: ModelTag, freq: Frequency) -> Option<f64> {
        let pred = self.prediction(model, freq)?;
        percentage_difference(self.actual(freq), pred).ok()
    }

    pub fn set_prediction(&mut self, model: ModelTag, freq: Frequency, value: Option<f64>) {
        let slot = match (model, freq) {
            (ModelTag::Rnn, Frequency::Annual) => &mut self.rnn_y,
            (ModelTag::Rnn, Frequency::Quarterly) => &mut self.rnn_q,
            (ModelTag::Analyst, Frequency::Annual) => &mut self.analyst_y,
            (ModelTag::Analyst, Frequency::Quarterly) => &mut self.analyst_q,
            (ModelTag::Regression, Frequency::Annual) => &mut self.regression_y,
            (ModelTag::Regression, Frequency::Quarterly) => &mut self.regression_q,
            (ModelTag::RandomWalk, Frequency::Annual) => &mut self.random_walk_y,
            (ModelTag::RandomWalk, Frequency::Quarterly) => &mut self.random_walk_q,
        };
        *slot = value;
    }
}
