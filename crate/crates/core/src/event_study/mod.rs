//! Announcement event study: market-model abnormal returns per firm and the
//! earnings-response panel regression with clustered standard errors.

mod erc;
mod market_model;

pub use erc::{
    erc_regression, erc_to_csv, erc_to_text, select_erc_sample, CoefficientRow, ErcError,
    ErcRegressionResult, SurpriseObservation,
};
pub use market_model::{
    fit_market_model, EventCar, MarketModelError, MarketModelFit, MIN_ESTIMATION_DAYS,
};
