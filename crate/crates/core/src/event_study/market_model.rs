//! Market-model abnormal returns: one OLS per firm of excess stock returns
//! on excess market returns plus one dummy per announcement covering its
//! three-day event window. The dummy coefficient times the window length is
//! the cumulative abnormal return.

use chrono::NaiveDate;
use thiserror::Error;

use crate::benchmarks::{ols, OlsError};
use crate::linalg::Matrix;
use crate::panel::{DailyMarketRecord, FirmId};

#[derive(Debug, Error)]
pub enum MarketModelError {
    #[error("firm {firm}: only {days} non-event estimation days, need at least {min}")]
    InsufficientDays { firm: FirmId, days: usize, min: usize },
    #[error("firm {firm}: no usable event windows")]
    NoUsableEvents { firm: FirmId },
    #[error("firm {firm}: {source}")]
    Fit {
        firm: FirmId,
        #[source]
        source: OlsError,
    },
}

pub const MIN_ESTIMATION_DAYS: usize = 30;

/// Cumulative abnormal return of one event window. Overlapping windows get
/// merged into a joint dummy covering all their event dates.
#[derive(Clone, Debug)]
pub struct EventCar {
    pub event_dates: Vec<NaiveDate>,
    pub car: f64,
    pub window_days: usize,
}

#[derive(Clone, Debug)]
pub struct MarketModelFit {
    pub firm_id: FirmId,
    pub alpha0: f64,
    pub alpha1: f64,
    pub events: Vec<EventCar>,
    pub residual_variance: f64,
    /// Events whose 3-day windows fell outside the return history.
    pub skipped_events: Vec<NaiveDate>,
    /// At least two event windows overlapped and share a joint dummy.
    pub merged_windows: bool,
}

/// Fit the market model for one firm. `days` must be the firm's trading days
/// sorted by date; `events` are announcement dates (snapped forward to the
/// next trading day); `half_window` is 1 for the three-day window.
pub fn fit_market_model(
    firm_id: &FirmId,
    days: &[DailyMarketRecord],
    events: &[NaiveDate],
    half_window: usize,
) -> Result<MarketModelFit, MarketModelError> {
    let n = days.len();
    let mut skipped = Vec::new();
    // Snap each event to a day index and expand to window positions.
    let mut windows: Vec<(Vec<NaiveDate>, Vec<usize>)> = Vec::new();
    let mut sorted_events: Vec<NaiveDate> = events.to_vec();
    sorted_events.sort_unstable();
    sorted_events.dedup();
    for &event in &sorted_events {
        let idx = days.partition_point(|d| d.date < event);
        if idx >= n || idx < half_window || idx + half_window >= n {
            skipped.push(event);
            continue;
        }
        let positions: Vec<usize> = (idx - half_window..=idx + half_window).collect();
        windows.push((vec![event], positions));
    }
    if windows.is_empty() && !sorted_events.is_empty() {
        return Err(MarketModelError::NoUsableEvents { firm: firm_id.clone() });
    }

    // Merge overlapping windows into joint dummies.
    let mut merged: Vec<(Vec<NaiveDate>, Vec<usize>)> = Vec::new();
    let mut merged_any = false;
    for (dates, positions) in windows {
        match merged.last_mut() {
            Some((last_dates, last_positions))
                if *positions.first().unwrap() <= *last_positions.last().unwrap() =>
            {
                merged_any = true;
                last_dates.extend(dates);
                for p in positions {
                    if p > *last_positions.last().unwrap() {
                        last_positions.push(p);
                    }
                }
            }
            _ => merged.push((dates, positions)),
        }
    }

    let mut in_event = vec![usize::MAX; n];
    for (g, (_, positions)) in merged.iter().enumerate() {
        for &p in positions {
            in_event[p] = g;
        }
    }
    let estimation_days = in_event.iter().filter(|&&g| g == usize::MAX).count();
    if estimation_days < MIN_ESTIMATION_DAYS {
        return Err(MarketModelError::InsufficientDays {
            firm: firm_id.clone(),
            days: estimation_days,
            min: MIN_ESTIMATION_DAYS,
        });
    }

    let g_count = merged.len();
    let x = Matrix::from_fn(n, 2 + g_count, |i, j| match j {
        0 => 1.0,
        1 => days[i].market_return - days[i].risk_free_rate,
        _ => {
            if in_event[i] == j - 2 {
                1.0
            } else {
                0.0
            }
        }
    });
    let y: Vec<f64> = days.iter().map(|d| d.stock_return - d.risk_free_rate).collect();
    let fit = ols(&x, &y).map_err(|source| MarketModelError::Fit { firm: firm_id.clone(), source })?;

    let events_out: Vec<EventCar> = merged
        .iter()
        .enumerate()
        .map(|(g, (dates, positions))| EventCar {
            event_dates: dates.clone(),
            car: fit.coefficients[2 + g] * positions.len() as f64,
            window_days: positions.len(),
        })
        .collect();

    Ok(MarketModelFit {
        firm_id: firm_id.clone(),
        alpha0: fit.coefficients[0],
        alpha1: fit.coefficients[1],
        events: events_out,
        residual_variance: fit.residual_variance,
        skipped_events: skipped,
        merged_windows: merged_any,
    })
}
