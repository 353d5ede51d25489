//! Synthetic firm panels with known dynamics: a seasonal year-over-year AR
//! process for EPS, analyst forecasts with a planted optimism bias, market
//! returns carrying a planted announcement response, and coverage assigned
//! by size. Every pipeline stage and statistical claim can be exercised
//! against the recorded ground truth.

use std::collections::HashMap;

use chrono::{Datelike, NaiveDate};

use crate::features::tobins_q;
use crate::panel::{DailyMarketRecord, FirmId, QuarterRecord};
use crate::rng::Rng;

/// EPS process: eps = μ·(1 + seasonal[industry][q]) + dev + crisis, with a
/// year-over-year deviation dev_t = ρ(sign)·dev_{t−4} + ε whose persistence
/// is asymmetric (downturns linger, upswings fade). The seasonal pattern is
/// the configured base rotated and rescaled per industry, so pooled linear
/// lag models are misspecified while the pattern stays readable from a
/// firm's own history.
#[derive(Clone, Debug)]
pub struct EpsProcess {
    pub level_mean: f64,
    /// Relative spread of firm levels (uniform in level_mean·(1 ± spread)).
    pub level_spread: f64,
    /// Base multiplicative seasonal offsets per fiscal quarter.
    pub seasonal_amp: [f64; 4],
    /// Persistence of positive year-over-year deviations.
    pub rho: f64,
    /// Persistence of negative deviations.
    pub rho_down: f64,
    /// Innovation standard deviation, relative to the firm level.
    pub noise_sd: f64,
    /// Initial deviation dispersion, relative to the firm level.
    pub init_dev_sd: f64,
    /// Probability per quarter of a firm-level adverse shock, which then
    /// lingers through the asymmetric persistence.
    pub firm_shock_prob: f64,
    /// Shock magnitude as a multiple of the innovation deviation.
    pub firm_shock_scale: f64,
    /// Amplitude of the multi-year business cycle modulating the level.
    pub cycle_amp: f64,
    /// Per-firm cycle period range in quarters; periods and phases vary by
    /// firm, so one year of lags cannot identify the cycle position.
    pub cycle_period_range: (f64, f64),
    pub crisis_date: Option<NaiveDate>,
    /// Relative EPS drop while the crisis is active (four quarters).
    pub crisis_shock: f64,
}

#[derive(Clone, Debug)]
pub struct AnalystModel {
    /// Planted median percentage difference: forecast = actual·(1 − bias + ν),
    /// so the measured MPD converges to `bias_mpd`.
    pub bias_mpd: f64,
    pub noise_sd: f64,
    /// Logistic coverage intercept.
    pub coverage_base: f64,
    /// Logistic slope on standardized log assets (bigger firms covered).
    pub coverage_size_slope: f64,
}

#[derive(Clone, Debug)]
pub struct MarketProcess {
    pub beta_mean: f64,
    pub beta_sd: f64,
    /// Daily expected excess market return.
    pub market_drift: f64,
    pub market_vol: f64,
    pub idio_vol: f64,
    pub rf_daily: f64,
    pub vix_level: f64,
    pub vix_reversion: f64,
    pub vix_vol: f64,
    /// Planted earnings response: announcement CAR = erc · surprise.
    pub erc: f64,
    pub daily_volume_mean: f64,
}

#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub n_firms: usize,
    /// Must be a multiple of 4 so every fiscal year is complete.
    pub quarters_per_firm: usize,
    pub start_year: i32,
    pub eps: EpsProcess,
    pub analyst: AnalystModel,
    pub market: MarketProcess,
    /// Fraction of firms priced below the penny threshold.
    pub penny_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_firms: 120,
            quarters_per_firm: 40,
            start_year: 2010,
            eps: EpsProcess {
                level_mean: 1.0,
                level_spread: 0.6,
                seasonal_amp: [-0.25, 0.05, 0.10, 0.30],
                rho: 0.05,
                rho_down: 0.85,
                noise_sd: 0.10,
                init_dev_sd: 0.20,
                firm_shock_prob: 0.04,
                firm_shock_scale: 3.0,
                cycle_amp: 0.25,
                cycle_period_range: (8.0, 20.0),
                crisis_date: Some(NaiveDate::from_ymd_opt(2020, 2, 18).unwrap()),
                crisis_shock: 0.25,
            },
            analyst: AnalystModel {
                bias_mpd: -0.13,
                noise_sd: 0.10,
                coverage_base: 1.2,
                coverage_size_slope: 1.5,
            },
            market: MarketProcess {
                beta_mean: 1.0,
                beta_sd: 0.3,
                market_drift: 0.0006,
                market_vol: 0.009,
                idio_vol: 0.015,
                rf_daily: 0.0001,
                vix_level: 20.0,
                vix_reversion: 0.05,
                vix_vol: 0.8,
                erc: 0.06,
                daily_volume_mean: 0.005,
            },
            penny_fraction: 0.06,
            seed: 7,
        }
    }
}

/// One announcement with its true (pre-noise) expectation and surprise.
#[derive(Clone, Debug)]
pub struct PlantedEvent {
    pub firm_id: FirmId,
    pub report_date: NaiveDate,
    pub fiscal_year: i32,
    pub fiscal_quarter: u8,
    pub expected_eps: f64,
    pub surprise: f64,
    pub ln_total_assets: f64,
    pub tobins_q: f64,
}

#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub planted_erc: f64,
    pub analyst_bias_mpd: f64,
    /// Rational expectation of each quarter's EPS given the prior year.
    pub expected_eps: HashMap<(FirmId, i32, u8), f64>,
    pub events: Vec<PlantedEvent>,
}

#[derive(Clone, Debug)]
pub struct SynthPanel {
    pub quarters: Vec<QuarterRecord>,
    pub market: Vec<DailyMarketRecord>,
    pub truth: GroundTruth,
}

const INDUSTRIES: [&str; 6] =
    ["Technology", "Healthcare", "Industrials", "Energy", "Consumer Cyclicals", "Financials"];

/// Industry seasonal pattern: the base amplitudes rotated by the industry
/// index and rescaled, giving six distinct cycles.
fn industry_seasonal(base: &[f64; 4], industry_idx: usize) -> [f64; 4] {
    let scale = 0.6 + 0.18 * industry_idx as f64;
    let mut out = [0.0; 4];
    for (q, slot) in out.iter_mut().enumerate() {
        *slot = scale * base[(q + industry_idx) % 4];
    }
    out
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Weekday trading calendar covering the panel span.
fn trading_days(start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
    let mut out = Vec::new();
    let mut d = start;
    while d <= end {
        if !matches!(d.weekday(), chrono::Weekday::Sat | chrono::Weekday::Sun) {
            out.push(d);
        }
        d = d + chrono::Days::new(1);
    }
    out
}

fn quarter_end(year: i32, quarter: u8) -> NaiveDate {
    let (m, d) = match quarter {
        1 => (3, 31),
        2 => (6, 30),
        3 => (9, 30),
        _ => (12, 31),
    };
    NaiveDate::from_ymd_opt(year, m, d).unwrap()
}

struct FirmParams {
    firm_id: FirmId,
    level: f64,
    beta: f64,
    industry: String,
    seasonal: [f64; 4],
    cycle_period: f64,
    cycle_phase: f64,
    ta0: f64,
    equity_ratio: f64,
    shares: f64,
    price0: f64,
    dividend_payer: bool,
    covered: bool,
}

impl FirmParams {
    /// Multi-year cycle factor at quarter index t.
    fn cycle(&self, amp: f64, t: usize) -> f64 {
        1.0 + amp
            * (2.0 * std::f64::consts::PI * t as f64 / self.cycle_period + self.cycle_phase).sin()
    }
}

/// Generate the full panel: quarterly records, daily market data and the
/// ground truth. Identical seeds produce bit-identical output.
pub fn generate_panel(config: &SynthConfig) -> SynthPanel {
    assert!(config.quarters_per_firm % 4 == 0, "whole fiscal years required");
    assert!(config.n_firms > 0);
    let years = config.quarters_per_firm / 4;

    let mut master = Rng::new(config.seed);
    let mut market_rng = master.fork();
    let mut firm_seed_rng = master.fork();

    // Market-wide daily series.
    let cal_start = NaiveDate::from_ymd_opt(config.start_year, 1, 2).unwrap();
    let cal_end = quarter_end(config.start_year + years as i32, 2);
    let calendar = trading_days(cal_start, cal_end);
    let n_days = calendar.len();
    let mut market_returns = Vec::with_capacity(n_days);
    let mut vix = Vec::with_capacity(n_days);
    let mut vix_level = config.market.vix_level;
    for day in &calendar {
        let crisis_active = config
            .eps
            .crisis_date
            .map(|c| *day >= c && *day < c + chrono::Days::new(365))
            .unwrap_or(false);
        let drift = if crisis_active { -config.market.market_drift } else { config.market.market_drift };
        market_returns
            .push(config.market.rf_daily + drift + config.market.market_vol * market_rng.normal());
        let target = if crisis_active { config.market.vix_level * 1.8 } else { config.market.vix_level };
        vix_level += config.market.vix_reversion * (target - vix_level)
            + config.market.vix_vol * market_rng.normal();
        vix_level = vix_level.max(5.0);
        vix.push(vix_level);
    }

    // Firm-level parameters. Coverage is assigned after sampling sizes so
    // the logistic argument can be standardized.
    let mut params: Vec<FirmParams> = Vec::with_capacity(config.n_firms);
    let mut firm_rngs: Vec<Rng> = Vec::with_capacity(config.n_firms);
    for i in 0..config.n_firms {
        let mut rng = firm_seed_rng.fork();
        let level = config.eps.level_mean
            * (1.0 + config.eps.level_spread * (2.0 * rng.next_f64() - 1.0));
        let ta0 = (2.0 + 4.0 * rng.normal().abs()).exp(); // log-spread sizes
        let penny = rng.next_f64() < config.penny_fraction;
        let industry_idx = rng.below(INDUSTRIES.len());
        let (pmin, pmax) = config.eps.cycle_period_range;
        params.push(FirmParams {
            firm_id: FirmId(format!("firm{i:04}")),
            level: level.max(0.25),
            beta: config.market.beta_mean + config.market.beta_sd * rng.normal(),
            industry: INDUSTRIES[industry_idx].to_string(),
            seasonal: industry_seasonal(&config.eps.seasonal_amp, industry_idx),
            cycle_period: rng.range(pmin, pmax),
            cycle_phase: rng.range(0.0, 2.0 * std::f64::consts::PI),
            ta0,
            equity_ratio: 0.3 + 0.4 * rng.next_f64(),
            shares: (ta0 / 30.0).max(0.5),
            price0: if penny { 2.0 + 2.0 * rng.next_f64() } else { 15.0 + 45.0 * rng.next_f64() },
            dividend_payer: rng.next_f64() < 0.6,
            covered: false,
        });
        firm_rngs.push(rng);
    }
    let ln_tas: Vec<f64> = params.iter().map(|p| p.ta0.ln()).collect();
    let ta_mean = ln_tas.iter().sum::<f64>() / ln_tas.len() as f64;
    let ta_var =
        ln_tas.iter().map(|v| (v - ta_mean).powi(2)).sum::<f64>() / ln_tas.len() as f64;
    let ta_sd = ta_var.sqrt().max(1e-9);
    for (i, p) in params.iter_mut().enumerate() {
        let z = (ln_tas[i] - ta_mean) / ta_sd;
        let prob = logistic(config.analyst.coverage_base + config.analyst.coverage_size_slope * z);
        p.covered = firm_rngs[i].next_f64() < prob;
    }

    let mut quarters = Vec::new();
    let mut market = Vec::new();
    let mut truth = GroundTruth {
        planted_erc: config.market.erc,
        analyst_bias_mpd: config.analyst.bias_mpd,
        expected_eps: HashMap::new(),
        events: Vec::new(),
    };

    for (i, p) in params.iter().enumerate() {
        let rng = &mut firm_rngs[i];

        // EPS path with year-over-year AR deviations.
        let total_q = config.quarters_per_firm;
        let mut dev = vec![0.0f64; total_q];
        let mut eps = vec![0.0f64; total_q];
        let mut expected = vec![0.0f64; total_q];
        let mut report_dates = Vec::with_capacity(total_q);
        for t in 0..total_q {
            let year = config.start_year + (t / 4) as i32;
            let quarter = (t % 4) as u8 + 1;
            let qe = quarter_end(year, quarter);
            let mut rd = qe + chrono::Days::new(35 + rng.below(8) as u64);
            while matches!(rd.weekday(), chrono::Weekday::Sat | chrono::Weekday::Sun) {
                rd = rd + chrono::Days::new(1);
            }
            report_dates.push(rd);

            let mut noise = config.eps.noise_sd * p.level * rng.normal();
            if rng.next_f64() < config.eps.firm_shock_prob {
                // Adverse firm shock; downside persistence makes it linger.
                noise -= config.eps.firm_shock_scale
                    * config.eps.noise_sd
                    * p.level
                    * rng.normal().abs();
            }
            let rho_of = |d: f64| if d >= 0.0 { config.eps.rho } else { config.eps.rho_down };
            dev[t] = if t < 4 {
                config.eps.init_dev_sd * p.level * rng.normal()
            } else {
                rho_of(dev[t - 4]) * dev[t - 4] + noise
            };
            let cyclic_level = p.level * p.cycle(config.eps.cycle_amp, t);
            let seasonal = p.level * p.seasonal[(quarter - 1) as usize];
            let crisis = match config.eps.crisis_date {
                Some(c) if qe >= c && qe < c + chrono::Days::new(365) => {
                    -config.eps.crisis_shock * p.level
                }
                _ => 0.0,
            };
            // The market's expectation carries the deterministic level and
            // the persistent part of the deviation, but not the fresh
            // innovation or the crisis shock.
            let prior_dev = if t < 4 { 0.0 } else { rho_of(dev[t - 4]) * dev[t - 4] };
            expected[t] = cyclic_level + seasonal + prior_dev;
            eps[t] = cyclic_level + seasonal + dev[t] + crisis;
            truth.expected_eps.insert((p.firm_id.clone(), year, quarter), expected[t]);
        }

        // Surprises relative to the expectation, denominator kept away
        // from zero.
        let surprises: Vec<f64> = (0..total_q)
            .map(|t| {
                let denom = if expected[t].abs() < 0.05 {
                    0.05f64.copysign(expected[t])
                } else {
                    expected[t]
                };
                (eps[t] - denom) / denom
            })
            .collect();

        // Daily series with planted announcement bumps.
        let bump_by_day: HashMap<NaiveDate, f64> = {
            let mut m = HashMap::new();
            for t in 0..total_q {
                let idx = calendar.partition_point(|d| *d < report_dates[t]);
                if idx == 0 || idx + 1 >= n_days {
                    continue;
                }
                let per_day = config.market.erc * surprises[t] / 3.0;
                for di in idx - 1..=idx + 1 {
                    *m.entry(calendar[di]).or_insert(0.0) += per_day;
                }
            }
            m
        };

        let mut price = p.price0;
        let mut prices = Vec::with_capacity(n_days);
        let mut firm_days = Vec::with_capacity(n_days);
        for (di, day) in calendar.iter().enumerate() {
            let excess_market = market_returns[di] - config.market.rf_daily;
            let mut r = config.market.rf_daily
                + p.beta * excess_market
                + config.market.idio_vol * rng.normal();
            if let Some(bump) = bump_by_day.get(day) {
                r += bump;
            }
            price *= 1.0 + r.max(-0.5);
            prices.push(price);
            firm_days.push((day, r));
        }

        // Quarterly fundamentals; assets follow a firm-specific stochastic
        // growth path and book values step at each report date.
        let growth = 0.005 + 0.01 * rng.next_f64();
        let mut ta_per_q = Vec::with_capacity(total_q);
        let mut ta = p.ta0;
        for _ in 0..total_q {
            ta *= 1.0 + growth + 0.02 * rng.normal();
            ta_per_q.push(ta.max(p.ta0 * 0.05));
        }

        // Daily Tobin's q via market cap over stepped book values.
        let mut q_daily = Vec::with_capacity(n_days);
        let mut last_reported: usize = 0;
        for (di, day) in calendar.iter().enumerate() {
            while last_reported + 1 < total_q && report_dates[last_reported + 1] <= *day {
                last_reported += 1;
            }
            let ta = ta_per_q[last_reported];
            let bve = p.equity_ratio * ta;
            let bvl = ta - bve;
            let mve = prices[di] * p.shares;
            q_daily.push(tobins_q(mve, bvl, bve).unwrap_or(1.0));
        }

        for (di, (day, r)) in firm_days.iter().enumerate() {
            market.push(DailyMarketRecord {
                firm_id: p.firm_id.clone(),
                date: **day,
                stock_return: *r,
                volume_per_share: config.market.daily_volume_mean
                    * (0.6 + 0.8 * ((di as f64 * 0.13).sin().abs() + 0.2 * rng.next_f64())),
                market_return: market_returns[di],
                vol_index_level: vix[di],
                tobins_q: q_daily[di],
                risk_free_rate: config.market.rf_daily,
            });
        }

        for t in 0..total_q {
            let year = config.start_year + (t / 4) as i32;
            let quarter = (t % 4) as u8 + 1;
            let rd = report_dates[t];
            let day_before = calendar.partition_point(|d| *d < rd).saturating_sub(1);
            let stock_price = prices[day_before];
            let ta = ta_per_q[t];

            let annual_actual: f64 = (0..4).map(|q| eps[(t / 4) * 4 + q]).sum();
            let (analyst_q_eps, analyst_y_eps) = if p.covered {
                let nq = config.analyst.noise_sd * rng.normal();
                let ny = config.analyst.noise_sd * (1.1 - 0.2 * quarter as f64 / 4.0) * rng.normal();
                (
                    Some(eps[t] * (1.0 - config.analyst.bias_mpd + nq)),
                    Some(annual_actual * (1.0 - config.analyst.bias_mpd + ny)),
                )
            } else {
                (None, None)
            };

            quarters.push(QuarterRecord {
                firm_id: p.firm_id.clone(),
                fiscal_year: Some(year),
                fiscal_quarter: Some(quarter),
                annual_only: false,
                report_date: rd,
                eps: eps[t],
                total_assets: ta,
                book_equity: p.equity_ratio * ta,
                shares_outstanding: p.shares,
                dividends_total: if p.dividend_payer {
                    (0.2 * eps[t].abs() * p.shares).max(0.0)
                } else {
                    0.0
                },
                accruals_total: (-0.1 * eps[t] + 0.05 * p.level * rng.normal()) * p.shares,
                stock_price,
                industry: p.industry.clone(),
                analyst_q_eps,
                analyst_y_eps,
            });

            truth.events.push(PlantedEvent {
                firm_id: p.firm_id.clone(),
                report_date: rd,
                fiscal_year: year,
                fiscal_quarter: quarter,
                expected_eps: expected[t],
                surprise: surprises[t],
                ln_total_assets: ta.ln(),
                tobins_q: q_daily[day_before],
            });
        }
    }

    market.sort_by(|a, b| (&a.firm_id, a.date).cmp(&(&b.firm_id, b.date)));
    quarters.sort_by(|a, b| {
        (&a.firm_id, a.report_date, a.fiscal_year, a.fiscal_quarter)
            .cmp(&(&b.firm_id, b.report_date, b.fiscal_year, b.fiscal_quarter))
    });
    SynthPanel { quarters, market, truth }
}
