//! Flat key-value run configuration with paper-default constants. Lines are
//! `key = value`; `#` starts a comment. CLI flags override file values.

use std::collections::HashMap;
use std::path::Path;

use chrono::NaiveDate;
use quartercast_core::forecaster::TrainConfig;
use quartercast_core::panel::{MarketSchema, PanelSchema};
use quartercast_core::synth::SynthConfig;

#[derive(Debug)]
pub struct ConfigError(pub String);

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub penny_threshold: f64,
    pub trim: f64,
    pub sign_threshold: f64,
    pub covid_date: NaiveDate,
    pub match_limit: f64,
    pub fractions: (f64, f64, f64),
    pub seed: u64,
    pub train: TrainConfig,
    pub synth: SynthConfig,
    pub schema: PanelSchema,
    pub market_schema: MarketSchema,
    /// FNV-1a hash of the effective key-value state, for the report manifest.
    pub config_hash: String,
    raw: Vec<(String, String)>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut config = RunConfig {
            penny_threshold: 5.0,
            trim: 0.05,
            sign_threshold: 0.05,
            covid_date: NaiveDate::from_ymd_opt(2020, 2, 18).unwrap(),
            match_limit: 0.01,
            fractions: (0.7, 0.1, 0.2),
            seed: 7,
            train: TrainConfig::default(),
            synth: SynthConfig::default(),
            schema: PanelSchema::default(),
            market_schema: MarketSchema::default(),
            config_hash: String::new(),
            raw: Vec::new(),
        };
        config.train.seed = config.seed;
        config.synth.seed = config.seed;
        config.rehash();
        config
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig, ConfigError> {
        let mut config = RunConfig::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
            for (no, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    return Err(ConfigError(format!(
                        "{} line {}: expected key = value",
                        path.display(),
                        no + 1
                    )));
                };
                config.set(key.trim(), value.trim())?;
            }
        }
        config.rehash();
        Ok(config)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = |what: &str| ConfigError(format!("config key {key}: expected {what}, got {value:?}"));
        let parse_f64 = || value.parse::<f64>().map_err(|_| bad("a number"));
        let parse_usize = || value.parse::<usize>().map_err(|_| bad("an integer"));
        match key {
            "penny_threshold" => self.penny_threshold = parse_f64()?,
            "trim" => self.trim = parse_f64()?,
            "sign_threshold" => self.sign_threshold = parse_f64()?,
            "match_limit" => self.match_limit = parse_f64()?,
            "covid_date" => {
                self.covid_date = value.parse().map_err(|_| bad("an ISO date"))?;
            }
            "seed" => {
                self.seed = value.parse().map_err(|_| bad("an integer"))?;
                self.train.seed = self.seed;
                self.synth.seed = self.seed;
            }
            "batch_size" => self.train.batch_size = parse_usize()?,
            "learning_rate" => self.train.learning_rate = parse_f64()?,
            "dropout" => self.train.dropout = parse_f64()?,
            "ema_lambda" => self.train.ema_lambda = parse_f64()?,
            "ensemble_size" => self.train.ensemble_size = parse_usize()?,
            "max_epochs" => self.train.max_epochs = parse_usize()?,
            "synth_firms" => self.synth.n_firms = parse_usize()?,
            "synth_quarters" => self.synth.quarters_per_firm = parse_usize()?,
            "synth_start_year" => {
                self.synth.start_year = value.parse().map_err(|_| bad("a year"))?;
            }
            "analyst_bias_mpd" => self.synth.analyst.bias_mpd = parse_f64()?,
            "planted_erc" => self.synth.market.erc = parse_f64()?,
            "eps_noise_sd" => self.synth.eps.noise_sd = parse_f64()?,
            _ => {
                if let Some(field) = key.strip_prefix("schema.") {
                    let mut overrides = HashMap::new();
                    overrides.insert(field.to_string(), value.to_string());
                    self.schema = self.schema.clone().with_overrides(&overrides);
                } else {
                    return Err(ConfigError(format!("unknown config key {key:?}")));
                }
            }
        }
        self.raw.push((key.to_string(), value.to_string()));
        Ok(())
    }

    pub fn rehash(&mut self) {
        let mut state = String::new();
        for (k, v) in &self.raw {
            state.push_str(k);
            state.push('=');
            state.push_str(v);
            state.push('\n');
        }
        state.push_str(&format!(
            "defaults:penny={},trim={},sign={},covid={},match={},seed={}",
            self.penny_threshold,
            self.trim,
            self.sign_threshold,
            self.covid_date,
            self.match_limit,
            self.seed
        ));
        self.config_hash = format!("{:016x}", fnv1a(state.as_bytes()));
    }
}
