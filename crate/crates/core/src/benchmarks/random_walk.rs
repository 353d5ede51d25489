//! Naive random walk benchmark: the annual forecast repeats the previous
//! fiscal year's annual EPS; the quarterly forecast repeats the same quarter
//! of the previous year (seasonal lag).

use std::collections::HashMap;

use crate::panel::{FirmId, QuarterRecord};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RandomWalkPrediction {
    pub q_eps: Option<f64>,
    pub y_eps: Option<f64>,
}

/// EPS lookup by (firm, year, quarter) over a cleaned panel.
pub struct RandomWalk {
    eps: HashMap<(FirmId, i32, u8), f64>,
}

impl RandomWalk {
    pub fn new(panel: &[QuarterRecord]) -> RandomWalk {
        let mut eps = HashMap::new();
        for r in panel {
            if let Some((y, q)) = r.yq() {
                eps.insert((r.firm_id.clone(), y, q), r.eps);
            }
        }
        RandomWalk { eps }
    }

    /// Forecast for the announcement (year, quarter). Missing lags yield no
    /// prediction for the affected horizon.
    pub fn predict(&self, firm: &FirmId, year: i32, quarter: u8) -> RandomWalkPrediction {
        let q_eps = self.eps.get(&(firm.clone(), year - 1, quarter)).copied();
        let mut annual = 0.0;
        let mut complete = true;
        for q in 1..=4u8 {
            match self.eps.get(&(firm.clone(), year - 1, q)) {
                Some(v) => annual += v,
                None => {
                    complete = false;
                    break;
                }
            }
        }
        RandomWalkPrediction { q_eps, y_eps: complete.then_some(annual) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::tests_support::record_with_dates;

    fn firm_year(firm: &str, year: i32, eps: [f64; 4]) -> Vec<QuarterRecord> {
        (1..=4u8)
            .map(|q| {
                let mut r = record_with_dates(
                    firm,
                    year,
                    q,
                    &format!("{}-{:02}-01", year, 2 + 3 * (q - 1)),
                );
                r.eps = eps[q as usize - 1];
                r
            })
            .collect()
    }

    #[test]
    fn annual_is_previous_year_sum() {
        let mut panel = firm_year("f", 2018, [0.25; 4]); // annual 1.0
        panel.extend(firm_year("f", 2019, [0.3; 4])); // annual 1.2
        let rw = RandomWalk::new(&panel);
        let p = rw.predict(&"f".into(), 2020, 1);
        assert!((p.y_eps.unwrap() - 1.2).abs() < 1e-12);
    }

    #[test]
    fn quarterly_is_seasonal_lag() {
        let mut panel = firm_year("f", 2019, [0.1, 0.3, 0.5, 0.7]);
        panel.extend(firm_year("f", 2020, [0.2, 0.4, 0.6, 0.8]));
        let rw = RandomWalk::new(&panel);
        assert_eq!(rw.predict(&"f".into(), 2020, 2).q_eps, Some(0.3));
        assert_eq!(rw.predict(&"f".into(), 2021, 4).q_eps, Some(0.8));
    }

    #[test]
    fn missing_prior_year_gives_no_prediction() {
        let panel = firm_year("f", 2020, [0.1; 4]);
        let rw = RandomWalk::new(&panel);
        let p = rw.predict(&"f".into(), 2020, 1);
        assert_eq!(p, RandomWalkPrediction { q_eps: None, y_eps: None });
    }

    #[test]
    fn translation_equivariant() {
        let base = {
            let mut panel = firm_year("f", 2019, [0.1, 0.2, 0.3, 0.4]);
            panel.extend(firm_year("f", 2020, [0.5, 0.6, 0.7, 0.8]));
            panel
        };
        let c = 0.37;
        let shifted: Vec<QuarterRecord> = base
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.eps += c;
                r
            })
            .collect();
        let rw0 = RandomWalk::new(&base);
        let rw1 = RandomWalk::new(&shifted);
        let p0 = rw0.predict(&"f".into(), 2020, 3);
        let p1 = rw1.predict(&"f".into(), 2020, 3);
        assert!((p1.q_eps.unwrap() - p0.q_eps.unwrap() - c).abs() < 1e-12);
        assert!((p1.y_eps.unwrap() - p0.y_eps.unwrap() - 4.0 * c).abs() < 1e-12);
    }
}
