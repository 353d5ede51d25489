//! Earnings-response regression: cumulative announcement abnormal returns on
//! the earnings surprise and controls, with firm fixed effects absorbed by
//! within-demeaning, explicit year (and quarter) dummies, and standard
//! errors clustered by firm.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::NaiveDate;
use thiserror::Error;

use crate::evaluation::{normal_cdf, ForecastRow, Frequency, ModelTag};
use crate::linalg::{qr_least_squares, LinalgError, Matrix};
use crate::panel::FirmId;

#[derive(Debug, Error)]
pub enum ErcError {
    #[error("need at least two firms for clustered standard errors, got {0}")]
    SingleCluster(usize),
    #[error("need at least two distinct years, got {0}")]
    SingleYear(usize),
    #[error("empty ERC sample")]
    Empty,
    #[error("degenerate regressor(s): {names:?}")]
    Degenerate { names: Vec<String> },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// One announcement with its surprise and controls.
#[derive(Clone, Debug)]
pub struct SurpriseObservation {
    pub firm_id: FirmId,
    pub event_date: NaiveDate,
    /// (EPS − ÊPS) / ÊPS for the model under evaluation.
    pub surprise: f64,
    pub ln_total_assets: f64,
    pub tobins_q: f64,
    pub fiscal_year: i32,
    pub fiscal_quarter: u8,
    /// Cumulative 3-day abnormal return of the announcement.
    pub car: f64,
}

#[derive(Clone, Debug)]
pub struct CoefficientRow {
    pub name: String,
    pub estimate: f64,
    pub clustered_se: f64,
    pub t_stat: f64,
    pub p_value: f64,
    pub stars: &'static str,
}

#[derive(Clone, Debug)]
pub struct ErcRegressionResult {
    pub rows: Vec<CoefficientRow>,
    /// Within-R² of the demeaned regression.
    pub r_squared_within: f64,
    pub n: usize,
    pub n_firms: usize,
    pub cluster_dimension: &'static str,
    /// Nuisance dummies dropped because the within transform zeroed them
    /// (e.g. a year observed only in single-event firms).
    pub dropped: Vec<String>,
}

impl ErcRegressionResult {
    pub fn coefficient(&self, name: &str) -> Option<&CoefficientRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.10 {
        "*"
    } else {
        ""
    }
}

/// Build the ERC sample for one model: only rows carrying a report date, a
/// nonzero prediction and positive total assets survive; for annual runs
/// only the Q4-information announcement of each fiscal year is kept (the
/// most recent prediction prior to the annual report).
pub fn select_erc_sample(
    rows: &[ForecastRow],
    model: ModelTag,
    freq: Frequency,
    cars: &HashMap<(FirmId, NaiveDate), f64>,
) -> Result<Vec<SurpriseObservation>, ErcError> {
    let mut out = Vec::new();
    for r in rows {
        if freq == Frequency::Annual && r.fiscal_quarter != 4 {
            continue;
        }
        let Some(event_date) = r.report_date else { continue };
        let Some(pred) = r.prediction(model, freq) else { continue };
        if pred == 0.0 || r.total_assets <= 0.0 {
            continue;
        }
        let Some(&car) = cars.get(&(r.firm_id.clone(), event_date)) else { continue };
        out.push(SurpriseObservation {
            firm_id: r.firm_id.clone(),
            event_date,
            surprise: (r.actual(freq) - pred) / pred,
            ln_total_assets: r.total_assets.ln(),
            tobins_q: r.tobins_q,
            fiscal_year: r.fiscal_year,
            fiscal_quarter: r.fiscal_quarter,
            car,
        });
    }
    if out.is_empty() {
        return Err(ErcError::Empty);
    }
    Ok(out)
}

/// Fixed-effects regression of the CAR on surprise, ln(assets), Tobin's q,
/// their surprise interactions, and year (plus quarter) dummies. Firm
/// effects are absorbed by demeaning the dependent variable and every
/// regressor within firm (the dummy coefficients are unchanged by that
/// partialling). Standard errors are clustered by firm with the
/// G/(G−1)·(n−1)/(n−k) small-sample factor.
pub fn erc_regression(
    observations: &[SurpriseObservation],
    freq: Frequency,
) -> Result<ErcRegressionResult, ErcError> {
    if observations.is_empty() {
        return Err(ErcError::Empty);
    }
    let firms: BTreeSet<&FirmId> = observations.iter().map(|o| &o.firm_id).collect();
    if firms.len() < 2 {
        return Err(ErcError::SingleCluster(firms.len()));
    }
    let years: BTreeSet<i32> = observations.iter().map(|o| o.fiscal_year).collect();
    if years.len() < 2 {
        return Err(ErcError::SingleYear(years.len()));
    }
    let base_year = *years.iter().next().expect("nonempty");
    let dummy_years: Vec<i32> = years.iter().copied().filter(|&y| y != base_year).collect();

    let mut names: Vec<String> = vec![
        "surprise".into(),
        "ln_assets".into(),
        "ln_assets_x_surprise".into(),
        "tobins_q".into(),
        "tobins_q_x_surprise".into(),
    ];
    if freq == Frequency::Quarterly {
        for q in 1..=3u8 {
            names.push(format!("q{q}"));
        }
    }
    for y in &dummy_years {
        names.push(format!("year_{y}"));
    }
    let p = names.len();
    let n = observations.len();

    let raw_row = |o: &SurpriseObservation| -> Vec<f64> {
        let mut row = vec![
            o.surprise,
            o.ln_total_assets,
            o.ln_total_assets * o.surprise,
            o.tobins_q,
            o.tobins_q * o.surprise,
        ];
        if freq == Frequency::Quarterly {
            for q in 1..=3u8 {
                row.push(if o.fiscal_quarter == q { 1.0 } else { 0.0 });
            }
        }
        for y in &dummy_years {
            row.push(if o.fiscal_year == *y { 1.0 } else { 0.0 });
        }
        row
    };

    // Within-firm demeaning of y and every regressor.
    let mut x_rows: Vec<Vec<f64>> = observations.iter().map(raw_row).collect();
    let mut y: Vec<f64> = observations.iter().map(|o| o.car).collect();
    let mut firm_rows: BTreeMap<&FirmId, Vec<usize>> = BTreeMap::new();
    for (i, o) in observations.iter().enumerate() {
        firm_rows.entry(&o.firm_id).or_default().push(i);
    }
    for rows_of_firm in firm_rows.values() {
        let m = rows_of_firm.len() as f64;
        let mut x_mean = vec![0.0; p];
        let mut y_mean = 0.0;
        for &i in rows_of_firm {
            y_mean += y[i];
            for j in 0..p {
                x_mean[j] += x_rows[i][j];
            }
        }
        y_mean /= m;
        for v in &mut x_mean {
            *v /= m;
        }
        for &i in rows_of_firm {
            y[i] -= y_mean;
            for j in 0..p {
                x_rows[i][j] -= x_mean[j];
            }
        }
    }

    // Dummy columns zeroed by the within transform carry no information;
    // drop them. A degenerate core regressor is an error instead.
    const CORE_COLUMNS: usize = 5;
    let mut dropped = Vec::new();
    let mut keep: Vec<usize> = Vec::with_capacity(p);
    for j in 0..p {
        let norm: f64 = x_rows.iter().map(|row| row[j] * row[j]).sum();
        if j >= CORE_COLUMNS && norm.sqrt() <= 1e-10 * (n as f64).sqrt() {
            dropped.push(names[j].clone());
        } else {
            keep.push(j);
        }
    }
    if keep.len() < p {
        for row in &mut x_rows {
            *row = keep.iter().map(|&j| row[j]).collect();
        }
    }
    let names: Vec<String> = keep.iter().map(|&j| names[j].clone()).collect();
    let p = names.len();

    let x = Matrix::from_rows(&x_rows);
    let sol = qr_least_squares(&x, &y).map_err(|e| match e {
        LinalgError::RankDeficient { columns } => ErcError::Degenerate {
            names: columns.iter().map(|&j| names[j].clone()).collect(),
        },
        other => ErcError::Linalg(other),
    })?;

    let rss: f64 = sol.residuals.iter().map(|r| r * r).sum();
    let tss: f64 = y.iter().map(|v| v * v).sum();
    let r_squared_within = if tss > 0.0 { 1.0 - rss / tss } else { 0.0 };

    // Cluster-robust sandwich: bread = (X'X)^{-1} via solving with the QR,
    // meat = Σ_g (X_g' e_g)(X_g' e_g)'.
    let xtx_inv = invert_gram(&x)?;
    let mut meat = vec![vec![0.0f64; p]; p];
    for rows_of_firm in firm_rows.values() {
        let mut score = vec![0.0f64; p];
        for &i in rows_of_firm {
            for j in 0..p {
                score[j] += x.at(i, j) * sol.residuals[i];
            }
        }
        for a in 0..p {
            for b in 0..p {
                meat[a][b] += score[a] * score[b];
            }
        }
    }
    let g = firms.len() as f64;
    let nf = n as f64;
    let pf = p as f64;
    let correction = if nf > pf { (g / (g - 1.0)) * ((nf - 1.0) / (nf - pf)) } else { 1.0 };

    // V = bread * meat * bread * correction; se_j = sqrt(V_jj).
    let mut rows_out = Vec::with_capacity(p);
    for j in 0..p {
        let mut v_jj = 0.0;
        for a in 0..p {
            let mut inner = 0.0;
            for b in 0..p {
                inner += meat[a][b] * xtx_inv[b][j];
            }
            v_jj += xtx_inv[j][a] * inner;
        }
        let se = (v_jj * correction).max(0.0).sqrt();
        let estimate = sol.coefficients[j];
        let t_stat = if se > 0.0 { estimate / se } else { f64::NAN };
        let p_value = if t_stat.is_finite() {
            2.0 * (1.0 - normal_cdf(t_stat.abs()))
        } else {
            f64::NAN
        };
        rows_out.push(CoefficientRow {
            name: names[j].clone(),
            estimate,
            clustered_se: se,
            t_stat,
            p_value,
            stars: stars(p_value),
        });
    }

    Ok(ErcRegressionResult {
        rows: rows_out,
        r_squared_within,
        n,
        n_firms: firms.len(),
        cluster_dimension: "firm",
        dropped,
    })
}

/// (X'X)^{-1} by Gauss-Jordan with partial pivoting; X is tall and already
/// rank-checked by the QR solve.
fn invert_gram(x: &Matrix) -> Result<Vec<Vec<f64>>, ErcError> {
    let p = x.cols();
    let mut a = vec![vec![0.0f64; 2 * p]; p];
    for i in 0..p {
        for j in 0..p {
            let mut acc = 0.0;
            for r in 0..x.rows() {
                acc += x.at(r, i) * x.at(r, j);
            }
            a[i][j] = acc;
        }
        a[i][p + i] = 1.0;
    }
    for col in 0..p {
        let piv = (col..p)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("nonempty");
        if a[piv][col].abs() < 1e-300 {
            return Err(ErcError::Linalg(LinalgError::RankDeficient { columns: vec![col] }));
        }
        a.swap(col, piv);
        let d = a[col][col];
        for v in &mut a[col] {
            *v /= d;
        }
        for r in 0..p {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for j in 0..2 * p {
                        a[r][j] -= f * a[col][j];
                    }
                }
            }
        }
    }
    Ok(a.into_iter().map(|row| row[p..].to_vec()).collect())
}

/// Emit the coefficient table as CSV.
pub fn erc_to_csv(result: &ErcRegressionResult) -> String {
    let mut out = String::from("name,estimate,clustered_se,t,p,stars\n");
    for r in &result.rows {
        out.push_str(&format!(
            "{},{:.8},{:.8},{:.4},{:.6},{}\n",
            r.name, r.estimate, r.clustered_se, r.t_stat, r.p_value, r.stars
        ));
    }
    out.push_str(&format!("r_squared_within,{:.6},,,,\n", result.r_squared_within));
    out.push_str(&format!("n,{},,,,\n", result.n));
    out
}

/// Aligned text rendering of the coefficient table.
pub fn erc_to_text(title: &str, result: &ErcRegressionResult) -> String {
    let mut out = format!("{title}\n");
    out.push_str(&format!(
        "{:<24} {:>12} {:>12} {:>8} {:>8}\n",
        "Variable", "Estimate", "Cluster SE", "t", "p"
    ));
    for r in &result.rows {
        out.push_str(&format!(
            "{:<24} {:>12.6} {:>12.6} {:>8.2} {:>8.4} {}\n",
            r.name, r.estimate, r.clustered_se, r.t_stat, r.p_value, r.stars
        ));
    }
    out.push_str(&format!(
        "R² (within) {:.4}   N {}   firms {}   clusters: {}\n",
        result.r_squared_within, result.n, result.n_firms, result.cluster_dimension
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn synth_observations(
        n_firms: usize,
        per_firm: usize,
        beta0: f64,
        noise: f64,
        rng: &mut Rng,
    ) -> Vec<SurpriseObservation> {
        let mut out = Vec::new();
        for f in 0..n_firms {
            let firm: FirmId = format!("f{f:03}").as_str().into();
            let firm_effect = 0.01 * rng.normal();
            for k in 0..per_firm {
                let year = 2015 + rng.below(6) as i32;
                let quarter = rng.below(4) as u8 + 1;
                let surprise = 0.3 * rng.normal();
                let ln_ta = 4.0 + rng.normal();
                let q = 1.5 + 0.3 * rng.normal();
                let car = beta0 * surprise + firm_effect + noise * rng.normal();
                out.push(SurpriseObservation {
                    firm_id: firm.clone(),
                    event_date: NaiveDate::from_ymd_opt(year, 3, 1).unwrap()
                        + chrono::Days::new(7 * k as u64),
                    surprise,
                    ln_total_assets: ln_ta,
                    tobins_q: q,
                    fiscal_year: year,
                    fiscal_quarter: quarter,
                    car,
                });
            }
        }
        out
    }

    #[test]
    fn erc_sample_keeps_q4_information_row_for_annual() {
        use crate::evaluation::tests_support::forecast_row;
        // Four within-year rows: only the Q4-information one survives the
        // annual selection; quarterly keeps all four.
        let mut rows: Vec<_> = (1..=4u8).map(|q| forecast_row("f", 2020, q, 0.5, 2.0)).collect();
        rows.push(forecast_row("g", 2020, 4, 0.4, 1.6));
        rows[4].report_date = None; // missing rdq: dropped
        let mut zero_pred = forecast_row("h", 2020, 4, 0.4, 1.6);
        zero_pred.rnn_y = Some(0.0); // surprise undefined: dropped
        rows.push(zero_pred);

        let mut cars = HashMap::new();
        for r in &rows {
            if let Some(d) = r.report_date {
                cars.insert((r.firm_id.clone(), d), 0.01);
            }
        }
        let sample =
            select_erc_sample(&rows, crate::evaluation::ModelTag::Rnn, Frequency::Annual, &cars)
                .unwrap();
        assert_eq!(sample.len(), 1);
        assert_eq!(sample[0].fiscal_quarter, 4);
        assert_eq!(sample[0].firm_id.0, "f");

        let quarterly =
            select_erc_sample(&rows, crate::evaluation::ModelTag::Rnn, Frequency::Quarterly, &cars)
                .unwrap();
        assert_eq!(quarterly.len(), 5, "all dated announcements with nonzero predictions");
    }

    #[test]
    fn planted_erc_recovered() {
        let mut rng = Rng::new(81);
        let obs = synth_observations(80, 12, 0.06, 0.001, &mut rng);
        let result = erc_regression(&obs, Frequency::Annual).unwrap();
        let erc = result.coefficient("surprise").unwrap();
        assert!((erc.estimate - 0.06).abs() < 0.005, "erc {}", erc.estimate);
        assert_eq!(erc.stars, "***");
    }

    #[test]
    fn firm_constant_in_car_is_absorbed() {
        let mut rng = Rng::new(83);
        let obs = synth_observations(40, 10, 0.05, 0.002, &mut rng);
        let mut shifted = obs.clone();
        for o in &mut shifted {
            // Any per-firm constant must vanish under the within transform.
            let bump: f64 = (o.firm_id.0.as_bytes()[1] as f64) * 0.001;
            o.car += bump;
        }
        let a = erc_regression(&obs, Frequency::Annual).unwrap();
        let b = erc_regression(&shifted, Frequency::Annual).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert!(
                (ra.estimate - rb.estimate).abs() < 1e-10,
                "{}: {} vs {}",
                ra.name,
                ra.estimate,
                rb.estimate
            );
        }
    }

    #[test]
    fn duplication_keeps_coefficients_and_rescales_clustered_se() {
        let mut rng = Rng::new(85);
        let obs = synth_observations(30, 8, 0.04, 0.003, &mut rng);
        let doubled: Vec<SurpriseObservation> =
            obs.iter().chain(obs.iter()).cloned().collect();
        let a = erc_regression(&obs, Frequency::Annual).unwrap();
        let b = erc_regression(&doubled, Frequency::Annual).unwrap();
        let (n, g) = (obs.len() as f64, 30.0);
        let k = a.rows.len() as f64;
        let c1 = g / (g - 1.0) * (n - 1.0) / (n - k);
        let c2 = g / (g - 1.0) * (2.0 * n - 1.0) / (2.0 * n - k);
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert!((ra.estimate - rb.estimate).abs() < 1e-9, "{}", ra.name);
            let expected_ratio = (c2 / c1).sqrt();
            let got_ratio = rb.clustered_se / ra.clustered_se;
            assert!(
                (got_ratio - expected_ratio).abs() < 1e-6,
                "{}: ratio {} vs {}",
                ra.name,
                got_ratio,
                expected_ratio
            );
        }
    }

    #[test]
    fn constant_surprise_is_degenerate() {
        let mut rng = Rng::new(87);
        let mut obs = synth_observations(20, 6, 0.0, 0.001, &mut rng);
        for o in &mut obs {
            o.surprise = 0.0;
            o.car = 0.001 * rng.normal();
        }
        match erc_regression(&obs, Frequency::Annual) {
            Err(ErcError::Degenerate { names }) => {
                assert!(names.contains(&"surprise".to_string()), "{names:?}");
            }
            other => panic!("expected degenerate error, got {other:?}"),
        }
    }

    #[test]
    fn single_firm_rejected() {
        let mut rng = Rng::new(89);
        let obs = synth_observations(1, 10, 0.05, 0.001, &mut rng);
        assert!(matches!(
            erc_regression(&obs, Frequency::Annual),
            Err(ErcError::SingleCluster(1))
        ));
    }

    #[test]
    fn quarterly_run_includes_quarter_dummies() {
        let mut rng = Rng::new(91);
        let obs = synth_observations(30, 12, 0.05, 0.002, &mut rng);
        let result = erc_regression(&obs, Frequency::Quarterly).unwrap();
        for q in 1..=3 {
            assert!(result.coefficient(&format!("q{q}")).is_some());
        }
        assert!(result.coefficient("q4").is_none(), "Q4 is the base");
    }

    #[test]
    fn r_squared_non_decreasing_with_added_regressor() {
        // The quarterly design nests the annual one (adds 3 dummies), on the
        // same sample, so the within-R² cannot decrease.
        let mut rng = Rng::new(93);
        let obs = synth_observations(25, 10, 0.03, 0.004, &mut rng);
        let annual = erc_regression(&obs, Frequency::Annual).unwrap();
        let quarterly = erc_regression(&obs, Frequency::Quarterly).unwrap();
        assert!(quarterly.r_squared_within >= annual.r_squared_within - 1e-12);
    }
}
