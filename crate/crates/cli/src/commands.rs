//! Subcommand implementations. Each returns a typed error that maps to a
//! distinct exit code in `main`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use quartercast_core::evaluation::{
    apply_sample_filters, match_similar_firms, overall_evaluate, partition_evaluate,
    read_forecast_csv, reports_to_csv, reports_to_text, sign_prediction_report,
    sign_reports_to_csv, sign_reports_to_text, write_forecast_csv, ForecastRow, Frequency,
    ModelTag, SliceKey,
};
use quartercast_core::event_study::{
    erc_regression, erc_to_csv, erc_to_text, fit_market_model, select_erc_sample,
};
use quartercast_core::panel::{
    load_market_panel, load_quarter_panel, write_market_panel_csv, write_quarter_panel_csv,
    DailyMarketRecord, FirmId, QuarterRecord,
};
use quartercast_core::pipeline::{
    build_forecast_rows, build_window_partitions, build_window_partitions_with_stats,
    fit_benchmark, prepare_and_split, PreparedPanel,
};
use quartercast_core::forecaster::{load_bundle, save_bundle, train_ensemble};
use quartercast_core::synth::generate_panel;

use crate::config::RunConfig;

#[derive(Debug)]
pub enum CommandError {
    Usage(String),
    Io(String),
    Schema(String),
    Data(String),
    Locked(String),
}

impl CommandError {
    pub fn code(&self) -> i32 {
        match self {
            CommandError::Usage(_) => 2,
            CommandError::Io(_) => 3,
            CommandError::Schema(_) => 4,
            CommandError::Data(_) => 5,
            CommandError::Locked(_) => 6,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CommandError::Usage(_) => "usage",
            CommandError::Io(_) => "io",
            CommandError::Schema(_) => "schema",
            CommandError::Data(_) => "data",
            CommandError::Locked(_) => "locked",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CommandError::Usage(m)
            | CommandError::Io(m)
            | CommandError::Schema(m)
            | CommandError::Data(m)
            | CommandError::Locked(m) => m,
        }
    }
}

/// Exclusive lock on an output directory; released on drop.
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(dir: &Path) -> Result<OutputLock, CommandError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CommandError::Io(format!("cannot create {}: {e}", dir.display())))?;
        let path = dir.join(".qc.lock");
        match std::fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(OutputLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CommandError::Locked(
                format!("output directory {} is locked by another run", dir.display()),
            )),
            Err(e) => Err(CommandError::Io(format!("cannot lock {}: {e}", dir.display()))),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CommandError> {
    std::fs::write(path, contents)
        .map_err(|e| CommandError::Io(format!("cannot write {}: {e}", path.display())))
}

fn load_panel(config: &RunConfig, path: &Path) -> Result<Vec<QuarterRecord>, CommandError> {
    let (records, report) = load_quarter_panel(path, &config.schema).map_err(map_schema)?;
    if !report.row_errors.is_empty() {
        eprintln!(
            "note: {} of {} rows rejected while loading {}",
            report.row_errors.len(),
            report.rows_seen,
            path.display()
        );
        for err in report.row_errors.iter().take(5) {
            eprintln!("  line {}: {}", err.line, err.message);
        }
    }
    Ok(records)
}

fn load_market(config: &RunConfig, path: &Path) -> Result<Vec<DailyMarketRecord>, CommandError> {
    let (records, _) = load_market_panel(path, &config.market_schema).map_err(map_schema)?;
    Ok(records)
}

fn map_schema(err: quartercast_core::panel::SchemaError) -> CommandError {
    use quartercast_core::panel::SchemaError;
    match err {
        SchemaError::Io { .. } => CommandError::Io(err.to_string()),
        SchemaError::Csv { .. } | SchemaError::MissingColumn { .. } => {
            CommandError::Schema(err.to_string())
        }
    }
}

pub fn cmd_synth(config: &RunConfig, out_dir: &Path) -> Result<(), CommandError> {
    let _lock = OutputLock::acquire(out_dir)?;
    let panel = generate_panel(&config.synth);
    write_file(&out_dir.join("panel.csv"), &write_quarter_panel_csv(&panel.quarters))?;
    write_file(&out_dir.join("market.csv"), &write_market_panel_csv(&panel.market))?;
    let truth = serde_json::json!({
        "format_version": 1,
        "planted_erc": panel.truth.planted_erc,
        "analyst_bias_mpd": panel.truth.analyst_bias_mpd,
        "n_events": panel.truth.events.len(),
        "seed": config.synth.seed,
    });
    write_file(&out_dir.join("truth.json"), &serde_json::to_string_pretty(&truth).unwrap())?;
    println!(
        "synth: wrote {} quarter records and {} market days to {}",
        panel.quarters.len(),
        panel.market.len(),
        out_dir.display()
    );
    Ok(())
}

fn prepare(config: &RunConfig, panel_path: &Path) -> Result<PreparedPanel, CommandError> {
    let raw = load_panel(config, panel_path)?;
    prepare_and_split(raw, config.fractions).map_err(|e| CommandError::Data(e.to_string()))
}

pub fn cmd_ingest(config: &RunConfig, panel_path: &Path, out_dir: &Path) -> Result<(), CommandError> {
    let _lock = OutputLock::acquire(out_dir)?;
    let prepared = prepare(config, panel_path)?;
    write_file(&out_dir.join("clean_log.csv"), &prepared.clean_log.render_csv())?;
    write_file(&out_dir.join("clean_log.txt"), &prepared.clean_log.render_text())?;
    write_file(&out_dir.join("train.csv"), &write_quarter_panel_csv(&prepared.split.train))?;
    write_file(
        &out_dir.join("validation.csv"),
        &write_quarter_panel_csv(&prepared.split.validation),
    )?;
    write_file(&out_dir.join("test.csv"), &write_quarter_panel_csv(&prepared.split.test))?;
    println!(
        "ingest: {} records after cleaning ({} removed); split {}/{}/{}; boundaries {} and {}",
        prepared.clean_log.output_count,
        prepared.clean_log.removed_total(),
        prepared.split.train.len(),
        prepared.split.validation.len(),
        prepared.split.test.len(),
        prepared.split.boundaries.0,
        prepared.split.boundaries.1
    );
    Ok(())
}

pub fn cmd_train(
    config: &RunConfig,
    panel_path: &Path,
    market_path: &Path,
    model_dir: &Path,
) -> Result<(), CommandError> {
    let _lock = OutputLock::acquire(model_dir)?;
    let prepared = prepare(config, panel_path)?;
    let market = load_market(config, market_path)?;
    let partitions = build_window_partitions(&prepared, &market)
        .map_err(|e| CommandError::Data(e.to_string()))?;
    println!(
        "train: windows train {} / validation {} / test {} (skipped: {} no history, {} no market, {} incomplete year)",
        partitions.train.len(),
        partitions.validation.len(),
        partitions.test.len(),
        partitions.log.skipped_no_history,
        partitions.log.skipped_no_market,
        partitions.log.skipped_incomplete_year,
    );
    let model = train_ensemble(
        &config.train,
        &partitions.train,
        &partitions.validation,
        &partitions.stats,
    )
    .map_err(|e| CommandError::Data(e.to_string()))?;
    for report in &model.manifest.reports {
        println!(
            "train: member seed {} stopped after epoch {} (returned epoch {}), final val {:.6}",
            report.seed,
            report.epochs_run,
            report.returned_epoch,
            report.val_scores.last().copied().unwrap_or(f64::NAN)
        );
    }
    save_bundle(&model, model_dir).map_err(|e| CommandError::Io(e.to_string()))?;
    println!("train: bundle saved to {}", model_dir.display());
    Ok(())
}

pub fn cmd_predict(
    config: &RunConfig,
    panel_path: &Path,
    market_path: &Path,
    model_dir: &Path,
    out_dir: &Path,
) -> Result<(), CommandError> {
    let _lock = OutputLock::acquire(out_dir)?;
    let model = load_bundle(model_dir).map_err(|e| CommandError::Io(e.to_string()))?;
    let prepared = prepare(config, panel_path)?;
    let market = load_market(config, market_path)?;
    let partitions = build_window_partitions_with_stats(&prepared, &market, &model.stats)
        .map_err(|e| CommandError::Data(e.to_string()))?;
    let benchmark = fit_benchmark(&prepared).map_err(|e| CommandError::Data(e.to_string()))?;
    let rows = build_forecast_rows(
        &prepared.records,
        &market,
        &model,
        &benchmark,
        &partitions.test,
    );
    if rows.is_empty() {
        return Err(CommandError::Data("no test-partition forecasts produced".into()));
    }
    write_file(&out_dir.join("predictions.csv"), &write_forecast_csv(&rows))?;
    println!("predict: wrote {} forecast rows to {}", rows.len(), out_dir.display());
    Ok(())
}

const NON_ANALYST: [ModelTag; 3] = [ModelTag::Rnn, ModelTag::Regression, ModelTag::RandomWalk];

fn one_slice(
    config: &RunConfig,
    rows: &[ForecastRow],
    slice: &str,
    freq: Frequency,
) -> Result<Vec<(String, String)>, CommandError> {
    let freq_tag = freq.as_str();
    let mut files = Vec::new();
    let mut emit = |name: String, csv: String, text: String| {
        files.push((format!("{name}.csv"), csv));
        files.push((format!("{name}.txt"), text));
    };
    let filtered = |models: &[ModelTag]| {
        apply_sample_filters(rows, models, freq, config.trim, config.penny_threshold)
            .map_err(|e| CommandError::Data(format!("{slice} ({freq_tag}): {e}")))
    };
    match slice {
        "overall" => {
            let rows = filtered(&ModelTag::ALL)?;
            let reports = overall_evaluate(&rows, &ModelTag::ALL, freq, ModelTag::Rnn);
            emit(
                format!("overall_{freq_tag}"),
                reports_to_csv(&reports),
                reports_to_text(&format!("Overall performance ({freq_tag})"), &reports),
            );
            let sign = sign_prediction_report(&rows, &ModelTag::ALL, freq, config.sign_threshold);
            emit(
                format!("sign_{freq_tag}"),
                sign_reports_to_csv(&sign),
                sign_reports_to_text(&format!("Sign prediction ({freq_tag})"), &sign),
            );
        }
        "quarter" | "size" | "industry" | "year" | "covid" => {
            let key = match slice {
                "quarter" => SliceKey::Quarter,
                "size" => SliceKey::SizeDecile,
                "industry" => SliceKey::Industry,
                "year" => SliceKey::Year,
                _ => SliceKey::Covid(config.covid_date),
            };
            let rows = filtered(&ModelTag::ALL)?;
            let reports = partition_evaluate(&rows, &key, &ModelTag::ALL, freq);
            emit(
                format!("{slice}_{freq_tag}"),
                reports_to_csv(&reports),
                reports_to_text(&format!("Performance per {slice} ({freq_tag})"), &reports),
            );
        }
        "coverage" => {
            let rows = filtered(&NON_ANALYST)?;
            let reports = partition_evaluate(&rows, &SliceKey::Coverage, &NON_ANALYST, freq);
            emit(
                format!("coverage_{freq_tag}"),
                reports_to_csv(&reports),
                reports_to_text(&format!("Covered vs uncovered ({freq_tag})"), &reports),
            );
        }
        "matched" => {
            let rows = filtered(&[ModelTag::Rnn])?;
            let (covered, uncovered): (Vec<ForecastRow>, Vec<ForecastRow>) =
                rows.into_iter().partition(|r| r.covered);
            let report = match_similar_firms(
                &covered,
                &uncovered,
                config.match_limit,
                ModelTag::Rnn,
                freq,
            )
            .map_err(|e| CommandError::Data(format!("matched ({freq_tag}): {e}")))?;
            let mut csv = String::from("industry,n,mapd_covered_pct,mapd_uncovered_pct,wilcoxon_p\n");
            let mut text = format!(
                "Matched covered vs uncovered ({freq_tag})\n{:<28} {:>6} {:>12} {:>12} {:>10}\n",
                "Industry", "N", "Covered", "Uncovered", "P"
            );
            for cell in report.per_industry.iter().chain(std::iter::once(&report.total)) {
                csv.push_str(&format!(
                    "{},{},{:.4},{:.4},{}\n",
                    cell.industry,
                    cell.n,
                    cell.mapd_covered_pct,
                    cell.mapd_uncovered_pct,
                    cell.wilcoxon_p.map(|p| format!("{p:.6}")).unwrap_or_default()
                ));
                text.push_str(&format!(
                    "{:<28} {:>6} {:>11.2}% {:>11.2}% {:>10}\n",
                    cell.industry,
                    cell.n,
                    cell.mapd_covered_pct,
                    cell.mapd_uncovered_pct,
                    cell.wilcoxon_p.map(|p| format!("{p:.4}")).unwrap_or_default()
                ));
            }
            emit(format!("matched_{freq_tag}"), csv, text);
        }
        other => {
            return Err(CommandError::Usage(format!(
                "unknown slice {other:?}; expected overall|quarter|size|industry|year|covid|coverage|matched"
            )))
        }
    }
    Ok(files)
}

pub fn cmd_evaluate(
    config: &RunConfig,
    predictions_path: &Path,
    out_dir: &Path,
    freq: Frequency,
    slice: Option<&str>,
) -> Result<Vec<String>, CommandError> {
    let _lock = OutputLock::acquire(out_dir)?;
    let rows = read_forecast_csv(predictions_path).map_err(|e| match e {
        quartercast_core::evaluation::ForecastIoError::Io { .. } => CommandError::Io(e.to_string()),
        _ => CommandError::Schema(e.to_string()),
    })?;
    let slices: Vec<&str> = match slice {
        Some(s) => vec![s],
        None => vec!["overall", "quarter", "size", "industry", "year", "covid", "coverage", "matched"],
    };
    let mut written = Vec::new();
    for s in slices {
        match one_slice(config, &rows, s, freq) {
            Ok(files) => {
                for (name, contents) in files {
                    write_file(&out_dir.join(&name), &contents)?;
                    written.push(name);
                }
            }
            // A slice with no usable rows (e.g. no matched pairs on a tiny
            // panel) only aborts the run when it was requested explicitly.
            Err(e) if slice.is_none() && matches!(e, CommandError::Data(_)) => {
                eprintln!("note: skipping slice {s}: {}", e.message());
            }
            Err(e) => return Err(e),
        }
    }
    println!("evaluate: wrote {} report files to {}", written.len(), out_dir.display());
    Ok(written)
}

/// Fit per-firm market models at the announcement dates and return the CAR
/// of each (firm, event date).
fn car_map(
    rows: &[ForecastRow],
    market: &[DailyMarketRecord],
) -> HashMap<(FirmId, chrono::NaiveDate), f64> {
    let mut events_by_firm: HashMap<&FirmId, Vec<chrono::NaiveDate>> = HashMap::new();
    for r in rows {
        if let Some(d) = r.report_date {
            events_by_firm.entry(&r.firm_id).or_default().push(d);
        }
    }
    let mut days_by_firm: HashMap<&FirmId, Vec<DailyMarketRecord>> = HashMap::new();
    for d in market {
        days_by_firm.entry(&d.firm_id).or_default().push(d.clone());
    }
    let mut cars = HashMap::new();
    for (firm, events) in events_by_firm {
        let Some(days) = days_by_firm.get(firm) else { continue };
        match fit_market_model(firm, days, &events, 1) {
            Ok(fit) => {
                for event in &fit.events {
                    for date in &event.event_dates {
                        cars.insert((firm.clone(), *date), event.car);
                    }
                }
            }
            Err(e) => eprintln!("note: market model skipped for {firm}: {e}"),
        }
    }
    cars
}

pub fn cmd_erc(
    config: &RunConfig,
    predictions_path: &Path,
    market_path: &Path,
    out_dir: &Path,
    freq: Frequency,
) -> Result<Vec<String>, CommandError> {
    let _lock = OutputLock::acquire(out_dir)?;
    let rows = read_forecast_csv(predictions_path).map_err(|e| CommandError::Schema(e.to_string()))?;
    let market = load_market(config, market_path)?;
    let cars = car_map(&rows, &market);
    if cars.is_empty() {
        return Err(CommandError::Data("no abnormal returns could be estimated".into()));
    }
    let mut written = Vec::new();
    for model in ModelTag::ALL {
        let sample = match select_erc_sample(&rows, model, freq, &cars) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("note: erc sample empty for {}: {e}", model.as_str());
                continue;
            }
        };
        match erc_regression(&sample, freq) {
            Ok(result) => {
                let base = format!("erc_{}_{}", freq.as_str(), model.as_str());
                write_file(&out_dir.join(format!("{base}.csv")), &erc_to_csv(&result))?;
                write_file(
                    &out_dir.join(format!("{base}.txt")),
                    &erc_to_text(
                        &format!("Earnings response ({}, {})", freq.as_str(), model.as_str()),
                        &result,
                    ),
                )?;
                written.push(format!("{base}.csv"));
                written.push(format!("{base}.txt"));
            }
            Err(e) => eprintln!("note: erc regression failed for {}: {e}", model.as_str()),
        }
    }
    if written.is_empty() {
        return Err(CommandError::Data("no ERC regression could be estimated".into()));
    }
    println!("erc: wrote {} files to {}", written.len(), out_dir.display());
    Ok(written)
}

pub fn cmd_report(
    config: &RunConfig,
    predictions_path: &Path,
    market_path: &Path,
    out_dir: &Path,
) -> Result<(), CommandError> {
    let mut files = Vec::new();
    for freq in [Frequency::Annual, Frequency::Quarterly] {
        let sub = out_dir.join("tables");
        files.extend(cmd_evaluate(config, predictions_path, &sub, freq, None)?);
        let erc_dir = out_dir.join("erc");
        match cmd_erc(config, predictions_path, market_path, &erc_dir, freq) {
            Ok(erc_files) => files.extend(erc_files),
            Err(e) => eprintln!("note: erc skipped ({})", e.message()),
        }
    }
    files.sort();
    let manifest = serde_json::json!({
        "format_version": 1,
        "config_hash": config.config_hash,
        "seed": config.seed,
        "constants": {
            "penny_threshold": config.penny_threshold,
            "trim": config.trim,
            "sign_threshold": config.sign_threshold,
            "covid_date": config.covid_date.to_string(),
            "match_limit": config.match_limit,
        },
        "files": files,
    });
    write_file(&out_dir.join("manifest.json"), &serde_json::to_string_pretty(&manifest).unwrap())?;
    println!("report: bundle complete at {}", out_dir.display());
    Ok(())
}
