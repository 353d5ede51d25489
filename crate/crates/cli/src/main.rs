//! quartercast: earnings forecasting workflow over CSV panels.
//!
//! Subcommands: synth | ingest | train | predict | evaluate | erc | report.
//! Errors print a machine-readable JSON line on stderr and exit with a
//! distinct code per error class (2 usage, 3 io, 4 schema, 5 data, 6 lock).

mod args;
mod commands;
mod config;

use std::path::Path;
use std::process::ExitCode;

use args::{Args, UsageError};
use commands::CommandError;
use config::RunConfig;
use quartercast_core::evaluation::Frequency;

const USAGE: &str = "usage: quartercast <subcommand> [flags]

subcommands:
  synth     --out DIR [--seed N] [--config FILE]
  ingest    --panel FILE --out DIR [--config FILE]
  train     --panel FILE --market FILE --model-dir DIR [--seed N] [--config FILE]
  predict   --panel FILE --market FILE --model-dir DIR --out DIR [--config FILE]
  evaluate  --predictions FILE --out DIR [--frequency annual|quarterly]
            [--slice overall|quarter|size|industry|year|covid|coverage|matched] [--config FILE]
  erc       --predictions FILE --market FILE --out DIR [--frequency annual|quarterly] [--config FILE]
  report    --predictions FILE --market FILE --out DIR [--config FILE]

common flags: --config FILE (flat key = value), --seed N (overrides config)
environment:  QC_THREADS caps internal parallelism";

fn emit_error(kind: &str, message: &str) {
    eprintln!(
        "{}",
        serde_json::json!({ "error": { "kind": kind, "message": message } })
    );
}

fn frequency_of(args: &Args) -> Result<Frequency, UsageError> {
    match args.get("frequency").unwrap_or("annual") {
        "annual" => Ok(Frequency::Annual),
        "quarterly" => Ok(Frequency::Quarterly),
        other => Err(UsageError(format!(
            "unknown frequency {other:?}; expected annual or quarterly"
        ))),
    }
}

fn load_config(args: &Args) -> Result<RunConfig, CommandError> {
    let mut config = RunConfig::load(args.get("config").map(Path::new))
        .map_err(|e| CommandError::Usage(e.0))?;
    if let Some(seed) = args.get("seed") {
        let seed: u64 = seed
            .parse()
            .map_err(|_| CommandError::Usage(format!("--seed expects an integer, got {seed:?}")))?;
        config.set("seed", &seed.to_string()).map_err(|e| CommandError::Usage(e.0))?;
        config.rehash();
    }
    Ok(config)
}

fn dispatch(argv: &[String]) -> Result<(), CommandError> {
    let Some(subcommand) = argv.first() else {
        return Err(CommandError::Usage(format!("no subcommand given\n{USAGE}")));
    };
    let rest = &argv[1..];
    let usage = |e: UsageError| CommandError::Usage(e.0);

    match subcommand.as_str() {
        "synth" => {
            let args = Args::parse(rest, &["out", "seed", "config"]).map_err(usage)?;
            let config = load_config(&args)?;
            commands::cmd_synth(&config, Path::new(args.require("out").map_err(usage)?))
        }
        "ingest" => {
            let args = Args::parse(rest, &["panel", "out", "config", "seed"]).map_err(usage)?;
            let config = load_config(&args)?;
            commands::cmd_ingest(
                &config,
                Path::new(args.require("panel").map_err(usage)?),
                Path::new(args.require("out").map_err(usage)?),
            )
        }
        "train" => {
            let args =
                Args::parse(rest, &["panel", "market", "model-dir", "seed", "config"]).map_err(usage)?;
            let config = load_config(&args)?;
            commands::cmd_train(
                &config,
                Path::new(args.require("panel").map_err(usage)?),
                Path::new(args.require("market").map_err(usage)?),
                Path::new(args.require("model-dir").map_err(usage)?),
            )
        }
        "predict" => {
            let args = Args::parse(rest, &["panel", "market", "model-dir", "out", "seed", "config"])
                .map_err(usage)?;
            let config = load_config(&args)?;
            commands::cmd_predict(
                &config,
                Path::new(args.require("panel").map_err(usage)?),
                Path::new(args.require("market").map_err(usage)?),
                Path::new(args.require("model-dir").map_err(usage)?),
                Path::new(args.require("out").map_err(usage)?),
            )
        }
        "evaluate" => {
            let args = Args::parse(rest, &["predictions", "out", "frequency", "slice", "config", "seed"])
                .map_err(usage)?;
            let config = load_config(&args)?;
            let freq = frequency_of(&args).map_err(usage)?;
            commands::cmd_evaluate(
                &config,
                Path::new(args.require("predictions").map_err(usage)?),
                Path::new(args.require("out").map_err(usage)?),
                freq,
                args.get("slice"),
            )
            .map(|_| ())
        }
        "erc" => {
            let args = Args::parse(rest, &["predictions", "market", "out", "frequency", "config", "seed"])
                .map_err(usage)?;
            let config = load_config(&args)?;
            let freq = frequency_of(&args).map_err(usage)?;
            commands::cmd_erc(
                &config,
                Path::new(args.require("predictions").map_err(usage)?),
                Path::new(args.require("market").map_err(usage)?),
                Path::new(args.require("out").map_err(usage)?),
                freq,
            )
            .map(|_| ())
        }
        "report" => {
            let args =
                Args::parse(rest, &["predictions", "market", "out", "config", "seed"]).map_err(usage)?;
            let config = load_config(&args)?;
            commands::cmd_report(
                &config,
                Path::new(args.require("predictions").map_err(usage)?),
                Path::new(args.require("market").map_err(usage)?),
                Path::new(args.require("out").map_err(usage)?),
            )
        }
        "help" | "--help" | "-h" => {
            println!("{USAGE}");
            Ok(())
        }
        other => Err(CommandError::Usage(format!("unknown subcommand {other:?}\n{USAGE}"))),
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    match dispatch(&argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            emit_error(e.kind(), e.message());
            ExitCode::from(e.code() as u8)
        }
    }
}
