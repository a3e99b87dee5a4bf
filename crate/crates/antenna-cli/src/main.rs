//! `antenna` — simulate and analyze a planar dielectric antenna around a
//! single vertical dipole emitter.
//!
//! Usage: `antenna <command> [--config FILE] [--key value]...`
//!
//! Commands: pattern, map, optimize, bfp, photo-sim, photo-fit, budget.
//! Exit codes: 0 success, 2 parse error, 3 validation error, 4 computation
//! error, 5 i/o error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use config::{CliError, CliResult, RunConfig};

const USAGE: &str = "usage: antenna <pattern|map|optimize|bfp|photo-sim|photo-fit|budget> \
[--config FILE] [--key value]...\nenvironment: ANTENNA_THREADS caps the worker count";

fn parse_args(args: &[String]) -> CliResult<RunConfig> {
    let command = args
        .first()
        .ok_or_else(|| CliError::Parse(format!("missing command\n{USAGE}")))?;
    if command == "--help" || command == "-h" || command == "help" {
        println!("{USAGE}");
        std::process::exit(0);
    }
    let mut config_path: Option<PathBuf> = None;
    let mut overrides: Vec<(String, String)> = Vec::new();
    let mut i = 1;
    while i < args.len() {
        let arg = &args[i];
        let key = arg
            .strip_prefix("--")
            .ok_or_else(|| CliError::Parse(format!("expected '--key value', got '{arg}'")))?;
        let (key, value) = if let Some((k, v)) = key.split_once('=') {
            (k.to_string(), v.to_string())
        } else {
            i += 1;
            let value = args
                .get(i)
                .ok_or_else(|| CliError::Parse(format!("flag '--{key}' is missing its value")))?;
            (key.to_string(), value.clone())
        };
        if key == "config" {
            config_path = Some(PathBuf::from(value));
        } else {
            overrides.push((key, value));
        }
        i += 1;
    }
    RunConfig::assemble(command, config_path.as_deref(), &overrides)
}

fn configure_threads() {
    if let Ok(raw) = std::env::var("ANTENNA_THREADS") {
        if let Ok(n) = raw.parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn run() -> CliResult<()> {
    configure_threads();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cfg = parse_args(&args)?;
    let artifacts = match cfg.command.as_str() {
        "pattern" => commands::run_pattern(&cfg)?,
        "map" => commands::run_map(&cfg)?,
        "optimize" => commands::run_optimize(&cfg)?,
        "bfp" => commands::run_bfp(&cfg)?,
        "photo-sim" => commands::run_photo_sim(&cfg)?,
        "photo-fit" => commands::run_photo_fit(&cfg)?,
        "budget" => commands::run_budget(&cfg)?,
        other => return Err(CliError::Parse(format!("unknown command '{other}'\n{USAGE}"))),
    };
    let manifest = output::write_outputs(&artifacts, cfg.out_dir())?;
    println!("wrote {} file(s), manifest at {}", artifacts.len(), manifest.display());
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("antenna: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
