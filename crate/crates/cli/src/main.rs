//! `cml`: command-line driver for the conelab experiments.
//!
//! Every command writes CSV with a manifest comment line first. Exit codes:
//! 0 success, 1 numerical check failed, 2 usage error, 3 I/O error.
//! `CML_THREADS` caps the worker pool.

mod args;
mod commands;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{CommandFactory, Parser};
use conelab::harness::ExperimentConfig;

use args::Cli;
use commands::{Outcome, Usage};

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<conelab::Error>() {
            return match e {
                conelab::Error::Io(_) | conelab::Error::Format(_) => EXIT_IO,
                _ => EXIT_USAGE,
            };
        }
        if cause.is::<std::io::Error>() || cause.is::<csv::Error>() {
            return EXIT_IO;
        }
        if cause.is::<Usage>() {
            return EXIT_USAGE;
        }
    }
    EXIT_USAGE
}

fn config_path(raw: &[String]) -> Option<PathBuf> {
    raw.iter().enumerate().find_map(|(i, a)| match a.strip_prefix("--config") {
        Some("") => raw.get(i + 1).map(PathBuf::from),
        Some(rest) => rest.strip_prefix('=').map(PathBuf::from),
        None => None,
    })
}

fn mentions(raw: &[String], flag: &str) -> bool {
    raw.iter().any(|a| a == flag || a.strip_prefix(flag).is_some_and(|r| r.starts_with('=')))
}

/// Inserts `--key value` pairs from the config file for flags the command
/// line leaves unset.
fn merge_config(raw: Vec<String>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&raw) else {
        return Ok(raw.into_iter().map(OsString::from).collect());
    };
    let config = ExperimentConfig::load(&path).map_err(|e| anyhow!(e).context(format!("config {}", path.display())))?;
    let cli = Cli::command();
    let Some((pos, sub)) =
        raw.iter().enumerate().skip(1).find_map(|(i, a)| cli.find_subcommand(a).map(|s| (i, s.clone())))
    else {
        return Ok(raw.into_iter().map(OsString::from).collect());
    };
    let known: Vec<String> = sub.get_arguments().filter_map(|a| a.get_long().map(str::to_string)).collect();
    let mut injected = Vec::new();
    for (key, value) in config.entries(None).into_iter().chain(config.entries(Some(sub.get_name()))) {
        let long = if known.contains(&key) { key } else { key.replace('_', "-") };
        let flag = format!("--{long}");
        if !known.contains(&long) || long == "config" || mentions(&raw, &flag) || injected.contains(&flag) {
            continue;
        }
        match value.as_str() {
            "true" => injected.push(flag),
            "false" => {}
            _ => {
                injected.push(flag);
                injected.push(value);
            }
        }
    }
    let mut out: Vec<String> = raw[..=pos].to_vec();
    out.extend(injected);
    out.extend_from_slice(&raw[pos + 1..]);
    Ok(out.into_iter().map(OsString::from).collect())
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("CML_THREADS") else {
        return Ok(());
    };
    let threads: usize = v.trim().parse().map_err(|_| Usage(format!("CML_THREADS = {v:?} is not a count")))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv = match merge_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let cli = Cli::parse_from(argv);
    let result = init_threads().and_then(|()| commands::run(&cli.command));
    match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(EXIT_FAIL),
        Err(e) => {
            eprintln!("error ({}): {e:#}", cli.command.name());
            ExitCode::from(exit_code(&e))
        }
    }
}
