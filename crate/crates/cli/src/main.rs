//! `survsel`: bootstrap-stabilized variable selection, survival trees and
//! forests on right-censored data.
//!
//! Every command reads a CSV (`--data`, with `--time-col`/`--event-col`),
//! writes its artifacts to `--out` and echoes the effective configuration
//! to `config.txt` there. Settings come from `--config FILE` (`key = value`
//! lines, keys named like the long flags) overridden by flags.
//!
//! Exit status: 0 on success, 1 on invalid input or configuration, 2 when
//! the computation fails.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Arg, ArgAction, ArgMatches, Command};

use config::{Lookup, Settings};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Computation(String),
}

/// Input problems exit 1, numerical ones 2.
pub fn core_err(e: survsel::Error) -> CliError {
    use survsel::Error as E;
    match e {
        E::Io { .. } | E::Csv(_) | E::MissingColumn(_) | E::Validation { .. } | E::InvalidInput(_) => {
            CliError::Validation(e.to_string())
        }
        _ => CliError::Computation(e.to_string()),
    }
}

const COMMON_KEYS: &[&str] = &["data", "time-col", "event-col", "seed", "out"];

/// Keys that steer execution without changing results; never echoed.
const RUNTIME_KEYS: &[&str] = &["workers"];

fn help(key: &str) -> &'static str {
    match key {
        "data" => "input CSV",
        "time-col" => "name of the time column [default: time]",
        "event-col" => "name of the event column (1/0, true/false) [default: event]",
        "seed" => "random seed; generated and printed when absent",
        "out" => "output directory",
        "workers" => "worker threads [default: all cores]",
        "method" => "method name; for evaluate, repeatable `name:key=value,...`",
        "replicates" => "bootstrap replicates [default: 100 for bss/bls/brls, 1000 for bnls]",
        "lambda" => "penalty strength (Lagrangian: larger admits fewer covariates)",
        "lambda-grid" => "penalty grid `a:b:k`, k evenly spaced values from a to b",
        "alpha" => "randomized Lasso weight value in (0, 1) [default: 0.5]",
        "pw" => "probability of the weight alpha [default: 0.5]",
        "kappa" => "inclusion frequency threshold for the final refit",
        "tol" => "convergence tolerance of penalized fits [default: 1e-6]",
        "min-leaf" => "minimum records per leaf [default: 20, rsf 3]",
        "min-events" => "minimum distinct event times per daughter [default: 3]",
        "max-depth" => "maximum tree depth",
        "cp" => "complexity parameter; skips cross-validation",
        "folds" => "cross-validation folds for cp [default: 10]",
        "ntree" => "trees in the forest [default: 1000]",
        "mtry" => "covariates tried per node [default: ceil(sqrt(p))]",
        "vimp" => "write variable importance (true/false) [default: true]",
        "splits" => "train/test splits [default: 30]",
        "test-fraction" => "share of records held out [default: 0.33]",
        _ => "",
    }
}

fn subcommand(name: &'static str, about: &'static str, keys: &'static [&'static str]) -> Command {
    let mut cmd = Command::new(name).about(about).arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .help("key = value settings; flags take precedence"),
    );
    for &k in COMMON_KEYS.iter().chain(RUNTIME_KEYS).chain(keys) {
        let mut arg = Arg::new(k).long(k).value_name("VALUE").help(help(k));
        if name == "evaluate" && k == "method" {
            arg = arg.action(ArgAction::Append);
        }
        cmd = cmd.arg(arg);
    }
    cmd
}

fn cli() -> Command {
    Command::new("survsel")
        .about("Stable variable selection and prediction for right-censored survival data")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .subcommand(subcommand(
            "select",
            "Bootstrap inclusion frequencies (bss, bls, brls) and the refit at kappa",
            commands::SELECT_KEYS,
        ))
        .subcommand(subcommand(
            "fit",
            "Grow a survival tree, a stabilized tree or a random survival forest",
            commands::FIT_KEYS,
        ))
        .subcommand(subcommand(
            "evaluate",
            "Compare methods by 1 - C over repeated train/test splits",
            commands::EVALUATE_KEYS,
        ))
        .subcommand(subcommand(
            "curve",
            "Inclusion frequencies along a penalty grid (bls, brls)",
            commands::CURVE_KEYS,
        ))
}

fn flag_settings(m: &ArgMatches, keys: &[&str]) -> Settings {
    let mut s = Settings::default();
    for &k in keys {
        if let Some(v) = m.get_many::<String>(k) {
            s.set(k, v.cloned().collect());
        }
    }
    s
}

fn fresh_seed() -> u64 {
    let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos() as u64);
    survsel::rng::derive_seed(nanos, std::process::id() as u64)
}

fn write_echo(out: &Path, common: &[(String, String)], echo: &[(String, String)]) -> Result<(), CliError> {
    let mut text = String::new();
    for (k, v) in common.iter().chain(echo) {
        text.push_str(&format!("{k} = {v}\n"));
    }
    let path = out.join("config.txt");
    std::fs::write(&path, text).map_err(|e| CliError::Computation(format!("cannot write {}: {e}", path.display())))
}

fn run() -> Result<(), CliError> {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                Err(CliError::Validation("invalid arguments".into()))
            } else {
                Ok(())
            };
        }
    };
    let (name, m) = matches.subcommand().expect("subcommand required");
    let command_keys = match name {
        "select" => commands::SELECT_KEYS,
        "fit" => commands::FIT_KEYS,
        "evaluate" => commands::EVALUATE_KEYS,
        _ => commands::CURVE_KEYS,
    };
    let keys: Vec<&str> = COMMON_KEYS.iter().chain(RUNTIME_KEYS).chain(command_keys).copied().collect();
    let mut settings = match m.get_one::<String>("config") {
        Some(path) => Settings::load(Path::new(path))?,
        None => Settings::default(),
    };
    settings.check_keys(&keys)?;
    settings.override_with(flag_settings(m, &keys));
    if name != "evaluate" && settings.all("method").len() > 1 {
        return Err(CliError::Validation("method: given more than once".into()));
    }

    if let Some(w) = settings.opt::<usize>("workers")? {
        if w == 0 {
            return Err(CliError::Validation("workers: must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Computation(format!("cannot start worker pool: {e}")))?;
    }
    let data: PathBuf = settings.required("data")?;
    let out: PathBuf = settings.required("out")?;
    let time_col: String = settings.or("time-col", "time".to_string())?;
    let event_col: String = settings.or("event-col", "event".to_string())?;
    let seed = match settings.opt::<u64>("seed")? {
        Some(s) => s,
        None => {
            let s = fresh_seed();
            eprintln!("seed = {s}");
            s
        }
    };
    let ds = survsel::data::load_csv(&data, &time_col, &event_col).map_err(core_err)?;
    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::Computation(format!("cannot create {}: {e}", out.display())))?;

    let echo = match name {
        "select" => commands::select(&settings, &ds, seed, &out, false)?,
        "curve" => commands::select(&settings, &ds, seed, &out, true)?,
        "fit" => commands::fit(&settings, &ds, seed, &out)?,
        _ => commands::evaluate(&settings, &ds, seed, &out)?,
    };
    let common = vec![
        ("data".to_string(), data.display().to_string()),
        ("time-col".to_string(), time_col),
        ("event-col".to_string(), event_col),
        ("seed".to_string(), seed.to_string()),
    ];
    write_echo(&out, &common, &echo)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Validation(_) => ExitCode::from(1),
                CliError::Computation(_) => ExitCode::from(2),
            }
        }
    }
}
