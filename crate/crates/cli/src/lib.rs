//! `stylespace` command line: one subcommand per pipeline stage.
//!
//! Every subcommand accepts `--seed` (default 0) and `--config FILE`. A config
//! file holds `key = value` lines whose keys are flag names (`lambda_kl` or
//! `lambda-kl`); flags given on the command line override file values. On
//! success a single `key=value ...` summary line goes to stdout.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

mod commands;

use clap::{CommandFactory, FromArgMatches};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub use commands::Cli;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] stylespace::Error),
    #[error(transparent)]
    Service(#[from] annotate::ApiError),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(stylespace::Error::Numeric(_)) => 3,
            CliError::Service(annotate::ApiError::Core(stylespace::Error::Numeric(_))) => 3,
            _ => 2,
        }
    }
}

pub(crate) fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::File {
        path: path.to_path_buf(),
        source,
    }
}

/// One `key=value` pair of the summary line.
pub type Summary = Vec<(&'static str, String)>;

fn init_logging() {
    let env = env_logger::Env::new().filter_or("STYLESPACE_LOG", "info");
    // Repeated calls (tests run many commands in one process) keep the first logger.
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Turns the lines of a config file into flags.
fn config_flags(text: &str) -> Result<Vec<OsString>, CliError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", i + 1)))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(CliError::Usage(format!(
                "config line {}: invalid key {:?}",
                i + 1,
                k.trim()
            )));
        }
        out.push(format!("--{key}").into());
        out.push(v.trim().into());
    }
    Ok(out)
}

/// Inserts the flags of `--config FILE` (if any) right after the subcommand,
/// ahead of the explicit flags so those win.
fn expand_config(mut argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut file = None;
    for (i, a) in argv.iter().enumerate().skip(1) {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            file = argv.get(i + 1).map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            file = Some(PathBuf::from(p));
        }
    }
    let Some(file) = file else { return Ok(argv) };
    let text = std::fs::read_to_string(&file).map_err(file_err(&file))?;
    let flags = config_flags(&text)?;
    let cmd = Cli::command();
    let names: Vec<&str> = cmd.get_subcommands().map(|c| c.get_name()).collect();
    let at = argv
        .iter()
        .position(|a| a.to_str().is_some_and(|s| names.contains(&s)))
        .map_or(argv.len(), |i| i + 1);
    argv.splice(at..at, flags);
    Ok(argv)
}

fn format_summary(summary: &Summary) -> String {
    summary
        .iter()
        .map(|(k, v)| {
            if v.contains(char::is_whitespace) || v.is_empty() {
                format!("{k}={v:?}")
            } else {
                format!("{k}={v}")
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Parses `argv` (program name first), runs the subcommand and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    init_logging();
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match expand_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let matches = match Cli::command().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return 1;
        }
    };
    match commands::dispatch(cli) {
        Ok(summary) => {
            println!("{}", format_summary(&summary));
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
