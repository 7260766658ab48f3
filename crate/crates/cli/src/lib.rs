//! Command-line front end for functional partial quantile regression.

pub mod args;
pub mod commands;
pub mod curves;
pub mod error;
pub mod model_file;

use std::ffi::OsString;
use std::path::Path;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::commands::{bench, evaluate, fit, forecast, mc, simulate};
use crate::error::{usage, CliError, CliResult};

/// Environment variable fixing the number of worker threads.
pub const WORKERS_ENV: &str = "FPQR_WORKERS";

/// Finds the `--config` value and the position of the subcommand.
fn scan(args: &[String]) -> (Option<String>, Option<usize>) {
    let mut config = None;
    let mut sub = None;
    let mut i = 1;
    while i < args.len() {
        let a = &args[i];
        if a == "--config" {
            config = args.get(i + 1).cloned();
            i += 2;
            continue;
        }
        if let Some(v) = a.strip_prefix("--config=") {
            config = Some(v.to_string());
        } else if sub.is_none() && !a.starts_with('-') {
            sub = Some(i);
        }
        i += 1;
    }
    (config, sub)
}

fn toml_scalar(v: &toml::Value) -> Option<String> {
    match v {
        toml::Value::String(s) => Some(s.clone()),
        toml::Value::Integer(i) => Some(i.to_string()),
        toml::Value::Float(f) => Some(f.to_string()),
        _ => None,
    }
}

/// Turns the table for `command` into flags.
pub fn config_flags(path: &Path, command: &str) -> CliResult<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let doc: toml::Table = text.parse().map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let Some(entry) = doc.get(command) else {
        return Ok(Vec::new());
    };
    let Some(table) = entry.as_table() else {
        return usage(format!("{}: [{command}] must be a table", path.display()));
    };
    let mut flags = Vec::new();
    for (key, value) in table {
        let flag = format!("--{}", key.replace('_', "-"));
        let bad = || CliError::Usage(format!("{}: unsupported value for {command}.{key}", path.display()));
        match value {
            toml::Value::Boolean(true) => flags.push(flag),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                let parts = items.iter().map(|v| toml_scalar(v).ok_or_else(bad)).collect::<CliResult<Vec<_>>>()?;
                flags.push(format!("{flag}={}", parts.join(",")));
            }
            v => flags.push(format!("{flag}={}", toml_scalar(v).ok_or_else(bad)?)),
        }
    }
    Ok(flags)
}

/// Inserts flags from the config file right after the subcommand, so that
/// flags given explicitly come later and win.
pub fn expand_args(args: Vec<String>) -> CliResult<Vec<String>> {
    let (config, sub) = scan(&args);
    let (Some(config), Some(sub)) = (config, sub) else {
        return Ok(args);
    };
    let extra = config_flags(Path::new(&config), &args[sub])?;
    let mut out = args[..=sub].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[sub + 1..]);
    Ok(out)
}

fn init_workers() -> CliResult<()> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{WORKERS_ENV} must be a positive integer, got {raw:?}")))?;
    // A pool built earlier in the same process is kept.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Fit(a) => fit::run_fit(a),
        Command::Predict(a) => fit::run_predict(a),
        Command::Interval(a) => fit::run_interval(a),
        Command::Forecast(a) => forecast::run(a),
        Command::Evaluate(a) => evaluate::run(a),
        Command::Bench(a) => bench::run(a),
        Command::Mc(a) => mc::run(a),
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args = args
        .into_iter()
        .map(|a| a.into().into_string().map_err(|a| CliError::Usage(format!("argument is not UTF-8: {a:?}"))))
        .collect::<CliResult<Vec<_>>>()?;
    let args = expand_args(args)?;
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(());
            }
            return Err(CliError::Usage(e.render().to_string().trim_end().to_string()));
        }
    };
    init_workers()?;
    dispatch(&cli)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn scan_finds_config_and_subcommand() {
        let a = strings(&["fpqr", "--config", "c.toml", "fit", "--y", "y.csv"]);
        assert_eq!(scan(&a), (Some("c.toml".into()), Some(3)));
        let a = strings(&["fpqr", "mc", "--config=c.toml"]);
        assert_eq!(scan(&a), (Some("c.toml".into()), Some(1)));
        assert_eq!(scan(&strings(&["fpqr", "bench"])), (None, Some(1)));
    }

    #[test]
    fn config_values_yield_to_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(
            &path,
            "[mc]\nreps = 3\nn_list = [50, 60]\nno_predictor_noise = true\nseed = 9\nout = \"a.csv\"\n",
        )
        .unwrap();
        let args = strings(&["fpqr", "--config", path.to_str().unwrap(), "mc", "--seed", "4"]);
        let cli = Cli::try_parse_from(expand_args(args).unwrap()).unwrap();
        let Command::Mc(m) = cli.command else { panic!("wrong command") };
        assert_eq!(m.reps, 3);
        assert_eq!(m.seed, 4);
        assert_eq!(m.n_list, vec![50, 60]);
        assert!(m.errors.no_predictor_noise);
        assert_eq!(m.out, Path::new("a.csv"));
    }

    #[test]
    fn list_flags_override_config_lists() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "[bench]\nn_list = [50, 60]\nout = \"b.csv\"\n").unwrap();
        let args = strings(&["fpqr", "bench", "--config", path.to_str().unwrap(), "--n-list", "70"]);
        let cli = Cli::try_parse_from(expand_args(args).unwrap()).unwrap();
        let Command::Bench(b) = cli.command else { panic!("wrong command") };
        assert_eq!(b.n_list, vec![70]);
    }

    #[test]
    fn missing_config_is_io_error() {
        let err = run(["fpqr", "--config", "/nonexistent/c.toml", "bench", "--out", "x"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn parse_errors_are_usage_errors() {
        assert_eq!(run(["fpqr", "fit"]).unwrap_err().exit_code(), 1);
        assert_eq!(run(["fpqr", "frobnicate"]).unwrap_err().exit_code(), 1);
        assert!(run(["fpqr", "--help"]).is_ok());
    }
}
