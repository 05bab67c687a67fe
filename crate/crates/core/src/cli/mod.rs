//! Command-line front end.
//!
//! `kacgas <command> [--config PATH] [--seed U64] [--workers N] [--out DIR] [--key=value ...]`
//!
//! Exit status: 0 on success, 2 for configuration errors, 3 when a run fails.

mod config;
mod execute;

use std::path::PathBuf;

use clap::Parser;

pub use config::{
    parse_config, parse_grid, parse_momentum, parse_position, parse_region, Command, ConfigError, ConfigIssue,
    IssueKind, KeySpec, Kind, Overrides, RunConfig, WindowSpec,
};
pub use execute::{execute, Artifacts, ExecError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "kacgas", version, about = "Free gas and Kac ring experiments", after_help = key_help())]
struct Args {
    /// One of gas-trace, gas-scaling, gas-mean, gas-reverse, kac-trace,
    /// kac-ensemble, kac-brute, bounds, macro.
    command: Command,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Command keys as `--key=value` or `--key value`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY=VALUE")]
    set: Vec<String>,
}

fn key_help() -> String {
    let mut s = String::from("Command keys:\n");
    for c in Command::ALL {
        s.push_str(&format!("  [{c}]\n"));
        for k in c.keys() {
            let d = k.default.map(|d| format!(" (default {d})")).unwrap_or_else(|| " (required)".into());
            s.push_str(&format!("    {}{d}\n", k.name));
        }
    }
    s
}

/// Split trailing `--key=value` / `--key value` words; the global flags may
/// also appear here.
fn split_overrides(words: &[String], o: &mut Overrides) -> Result<(), ConfigError> {
    let mut issues = Vec::new();
    let mut bad = |path: &str, msg: String| {
        issues.push(ConfigIssue { path: path.to_string(), kind: IssueKind::Syntax, message: msg });
    };
    let mut it = words.iter();
    while let Some(w) = it.next() {
        let Some(body) = w.strip_prefix("--") else {
            bad(w, "expected --key=value".into());
            continue;
        };
        let (key, value) = match body.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => match it.next() {
                Some(v) => (body.to_string(), v.clone()),
                None => {
                    bad(body, "flag has no value".into());
                    continue;
                }
            },
        };
        match key.as_str() {
            "seed" => match value.parse() {
                Ok(s) => o.seed = Some(s),
                Err(_) => bad("seed", format!("`{value}` is not an unsigned 64-bit integer")),
            },
            "workers" => match value.parse() {
                Ok(s) => o.workers = Some(s),
                Err(_) => bad("workers", format!("`{value}` is not an integer")),
            },
            "out" => o.out = Some(PathBuf::from(value)),
            "config" => bad("config", "give --config before command keys".into()),
            _ => o.params.push((key.replace('-', "_"), value)),
        }
    }
    if issues.is_empty() {
        Ok(())
    } else {
        Err(ConfigError { issues })
    }
}

/// Entry point used by the binary; returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let text = match &args.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return EXIT_CONFIG;
            }
        },
        None => String::new(),
    };
    let mut overrides = Overrides { seed: args.seed, workers: args.workers, out: args.out.clone(), params: Vec::new() };
    let parsed =
        split_overrides(&args.set, &mut overrides).and_then(|()| parse_config(args.command, &text, &overrides));
    let config = match parsed {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error:\n{e}");
            return EXIT_CONFIG;
        }
    };
    match execute(&config) {
        Ok(a) => {
            for f in &a.files {
                println!("{}", f.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}
