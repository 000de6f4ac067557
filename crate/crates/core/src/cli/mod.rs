//! Command-line runner.
//!
//! `bpire <subcommand> [--config PATH] [--seed U64] [--shards K] [--out PATH]
//! [--format json|csv] [--set key=value ...]`. Command-line values override the
//! config file. Records go to `--out` (or stdout); the run header with the
//! config echo, version and timing goes to `<out>.meta.json` (or stderr).

pub mod config;
pub mod record;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::Parser;

use crate::error::{Error, Result};

pub use config::{Entries, Format, RunConfig};
pub use record::{render, Record, RunHeader};
pub use run::{execute, Body, RunOutput, Task};

#[derive(Debug, Parser)]
#[command(name = "bpire", version, about = "Branching process with immigration in random environment: exact formulas and Monte Carlo")]
struct Cli {
    #[command(subcommand)]
    task: Task,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    shards: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    format: Option<String>,
    #[arg(long = "n-grid", global = true)]
    n_grid: Option<String>,
    #[arg(long = "m-samples", global = true)]
    m_samples: Option<u64>,
    #[arg(long = "s-grid", global = true)]
    s_grid: Option<String>,
    #[arg(long = "beta-grid", global = true)]
    beta_grid: Option<String>,
    /// Any config key, e.g. `--set regime=proportional`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut e = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|err| Error::Config(format!("cannot read {}: {err}", p.display())))?;
            Entries::parse(&text)?
        }
        None => Entries::default(),
    };
    for kv in &cli.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        e.set(k.trim(), v.trim())?;
    }
    let flags = [
        ("seed", cli.seed.map(|v| v.to_string())),
        ("shards", cli.shards.map(|v| v.to_string())),
        ("out", cli.out.as_ref().map(|p| p.display().to_string())),
        ("format", cli.format.clone()),
        ("n_grid", cli.n_grid.clone()),
        ("m_samples", cli.m_samples.map(|v| v.to_string())),
        ("s_grid", cli.s_grid.clone()),
        ("beta_grid", cli.beta_grid.clone()),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            e.set(k, &v)?;
        }
    }
    RunConfig::from_entries(&e)
}

fn meta_path(out: &std::path::Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn run_cli(cli: &Cli) -> Result<i32> {
    let start = Instant::now();
    let cfg = load_config(cli)?;
    let out = execute(&cli.task, &cfg)?;
    let text = match &out.body {
        Body::Records(r) => render(r, cfg.format),
        Body::Text(t) => t.clone(),
    };
    let header = RunHeader {
        tool: "bpire",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: cli.task.name().to_string(),
        config: cfg.echo(),
        conformity: out.conformity.clone(),
        diagnostics: out.diagnostics.clone(),
        elapsed_seconds: start.elapsed().as_secs_f64(),
        exit_code: out.exit_code,
    };
    let header = serde_json::to_string(&header).map_err(|e| Error::Numerical(e.to_string()))?;
    match &cfg.out {
        Some(p) => {
            std::fs::write(p, text)?;
            std::fs::write(meta_path(p), header + "\n")?;
        }
        None => {
            print!("{text}");
            eprintln!("{header}");
        }
    }
    Ok(out.exit_code)
}

/// Parses `args` (program name first), runs the subcommand and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_cli(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(main_with_args(["bpire", "frobnicate"]), 2);
        assert_eq!(main_with_args(["bpire", "validate"]), 2, "seed missing");
        assert_eq!(main_with_args(["bpire", "validate", "--seed", "1", "--set", "nope=1"]), 2);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.cfg");
        std::fs::write(&p, "seed = 1\nshards = 2\nm_samples = 50\n").unwrap();
        let cli = Cli::try_parse_from(["bpire", "prob", "--config", p.to_str().unwrap(), "--seed", "9", "--set", "m_samples=70"]).unwrap();
        let c = load_config(&cli).unwrap();
        assert_eq!((c.seed, c.shards, c.m_samples), (9, 2, 70));
    }

    #[test]
    fn meta_sits_next_to_output() {
        assert_eq!(meta_path(std::path::Path::new("a/b.ndjson")), PathBuf::from("a/b.ndjson.meta.json"));
    }
}
