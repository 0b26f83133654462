use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fracfront_cli::{parse_config, run_experiment};
use serde_json::json;

/// Runs a fractional front-propagation experiment described by a TOML file.
///
/// Exit codes: 0 all checks pass, 1 a check failed, 2 configuration error,
/// 3 numerical failure.
#[derive(Debug, Parser)]
#[command(name = "fracfront", version)]
struct Args {
    /// Experiment configuration file.
    config: PathBuf,
    /// Worker threads; overrides `threads` in the file.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory; overrides `output_dir` in the file.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Random seed; overrides `seed` in the file.
    #[arg(long)]
    seed: Option<u64>,
}

fn fail(code: u8, kind: &str, message: String, line: Option<usize>) -> ExitCode {
    eprintln!("{}", json!({ "level": "error", "kind": kind, "message": message, "line": line }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => return fail(2, "config", format!("cannot read {}: {e}", args.config.display()), None),
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => return fail(2, "config", e.message, e.line),
    };
    if let Some(t) = args.threads {
        if t == 0 {
            return fail(2, "config", "--threads must be at least 1".into(), None);
        }
        cfg.threads = t;
    }
    if let Some(o) = args.output {
        cfg.output_dir = o;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    match run_experiment(&cfg) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("{}", json!({ "level": "error", "kind": "check", "message": "one or more checks failed", "output_dir": cfg.output_dir }));
            ExitCode::from(1)
        }
        Err(e) => {
            let kind = if e.exit_code() == 2 { "config" } else { "numerical" };
            fail(e.exit_code() as u8, kind, e.to_string(), None)
        }
    }
}
