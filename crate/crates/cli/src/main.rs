use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;
use supou_cli::{load_config, run, CliError, Task};

/// Simulation, second-order structure, condition checks and estimation for
/// supOU processes.
#[derive(Parser)]
#[command(name = "supou", version)]
struct Args {
    task: Task,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: the configuration's `out`, else `.`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn fail(e: &CliError) -> ExitCode {
    let code = e.exit_code();
    eprintln!("{}", json!({"status": "error", "kind": e.kind(), "exit": code, "message": e.to_string()}));
    ExitCode::from(code as u8)
}

fn threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("SUPOU_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| CliError::Validation(format!("SUPOU_THREADS: not a count: {v}")))?;
    supou::par::configure_threads(n).map_err(|e| CliError::Validation(format!("SUPOU_THREADS: {e}")))
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.render().to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return fail(&CliError::Validation(first.to_string()));
        }
    };
    let result = threads().and_then(|_| {
        let text = std::fs::read_to_string(&args.config)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", args.config.display())))?;
        let base = args.config.parent().map(PathBuf::from).unwrap_or_default();
        let mut cfg = load_config(&text, args.task, &base)?;
        if let Some(s) = args.seed {
            cfg.seed = s;
        }
        if let Some(o) = args.out {
            cfg.out = o;
        }
        run(&cfg)
    });
    match result {
        Ok(outcome) => ExitCode::from(outcome.exit_code as u8),
        Err(e) => fail(&e),
    }
}
