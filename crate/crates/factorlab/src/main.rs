use std::process::ExitCode;

use clap::Parser;
use factorlab::{load_config, run_check, Cli, Outcome};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(Outcome::InvalidConfig.code() as u8);
        }
    };
    let report = match run_check(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(Outcome::from_error(&e).code() as u8);
        }
    };
    if let Some(t) = &report.table {
        eprint!("{t}");
    }
    let text = serde_json::to_string_pretty(&report.json).expect("report serializes") + "\n";
    match &cfg.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &text) {
                eprintln!("cannot write {}: {e}", path.display());
                return ExitCode::from(Outcome::InvalidConfig.code() as u8);
            }
        }
        None => print!("{text}"),
    }
    ExitCode::from(report.outcome.code() as u8)
}
