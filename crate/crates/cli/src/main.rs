use std::process::ExitCode;

use clap::Parser;

use rte_cli::config::{Cli, RunConfig};
use rte_cli::{run, CliError};

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("RTE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("RTE_THREADS = {raw:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot start {n} worker threads: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads()
        .and_then(|()| RunConfig::resolve(cli.command.kind(), cli.command.options()))
        .and_then(|cfg| run::run(&cfg));
    match result {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("rte: error[{}] (code {}): {e}", e.kind(), e.code());
            ExitCode::from(u8::try_from(e.code()).unwrap_or(1))
        }
    }
}
