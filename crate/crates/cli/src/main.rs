mod args;
mod commands;

use std::process::ExitCode;

use args::parse;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Usage(#[from] clap::Error),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Lib(#[from] lymphnet::Error),
    #[error("{0}")]
    Failed(String),
}

fn main() -> ExitCode {
    let invocation = match parse(std::env::args_os().collect()) {
        Ok(inv) => inv,
        Err(CliError::Usage(e)) => e.exit(),
        Err(e) => {
            eprintln!("lymphnet: {e}");
            return ExitCode::from(2);
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(invocation.cli.threads.max(1))
        .build()
        .expect("thread pool");
    match pool.install(|| commands::run(&invocation)) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("lymphnet: error: {e}");
            ExitCode::FAILURE
        }
    }
}
