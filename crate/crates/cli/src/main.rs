mod args;
mod commands;
mod config;
mod error;

use std::process::ExitCode;

use args::Command;
use error::{CliError, CliResult};

fn run() -> CliResult<()> {
    let cli = config::parse(std::env::args_os().collect())?;
    let seed = cli.seed;
    match &cli.command {
        Command::Rasterize(a) => commands::rasterize(a),
        Command::Embed(a) => commands::embed_images(a, seed),
        Command::Fuse(a) => commands::fuse(a, seed),
        Command::TrainToy(a) => commands::train_toy(a, seed),
        Command::Loso(a) => commands::loso(a, seed),
        Command::Attention(a) => commands::attention(a, seed),
        Command::Params(a) => commands::params(a, seed),
    }
}

fn main() -> ExitCode {
    let result = std::panic::catch_unwind(run).unwrap_or_else(|_| Err(CliError::Internal("internal panic".into())));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
