use std::process::ExitCode;

use clap::Parser;

mod args;
mod commands;
mod inputs;
mod manifest;

use args::{Cli, Command};

fn exit_code(err: &anyhow::Error) -> u8 {
    let core = err
        .chain()
        .find_map(|e| e.downcast_ref::<ugrm_core::error::Error>());
    match core {
        Some(e) if e.is_numerical() => 1,
        _ => 2,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Replay(r) => commands::replay(&r),
        cmd => commands::execute(cmd),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
