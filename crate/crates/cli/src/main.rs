mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::{CommandFactory, Parser};
use tpca::{Error, ErrorKind};

use args::Cli;
use manifest::Manifest;

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::Backend => 3,
        ErrorKind::Data => 4,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let command = match (cli.from_manifest, cli.command) {
        (Some(path), None) => Manifest::load(&path)?.command,
        (None, Some(command)) => command,
        (Some(_), Some(_)) => {
            return Err(Error::InvalidArgument("--from-manifest replaces the subcommand; give one or the other".into()))
        }
        (None, None) => {
            Cli::command().print_help().ok();
            return Err(Error::InvalidArgument("no command given".into()));
        }
    };
    if let Some((replay, record)) = commands::execute(&command)? {
        if let Some(dir) = commands::out_dir(&replay) {
            record.finish(replay.clone(), dir)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e.kind();
            let label = match kind {
                ErrorKind::Config => "config",
                ErrorKind::Backend => "backend",
                ErrorKind::Data => "data",
            };
            // single line, whatever the message contains
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {label}: {msg}");
            ExitCode::from(exit_code(kind))
        }
    }
}
