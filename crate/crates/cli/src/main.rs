//! `qre` command-line tool.
//!
//! Exit codes: 0 success, 1 a checked claim failed, 2 usage or IO error.

mod args;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qre_core::report::{csv_bytes, json_bytes, write_atomic, Metadata};
use qre_core::Error;
use serde::Serialize;

use args::{Cli, Format};
use commands::Payload;

#[derive(Serialize)]
struct HashedConfig<'a> {
    run: &'a args::RunArgs,
    command: &'a args::Command,
    format: Format,
}

fn run(cli: &Cli) -> Result<bool, Error> {
    let allowed = cli.command.formats();
    let format = cli.run.format.unwrap_or(allowed[0]);
    if !allowed.contains(&format) {
        return Err(Error::InvalidParameter(format!(
            "{} cannot write {format:?} output",
            cli.command.name()
        )));
    }
    let outcome = commands::execute(&cli.command, &cli.run)?;
    let meta = Metadata::new(
        cli.run.seed,
        &HashedConfig {
            run: &cli.run,
            command: &cli.command,
            format,
        },
    )?;
    let bytes = match (&outcome.payload, format) {
        (Payload::Table { header, rows, .. }, Format::Csv) => csv_bytes(&meta, header, rows)?,
        (Payload::Table { json, .. }, Format::Json) | (Payload::Json(json), _) => {
            json_bytes(&meta, json)?
        }
    };
    let path = cli.run.output.clone().unwrap_or_else(|| {
        cli.run.output_dir.join(PathBuf::from(format!(
            "{}.{}",
            cli.command.name(),
            format.extension()
        )))
    });
    write_atomic(&path, &bytes)?;
    println!("{}", outcome.summary);
    println!("wrote {}", path.display());
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ Error::ClaimFalsified(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
