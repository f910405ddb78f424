//! Command-line front end: argument parsing, commands and file formats.

pub mod args;
pub mod commands;
pub mod error;
pub mod io;
pub mod mesh;
pub mod portrait;
pub mod verify;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::{Cli, Command};
pub use crate::error::CliError;

/// Runs the tool on a full argument vector (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
        }
    };
    let recorded = recorded_args(&argv[1..]);
    match dispatch(&cli, recorded) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Arguments as stored in a manifest: everything but the output directory.
fn recorded_args(argv: &[OsString]) -> Vec<String> {
    let mut out = Vec::new();
    let mut skip = false;
    for a in argv {
        let a = a.to_string_lossy().into_owned();
        if skip {
            skip = false;
            continue;
        }
        if a == "--out-dir" {
            skip = true;
            continue;
        }
        if a.starts_with("--out-dir=") {
            continue;
        }
        out.push(a);
    }
    out
}

pub fn dispatch(cli: &Cli, recorded: Vec<String>) -> Result<(), CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Flow(a) => commands::flow(g, a, recorded),
        Command::BuildSoliton(a) => commands::build_soliton(g, a, recorded),
        Command::Verify(a) => verify::verify(g, a, recorded),
        Command::PhasePortrait(a) => portrait::phase_portrait(g, a, recorded),
        Command::ExportMesh(a) => mesh::export_mesh(g, a, recorded),
        Command::Linearize => commands::linearize(g, recorded),
        Command::Replay(a) => commands::replay(g, a),
    }
}
