//! The `glitchscope` command line: one subcommand per pipeline step, plus
//! the triage server.

pub mod args;
pub mod commands;
pub mod server;

use args::{Cli, Command, DafCommand, TcacCommand};
use glitchscope_core::ErrorClass;

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_REMOTE: i32 = 4;

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Embed(a) => commands::embed(a),
        Command::Daf(DafCommand::Run(a)) => commands::daf_run(a),
        Command::Daf(DafCommand::Prompt(a)) => commands::daf_prompt(a),
        Command::Tcac(TcacCommand::Pool(a)) => commands::tcac_pool(a),
        Command::Tcac(TcacCommand::Run(a)) => commands::tcac_run(a),
        Command::Serve(a) => server::serve(a),
        Command::Report(a) => commands::report(a),
    }
}

/// Exit status for a failed command: 2 validation, 3 I/O, 4 remote scorer.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<glitchscope_core::Error>() {
            return match e.class() {
                ErrorClass::Validation => EXIT_VALIDATION,
                ErrorClass::Io => EXIT_IO,
                ErrorClass::Remote => EXIT_REMOTE,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_VALIDATION
}
