//! `longcav` command-line front end. Every subcommand is a thin wrapper over
//! `longcav-core`; results go to files plus a short summary on stdout.

mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

/// Fit or evolution finished without meeting its convergence criteria.
#[derive(Debug)]
pub struct NotConverged(pub String);

impl std::fmt::Display for NotConverged {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "not converged: {}", self.0)
    }
}

impl std::error::Error for NotConverged {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<NotConverged>().is_some() {
        return 2;
    }
    match err.downcast_ref::<longcav_core::Error>() {
        Some(longcav_core::Error::NonConvergence(_)) => 2,
        _ => 1,
    }
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    use longcav_core::Error as E;
    if err.downcast_ref::<NotConverged>().is_some() {
        return "non-convergence";
    }
    match err.downcast_ref::<E>() {
        Some(E::NonConvergence(_)) => "non-convergence",
        Some(E::Io(_)) => "io",
        Some(E::Parse { .. }) | Some(E::Json(_)) => "parse",
        Some(E::FormatVersion { .. }) => "schema-version",
        Some(_) => "validation",
        None if err.downcast_ref::<std::io::Error>().is_some() => "io",
        None => "validation",
    }
}

pub fn dispatch(argv: &[String]) -> u8 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::run(&cli, &argv[1..]) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error[{}]: {:#}", error_kind(&err), err);
            exit_code(&err)
        }
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    ExitCode::from(dispatch(&argv))
}
