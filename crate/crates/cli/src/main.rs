mod args;
mod commands;
mod config;
mod error;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

use args::Cli;

fn command() -> clap::Command {
    let mut cmd = Cli::command().args_override_self(true);
    let names: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_string()).collect();
    for name in names {
        cmd = cmd.mut_subcommand(name, |s| s.args_override_self(true));
    }
    cmd
}

/// Parses argv, folding in config-file flags ahead of the user's own.
fn parse(argv: Vec<OsString>) -> Result<Cli, clap::Error> {
    let cmd = command();
    let matches = cmd.clone().try_get_matches_from(&argv)?;
    let Some(path) = matches.get_one::<PathBuf>("config") else {
        return Cli::from_arg_matches(&matches);
    };
    let sub = matches.subcommand_name().unwrap_or_default().to_string();
    let injected = config::load(path)
        .and_then(|t| config::config_args(&t, &cmd, &sub))
        .map_err(|e| cmd.clone().error(clap::error::ErrorKind::InvalidValue, e.to_string()))?;

    let mut rest = argv.iter().skip(1).cloned().collect::<Vec<_>>();
    let mut prev_is_config = false;
    if let Some(pos) = rest.iter().position(|a| {
        let hit = !prev_is_config && a == sub.as_str();
        prev_is_config = a == "--config";
        hit
    }) {
        rest.remove(pos);
    }
    let mut full = vec![argv.first().cloned().unwrap_or_else(|| "memwb".into()), sub.into()];
    full.extend(injected);
    full.extend(rest);
    let matches = cmd.try_get_matches_from(full)?;
    Cli::from_arg_matches(&matches)
}

fn main() -> ExitCode {
    let cli = match parse(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("memwb: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
