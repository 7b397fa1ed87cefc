//! `qfilter` — corpus quality-filtering toolkit.
//!
//! One subcommand per invocation. Exit codes: 0 success, 1 runtime or data
//! error, 2 usage error. Logs go to stderr; data artifacts go to files, each
//! accompanied by a manifest describing the run that produced it.

mod args;
mod cfg;
mod ops;
mod tables;

use clap::error::ErrorKind;
use clap::Parser;

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match args::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            // clap renders help to stdout and errors to stderr.
            let _ = e.print();
            return code;
        }
    };

    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(
        if cli.verbose { "info" } else { "warn" },
    ))
    .try_init()
    .ok();

    match ops::run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
