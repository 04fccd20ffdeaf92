// SPDX-License-Identifier: Apache-2.0

use std::process::ExitCode;

use clap::Parser;
use efab_cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EFAB_LOG", "warn"))
        .format_timestamp(None)
        .init();
    // clap exits with 2 on usage errors itself
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => {
            print!("{}", outcome.text);
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
