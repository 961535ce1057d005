// SPDX-License-Identifier: Apache-2.0

use clap::Parser;
use nesslab_cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::try_parse().unwrap_or_else(|e| {
        let _ = e.print();
        // Usage errors share the configuration exit status.
        std::process::exit(if e.use_stderr() { 1 } else { 0 });
    });
    if let Err(e) = run(&cli) {
        eprintln!("nesslab: {e}");
        std::process::exit(e.exit_code());
    }
}
