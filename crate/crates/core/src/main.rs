use clap::Parser;

use mwg::cli::{run, Cli};

fn main() {
    if let Err(failure) = run(Cli::parse()) {
        eprintln!("error: {}", failure.message);
        std::process::exit(failure.code);
    }
}
