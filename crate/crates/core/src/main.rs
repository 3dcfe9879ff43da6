use clap::Parser;
use lqr_adp::cli::{run, Cli};

fn main() {
    std::process::exit(run(&Cli::parse()));
}
