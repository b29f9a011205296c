use besov_cli::{run_and_record, Cli, RunConfig};
use clap::Parser;

fn main() {
    let cfg = match RunConfig::try_from(Cli::parse()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    };
    std::process::exit(run_and_record(&cfg));
}
