use clap::Parser;
use oocsvd_cli::{commands, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = commands::run(cli.command) {
        eprintln!("oocsvd: {e}");
        std::process::exit(e.exit_code());
    }
}
