use clap::Parser;

fn main() {
    std::process::exit(cfe_cli::run(cfe_cli::Cli::parse()));
}
