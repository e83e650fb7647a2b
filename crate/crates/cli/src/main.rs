use clap::Parser;

fn main() {
    std::process::exit(exterior_cli::run(exterior_cli::Cli::parse()));
}
