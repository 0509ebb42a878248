use clap::Parser;

fn main() {
    env_logger::init();
    let cli = normsol::cli::Cli::parse();
    std::process::exit(normsol::cli::run(cli));
}
