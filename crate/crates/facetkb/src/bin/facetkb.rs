use clap::Parser;

fn main() {
    let cli = facetkb::cli::Cli::parse();
    std::process::exit(facetkb::cli::run(cli));
}
