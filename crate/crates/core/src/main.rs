use clap::Parser;

fn main() {
    let cli = omsim::cli::Cli::parse();
    if let Err(err) = omsim::cli::run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
