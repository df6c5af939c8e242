use clap::Parser;

fn main() {
    let cli = vrpmtw::cli::Cli::parse();
    if let Err(err) = vrpmtw::cli::run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
