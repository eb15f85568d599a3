use clap::Parser;

fn main() {
    let cli = momoc::Cli::parse();
    momoc::init_logging(cli.verbose);
    if let Err(e) = momoc::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
