use clap::Parser;

fn main() {
    let cli = asif::cli::Cli::parse();
    if let Err(e) = asif::cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
