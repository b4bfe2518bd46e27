use clap::Parser;

fn main() {
    let cli = flowcast::cli::Cli::parse();
    if let Err(err) = flowcast::cli::run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
