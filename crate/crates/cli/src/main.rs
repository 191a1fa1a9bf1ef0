use clap::Parser;

fn main() {
    let cli = dac_cli::Cli::parse();
    if let Err(err) = dac_cli::run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
