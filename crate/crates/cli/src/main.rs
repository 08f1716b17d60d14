use clap::Parser;

fn main() {
    let cli = causal_isotonic_cli::Cli::parse();
    if let Err(e) = causal_isotonic_cli::run(cli) {
        let msg = format!("{e:#}").replace('\n', " ");
        eprintln!("error: {msg}");
        std::process::exit(1);
    }
}
