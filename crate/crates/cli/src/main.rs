use clap::Parser;
use tracing_subscriber::EnvFilter;

use personamail_cli::{run, Cli};

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("PERSONAMAIL_LOG").unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr();
    if let Err(e) = run(&cli, &mut out, &mut err) {
        eprintln!("error: {e}");
        std::process::exit(e.code);
    }
}
