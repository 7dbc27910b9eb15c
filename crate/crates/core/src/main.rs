use clap::Parser;
use qps::cli::{error_json, execute, Cli};

fn main() {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    if let Err(e) = execute(&cli, &mut stdout.lock()) {
        eprintln!("{}", error_json(&e));
        std::process::exit(e.exit_code());
    }
}
