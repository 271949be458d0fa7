use clap::Parser;

use qpuf_cli::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    let code = match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
