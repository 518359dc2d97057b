use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = depthuq::cli::Cli::parse();
    match depthuq::cli::run(&cli) {
        Ok(out) => {
            if !out.is_empty() {
                println!("{out}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error class={} exit={}: {e}", e.class(), e.exit_code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
