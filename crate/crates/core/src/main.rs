use clap::error::ErrorKind;
use clap::Parser;

use incestless::cli::{execute, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                // exit code 2 is reserved for constraint violations
                _ => 1,
            };
            std::process::exit(code);
        }
    };
    std::process::exit(execute(cli));
}
