use std::process::ExitCode;

use clap::Parser;
use nanopair_cli::{configure_threads, run, Args};

fn main() -> ExitCode {
    let args = Args::parse();
    let result = configure_threads()
        .and_then(|_| args.to_spec())
        .and_then(|spec| run(&spec).map(|r| (spec, r)));
    match result {
        Ok((spec, (_, text))) => {
            if spec.report.is_none() {
                print!("{text}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("nanopair: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(e.exit_code())
        }
    }
}

