//! Command-line front end: decks, presets, reports and trajectories.

pub mod args;
pub mod deck;
pub mod error;
pub mod report;
pub mod xyz;

use std::fs::File;
use std::io::{BufWriter, Write};

use nanopair_core::driver::{launch, RunOutcome};

pub use args::Args;
pub use deck::{apply_deck, parse_deck, RunSpec};
pub use error::CliError;

/// Cap the global rayon pool at `NANOPAIR_THREADS` if set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("NANOPAIR_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::invalid_value("NANOPAIR_THREADS", &v, "expected a positive integer"))?;
    // A pool already built by an earlier call in this process is fine.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Run the simulation described by `spec`, write the trajectory if one was
/// requested and return the outcome with its rendered report.
pub fn run(spec: &RunSpec) -> Result<(RunOutcome, String), CliError> {
    spec.validate()?;
    let out = launch(&spec.config, &spec.run_options())?;
    if let Some(path) = &spec.dump {
        let f = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut w = BufWriter::new(f);
        for fr in &out.frames {
            xyz::write_frame(&mut w, fr.step, &fr.positions).map_err(|e| CliError::io(path, e))?;
        }
        w.flush().map_err(|e| CliError::io(path, e))?;
    }
    let text = report::format_report(spec, &out);
    if let Some(path) = &spec.report {
        std::fs::write(path, &text).map_err(|e| CliError::io(path, e))?;
    }
    Ok((out, text))
}
