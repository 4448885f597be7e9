//! Command-line flags. Precedence: preset, then deck, then flags.

use std::path::PathBuf;

use clap::Parser;

use crate::deck::{apply_deck, RunSpec};
use crate::error::CliError;

#[derive(Debug, Parser, Default)]
#[command(
    name = "nanopair",
    version,
    about = "Short-range pair-potential particle simulation",
    allow_negative_numbers = true
)]
pub struct Args {
    /// Start from a named configuration: lj-32 or sd-halfdomain.
    #[arg(long)]
    pub preset: Option<String>,
    /// Input deck of `key = value` lines.
    #[arg(long)]
    pub deck: Option<PathBuf>,
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub ny: Option<usize>,
    #[arg(long)]
    pub nz: Option<usize>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub cutoff: Option<f64>,
    #[arg(long)]
    pub buffer: Option<f64>,
    #[arg(long = "reneigh-every")]
    pub reneigh_every: Option<u64>,
    /// aos, soa or aosoa:<cluster size>.
    #[arg(long)]
    pub layout: Option<String>,
    /// Use half neighbor lists (each pair stored once).
    #[arg(long = "half-neigh")]
    pub half_neigh: bool,
    /// lj or sd.
    #[arg(long)]
    pub potential: Option<String>,
    /// serial or parallel.
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub ranks: Option<usize>,
    /// Rank grid as XxYxZ, e.g. 2x2x2.
    #[arg(long = "rank-grid")]
    pub rank_grid: Option<String>,
    /// none, morton or hilbert.
    #[arg(long)]
    pub balance: Option<String>,
    /// Run the ranks one at a time in a fixed order.
    #[arg(long = "ranks-sequential")]
    pub ranks_sequential: bool,
    /// Write an XYZ trajectory here.
    #[arg(long)]
    pub dump: Option<PathBuf>,
    #[arg(long = "dump-every")]
    pub dump_every: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

impl Args {
    pub fn to_spec(&self) -> Result<RunSpec, CliError> {
        let mut spec = match &self.preset {
            Some(p) => RunSpec::from_preset(p)?,
            None => RunSpec::default(),
        };
        if let Some(path) = &self.deck {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            apply_deck(&mut spec, &text)?;
        }
        let pairs: [(&str, Option<String>); 16] = [
            ("nx", self.nx.map(|v| v.to_string())),
            ("ny", self.ny.map(|v| v.to_string())),
            ("nz", self.nz.map(|v| v.to_string())),
            ("steps", self.steps.map(|v| v.to_string())),
            ("dt", self.dt.map(|v| v.to_string())),
            ("cutoff", self.cutoff.map(|v| v.to_string())),
            ("buffer", self.buffer.map(|v| v.to_string())),
            ("reneigh_every", self.reneigh_every.map(|v| v.to_string())),
            ("layout", self.layout.clone()),
            ("potential", self.potential.clone()),
            ("backend", self.backend.clone()),
            ("ranks", self.ranks.map(|v| v.to_string())),
            ("rank_grid", self.rank_grid.clone()),
            ("balance", self.balance.clone()),
            ("dump_every", self.dump_every.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                spec.set(k, &v)?;
            }
        }
        if self.half_neigh {
            spec.config.half_neighbor = true;
        }
        if self.ranks_sequential {
            spec.sequential = true;
        }
        if let Some(d) = &self.dump {
            spec.dump = Some(d.clone());
        }
        if let Some(r) = &self.report {
            spec.report = Some(r.clone());
        }
        spec.validate()?;
        Ok(spec)
    }
}
