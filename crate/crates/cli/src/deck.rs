//! Input decks: `key = value` lines mapped onto a [`RunSpec`].

use std::path::PathBuf;
use std::str::FromStr;

use nanopair_core::balance::{BalanceConfig, CurveKind};
use nanopair_core::config::SimConfig;
use nanopair_core::driver::RunOptions;

use crate::error::CliError;

/// Everything needed to launch one run: the physics plus harness options.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub config: SimConfig,
    pub ranks: usize,
    pub rank_grid: Option<[usize; 3]>,
    /// `None` disables balancing.
    pub balance: Option<BalanceConfig>,
    pub sequential: bool,
    pub dump: Option<PathBuf>,
    pub dump_every: u64,
    pub report: Option<PathBuf>,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            config: SimConfig::default(),
            ranks: 1,
            rank_grid: None,
            balance: None,
            sequential: false,
            dump: None,
            dump_every: 20,
            report: None,
        }
    }
}

impl RunSpec {
    pub fn from_preset(name: &str) -> Result<Self, CliError> {
        let config = SimConfig::preset(name).ok_or_else(|| CliError::UnknownPreset(name.to_string()))?;
        Ok(Self {
            config,
            ..Self::default()
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.config.validate()?;
        if self.ranks == 0 {
            return Err(CliError::invalid("ranks", "must be at least 1"));
        }
        if let Some(g) = self.rank_grid {
            if g.iter().product::<usize>() != self.ranks {
                return Err(CliError::invalid(
                    "rank_grid",
                    format!("{} ranks do not match --ranks {}", g.iter().product::<usize>(), self.ranks),
                ));
            }
        }
        if self.dump_every == 0 {
            return Err(CliError::invalid("dump_every", "must be positive"));
        }
        if let Some(b) = &self.balance {
            b.validate()?;
        }
        Ok(())
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            ranks: self.ranks,
            rank_grid: self.rank_grid,
            balance: self.balance,
            sequential: self.sequential,
            frame_every: self.dump.as_ref().map(|_| self.dump_every),
            collect_final_states: false,
        }
    }

    /// Set one deck key. Used for deck lines and mirrored by the flags.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let c = &mut self.config;
        match key {
            "nx" => c.unit_cells[0] = parse(key, value)?,
            "ny" => c.unit_cells[1] = parse(key, value)?,
            "nz" => c.unit_cells[2] = parse(key, value)?,
            "particles_per_cell" => c.particles_per_cell = parse(key, value)?,
            "density" => c.lattice_density = parse(key, value)?,
            "fill" => c.fill = parse(key, value)?,
            "steps" => c.steps = parse(key, value)?,
            "dt" => c.dt = parse(key, value)?,
            "cutoff" => c.cutoff = parse(key, value)?,
            "buffer" => c.verlet_buffer = parse(key, value)?,
            "reneigh_every" => c.reneigh_interval = parse(key, value)?,
            "potential" => c.potential = parse(key, value)?,
            "epsilon" => c.epsilon = parse(key, value)?,
            "sigma" => c.sigma = parse(key, value)?,
            "stiffness" => c.stiffness = parse(key, value)?,
            "damping" => c.damping = parse(key, value)?,
            "diameter" => c.diameter = parse(key, value)?,
            "mass" => c.mass = parse(key, value)?,
            "half_neigh" => c.half_neighbor = parse_bool(key, value)?,
            "layout" => c.layout = parse(key, value)?,
            "backend" => c.backend = parse(key, value)?,
            "seed" => c.rng_seed = parse(key, value)?,
            "ranks" => self.ranks = parse(key, value)?,
            "rank_grid" => self.rank_grid = Some(parse_grid(value).map_err(|m| CliError::invalid("rank_grid", m))?),
            "ranks_sequential" => self.sequential = parse_bool(key, value)?,
            "balance" => {
                self.balance = match value {
                    "none" => None,
                    v => {
                        let curve: CurveKind = parse(key, v)?;
                        Some(BalanceConfig {
                            curve,
                            ..self.balance.unwrap_or_default()
                        })
                    }
                }
            }
            "refine_threshold" => self.balance_mut().refine_threshold = parse(key, value)?,
            "merge_threshold" => self.balance_mut().merge_threshold = parse(key, value)?,
            "max_depth" => self.balance_mut().max_depth = parse(key, value)?,
            "dump" => self.dump = Some(PathBuf::from(value)),
            "dump_every" => self.dump_every = parse(key, value)?,
            "report" => self.report = Some(PathBuf::from(value)),
            _ => return Err(CliError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    fn balance_mut(&mut self) -> &mut BalanceConfig {
        self.balance.get_or_insert_with(BalanceConfig::default)
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| CliError::invalid_value(key, value, e.to_string()))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::invalid_value(key, value, "expected true or false")),
    }
}

/// `XxYxZ`, e.g. `2x2x1`.
pub fn parse_grid(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split('x').collect();
    if parts.len() != 3 {
        return Err(format!("`{s}` is not of the form XxYxZ"));
    }
    let mut g = [0; 3];
    for (d, p) in parts.iter().enumerate() {
        g[d] = p.parse().map_err(|_| format!("`{p}` in `{s}` is not a positive integer"))?;
        if g[d] == 0 {
            return Err(format!("`{s}` has a zero dimension"));
        }
    }
    Ok(g)
}

/// Apply every line of `text` on top of `spec`. Blank lines and `#` comments
/// are ignored.
pub fn apply_deck(spec: &mut RunSpec, text: &str) -> Result<(), CliError> {
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| CliError::Deck {
            line: n + 1,
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(CliError::Deck {
                line: n + 1,
                msg: "missing key".into(),
            });
        }
        spec.set(k, v).map_err(|e| CliError::Deck {
            line: n + 1,
            msg: e.to_string(),
        })?;
    }
    Ok(())
}

/// Parse a deck on top of the defaults and validate it.
pub fn parse_deck(text: &str) -> Result<RunSpec, CliError> {
    let mut spec = RunSpec::default();
    apply_deck(&mut spec, text)?;
    spec.validate()?;
    Ok(spec)
}
