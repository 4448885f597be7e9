//! Simulation configuration and the reproduction presets.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    LennardJones,
    SpringDashpot,
}

impl FromStr for PotentialKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "lj" => Ok(PotentialKind::LennardJones),
            "sd" => Ok(PotentialKind::SpringDashpot),
            other => Err(format!("unknown potential `{other}` (expected lj|sd)")),
        }
    }
}

impl fmt::Display for PotentialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PotentialKind::LennardJones => "lj",
            PotentialKind::SpringDashpot => "sd",
        })
    }
}

/// Particle-array layout selected at run time and dispatched once to a
/// monomorphized simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayoutKind {
    /// Array of structures (row-major N x 3).
    Aos,
    /// Structure of arrays (column-major N x 3).
    Soa,
    /// Clustered array of structures of arrays with the given cluster size.
    Aosoa(usize),
}

/// Cluster sizes that have a compiled specialization.
pub const SUPPORTED_CLUSTER_SIZES: [usize; 7] = [1, 2, 4, 8, 16, 32, 64];

impl FromStr for LayoutKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "aos" => Ok(LayoutKind::Aos),
            "soa" => Ok(LayoutKind::Soa),
            _ => {
                let c = s
                    .strip_prefix("aosoa:")
                    .ok_or_else(|| format!("unknown layout `{s}` (expected aos|soa|aosoa:<c>)"))?;
                let c: usize = c
                    .parse()
                    .map_err(|_| format!("cluster size `{c}` is not an integer"))?;
                Ok(LayoutKind::Aosoa(c))
            }
        }
    }
}

impl fmt::Display for LayoutKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayoutKind::Aos => f.write_str("aos"),
            LayoutKind::Soa => f.write_str("soa"),
            LayoutKind::Aosoa(c) => write!(f, "aosoa:{c}"),
        }
    }
}

/// Which part of the lattice is populated at start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeFill {
    Full,
    /// Only sites with `x/Lx + y/Ly + z/Lz < 1.5`: half of the box, split
    /// along the main diagonal.
    DiagonalHalf,
}

impl FromStr for LatticeFill {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "full" => Ok(LatticeFill::Full),
            "diagonal-half" => Ok(LatticeFill::DiagonalHalf),
            other => Err(format!("unknown fill `{other}` (expected full|diagonal-half)")),
        }
    }
}

impl fmt::Display for LatticeFill {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LatticeFill::Full => "full",
            LatticeFill::DiagonalHalf => "diagonal-half",
        })
    }
}

/// Execution backend for the data-parallel kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Serial,
    Parallel,
}

impl FromStr for BackendKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "serial" => Ok(BackendKind::Serial),
            "parallel" => Ok(BackendKind::Parallel),
            other => Err(format!("unknown backend `{other}` (expected serial|parallel)")),
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Serial => "serial",
            BackendKind::Parallel => "parallel",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub unit_cells: [usize; 3],
    pub particles_per_cell: usize,
    pub lattice_density: f64,
    pub fill: LatticeFill,
    pub dt: f64,
    pub steps: u64,
    pub cutoff: f64,
    pub verlet_buffer: f64,
    pub reneigh_interval: u64,
    pub potential: PotentialKind,
    pub epsilon: f64,
    pub sigma: f64,
    pub stiffness: f64,
    pub damping: f64,
    pub diameter: f64,
    pub half_neighbor: bool,
    pub layout: LayoutKind,
    pub backend: BackendKind,
    pub mass: f64,
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            unit_cells: [4, 4, 4],
            particles_per_cell: 4,
            lattice_density: 0.8442,
            fill: LatticeFill::Full,
            dt: 0.005,
            steps: 100,
            cutoff: 2.5,
            verlet_buffer: 0.3,
            reneigh_interval: 20,
            potential: PotentialKind::LennardJones,
            epsilon: 1.0,
            sigma: 1.0,
            stiffness: 0.0,
            damping: 0.0,
            diameter: 1.0,
            half_neighbor: false,
            layout: LayoutKind::Aos,
            backend: BackendKind::Serial,
            mass: 1.0,
            rng_seed: 12345,
        }
    }
}

impl SimConfig {
    /// Single-node Lennard-Jones setup: 32^3 unit cells x 4 particles,
    /// 100 steps of dt = 0.005, cutoff 2.5, buffer 0.3, reneighbor every 20.
    pub fn preset_lj32() -> Self {
        Self {
            unit_cells: [32, 32, 32],
            ..Self::default()
        }
    }

    /// Load-imbalance setup: Spring-Dashpot with zero stiffness and damping,
    /// particles on the lower diagonal half of a 32^3-cell box, 1000 steps.
    pub fn preset_sd_halfdomain() -> Self {
        Self {
            unit_cells: [32, 32, 32],
            fill: LatticeFill::DiagonalHalf,
            steps: 1000,
            potential: PotentialKind::SpringDashpot,
            stiffness: 0.0,
            damping: 0.0,
            diameter: 1.0,
            ..Self::default()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "lj-32" => Some(Self::preset_lj32()),
            "sd-halfdomain" => Some(Self::preset_sd_halfdomain()),
            _ => None,
        }
    }

    /// Edge length of one unit cell: `(particles_per_cell / density)^(1/3)`.
    pub fn lattice_constant(&self) -> f64 {
        (self.particles_per_cell as f64 / self.lattice_density).cbrt()
    }

    pub fn global_domain(&self) -> Aabb {
        let a = self.lattice_constant();
        Aabb::new(
            Vec3::ZERO,
            Vec3::new(
                self.unit_cells[0] as f64 * a,
                self.unit_cells[1] as f64 * a,
                self.unit_cells[2] as f64 * a,
            ),
        )
    }

    /// Neighbor-list radius `cutoff + verlet_buffer`; also the ghost-layer width.
    pub fn interaction_radius(&self) -> f64 {
        self.cutoff + self.verlet_buffer
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |field: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be positive and finite, got {v}")))
            }
        };
        let non_neg = |field: &'static str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be non-negative and finite, got {v}")))
            }
        };
        if self.unit_cells.contains(&0) {
            return Err(Error::config("unit_cells", "all dimensions must be positive"));
        }
        if !matches!(self.particles_per_cell, 1 | 2 | 4) {
            return Err(Error::config(
                "particles_per_cell",
                format!("{} has no lattice basis (supported: 1, 2, 4)", self.particles_per_cell),
            ));
        }
        pos("density", self.lattice_density)?;
        non_neg("dt", self.dt)?;
        pos("cutoff", self.cutoff)?;
        non_neg("buffer", self.verlet_buffer)?;
        if self.reneigh_interval == 0 {
            return Err(Error::config("reneigh_every", "must be positive"));
        }
        pos("epsilon", self.epsilon)?;
        pos("sigma", self.sigma)?;
        non_neg("stiffness", self.stiffness)?;
        non_neg("damping", self.damping)?;
        pos("diameter", self.diameter)?;
        pos("mass", self.mass)?;
        if let LayoutKind::Aosoa(c) = self.layout {
            if !c.is_power_of_two() {
                return Err(Error::config("layout", format!("cluster size {c} is not a power of two")));
            }
            if !SUPPORTED_CLUSTER_SIZES.contains(&c) {
                return Err(Error::config(
                    "layout",
                    format!("cluster size {c} not compiled in (supported: {SUPPORTED_CLUSTER_SIZES:?})"),
                ));
            }
        }
        let ext = self.global_domain().extent();
        let r = self.interaction_radius();
        if (0..3).any(|d| ext.get(d) < r) {
            return Err(Error::config(
                "unit_cells",
                format!("domain extent {ext:?} is smaller than cutoff + buffer = {r}"),
            ));
        }
        Ok(())
    }

    pub fn total_lattice_sites(&self) -> usize {
        self.unit_cells.iter().product::<usize>() * self.particles_per_cell
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lj32_preset_matches_single_node_setup() {
        let c = SimConfig::preset_lj32();
        assert_eq!(c.total_lattice_sites(), 131_072);
        assert_eq!(c.steps, 100);
        assert_eq!(c.dt, 0.005);
        assert_eq!(c.cutoff, 2.5);
        assert_eq!(c.verlet_buffer, 0.3);
        assert_eq!(c.reneigh_interval, 20);
        assert_eq!((c.epsilon, c.sigma), (1.0, 1.0));
        c.validate().unwrap();
    }

    #[test]
    fn large_node_count() {
        let c = SimConfig {
            unit_cells: [96, 96, 96],
            ..SimConfig::default()
        };
        assert_eq!(c.total_lattice_sites(), 3_538_944);
    }

    #[test]
    fn layout_parse() {
        assert_eq!("aos".parse::<LayoutKind>(), Ok(LayoutKind::Aos));
        assert_eq!("aosoa:8".parse::<LayoutKind>(), Ok(LayoutKind::Aosoa(8)));
        assert!("aosoa:x".parse::<LayoutKind>().is_err());
        let bad = SimConfig {
            layout: LayoutKind::Aosoa(6),
            ..SimConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config { field: "layout", .. })));
    }

    #[test]
    fn default_is_valid() {
        SimConfig::default().validate().unwrap();
        SimConfig::preset_sd_halfdomain().validate().unwrap();
    }
}
