//! Shared fixtures for the criterion benches.

use nanopair_core::backend::Serial;
use nanopair_core::comm::{define_borders, Endpoint, RankWorld};
use nanopair_core::config::SimConfig;
use nanopair_core::layout::{Layout, RowMajor};
use nanopair_core::neighbor::{build_cell_grid, build_neighbor_lists, CellGrid, NeighborLists};
use nanopair_core::particles::{lattice_sites, ParticleStore};

/// A single-rank FCC system with its periodic ghost shell, binned and listed.
pub struct System<L: Layout> {
    pub config: SimConfig,
    pub store: ParticleStore<L>,
    pub grid: CellGrid,
    pub lists: NeighborLists<RowMajor>,
}

pub fn lattice_system<L: Layout>(cells: usize, half: bool) -> System<L> {
    let config = SimConfig {
        unit_cells: [cells; 3],
        half_neighbor: half,
        ..SimConfig::default()
    };
    let r = config.interaction_radius();
    let mut store = ParticleStore::<L>::from_particles(&lattice_sites(&config));
    let mut world = RankWorld::grid(Endpoint::solo(), [1, 1, 1], config.global_domain(), r).expect("rank world");
    define_borders(&mut world, &mut store, false).expect("ghost shell");
    let grid = build_cell_grid(&store, &world.pattern.grid_aabb(), r).expect("cell grid");
    let lists = build_neighbor_lists::<L, RowMajor, Serial>(&store, &grid, r, half);
    System {
        config,
        store,
        grid,
        lists,
    }
}
