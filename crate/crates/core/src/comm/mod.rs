//! Halo exchange over simulated ranks.

pub mod halo;
pub mod pattern;
pub mod transport;
pub mod wire;

pub use halo::{define_borders, exchange, synchronize, BorderPlan, PlanEntry, RankWorld};
pub use pattern::{
    grid_box, grid_coord, grid_rank, neighbor_table, rank_grid_dims, six_stencil_pattern, slab_boundary, slab_index, CommPattern, NeighborBlocks,
    RankDomain, SixStencil,
};
pub use transport::{run_ranks, Bus, Endpoint};
pub use wire::{decode, encode, MessageKind, Packet};
