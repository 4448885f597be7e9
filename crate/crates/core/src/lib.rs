pub mod config;
pub mod error;
pub mod geometry;
pub mod layout;
pub mod backend;
pub mod particles;
pub mod neighbor;
pub mod potential;
pub mod comm;
pub mod balance;
pub mod driver;

pub use backend::{Backend, Parallel, Serial};
pub use config::{BackendKind, LatticeFill, LayoutKind, PotentialKind, SimConfig};
pub use error::{Error, Result};
pub use geometry::{Aabb, Vec3};
pub use layout::{Clustered, ColumnMajor, Layout, RowMajor};
pub use particles::ParticleStore;
