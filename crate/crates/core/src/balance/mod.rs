//! Block-forest load balancing along space-filling curves.

pub mod distributed;
pub mod forest;
pub mod sfc;

pub use distributed::{
    balance_world, crop_domain, gather_weights, migrate_blocks, rebuild_rank_domain, reduce_aabb, BalanceReport,
    MigrationStats, RankLoad,
};
pub use forest::{imbalance_ratio, partition_weights, BalanceConfig, Block, BlockForest};
pub use sfc::{curve_key, hilbert_key, morton_key, CurveKind};
