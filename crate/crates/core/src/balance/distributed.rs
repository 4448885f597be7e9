//! Collective balancing steps: weight reduction, particle migration and the
//! per-rank domain rebuild.

use crate::backend::Backend;
use crate::comm::pattern::{CommPattern, RankDomain};
use crate::comm::transport::Endpoint;
use crate::comm::wire::{decode_expect, encode, MessageKind};
use crate::comm::{define_borders, exchange, RankWorld};
use crate::error::{Error, Result};
use crate::geometry::{aabb_union, pbc_correct, Aabb, Vec3};
use crate::layout::Layout;
use crate::particles::ParticleStore;

use super::forest::{imbalance_ratio, BalanceConfig, BlockForest};

/// Global per-leaf weights: this rank's counts summed over all ranks.
pub fn gather_weights<L: Layout>(
    ep: &mut Endpoint,
    forest: &BlockForest,
    store: &ParticleStore<L>,
) -> Result<Vec<(u64, u64)>> {
    let local = forest.count_weights(store);
    let flat: Vec<u64> = local.iter().flat_map(|&(c, m)| [c, m]).collect();
    let sum = ep.allreduce_sum_u64(&flat)?;
    Ok(sum.chunks_exact(2).map(|c| (c[0], c[1])).collect())
}

/// Tight bounds of the local particles, folded into a seed (typically the
/// inverted ownership box, so an empty rank yields an inverted box).
pub fn reduce_aabb<L: Layout, B: Backend>(store: &ParticleStore<L>, seed: Aabb) -> Aabb {
    B::reduce(
        store.n_local(),
        seed,
        |i| Aabb::from_point(store.get_position(i)),
        |a, b| aabb_union(&a, &b),
    )
}

/// Shrink the cell-grid box to the local particles plus `spacing`.
pub fn crop_domain<L: Layout, B: Backend>(domain: &mut RankDomain, store: &ParticleStore<L>) {
    domain.grid_aabb = if store.n_local() == 0 {
        Aabb::empty()
    } else {
        reduce_aabb::<L, B>(store, Aabb::inverted(&domain.bounds)).expand(domain.spacing)
    };
}

/// Ownership blocks, neighbor table and cropped grid box of `this_rank`
/// under the forest's current owners.
pub fn rebuild_rank_domain<L: Layout, B: Backend>(
    forest: &BlockForest,
    this_rank: usize,
    rank_count: usize,
    store: &ParticleStore<L>,
    spacing: f64,
) -> RankDomain {
    let sets = forest.block_sets(rank_count);
    let mut d = RankDomain::from_block_sets(&sets, this_rank, &forest.global, spacing);
    crop_domain::<L, B>(&mut d, store);
    d
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MigrationStats {
    pub sent: u64,
    pub received: u64,
    pub messages: u64,
}

/// Send every local particle to the owner of the leaf containing it.
///
/// Per-destination counts are agreed collectively first, so only ranks that
/// actually exchange particles talk to each other. If `old_owners` equals the
/// forest's owners nothing moves and no message is sent.
pub fn migrate_blocks<L: Layout>(
    ep: &mut Endpoint,
    forest: &BlockForest,
    old_owners: Option<&[usize]>,
    store: &mut ParticleStore<L>,
) -> Result<MigrationStats> {
    if old_owners.is_some_and(|o| o == forest.owners()) {
        return Ok(MigrationStats::default());
    }
    let p = ep.size();
    let me = ep.rank();
    store.clear_ghosts();
    let mut out: Vec<Vec<f64>> = vec![Vec::new(); p];
    let mut i = store.n_local();
    while i > 0 {
        i -= 1;
        let q = pbc_correct(store.get_position(i), &forest.global);
        let owner = forest.leaves()[forest.locate(q)].owner;
        if owner != me {
            let (_, v) = store.remove_local(i);
            out[owner].extend_from_slice(&[q.x, q.y, q.z, v.x, v.y, v.z]);
        }
    }
    let counts: Vec<u64> = out.iter().map(|b| (b.len() / 6) as u64).collect();
    let all = ep.allgather_u64(&counts)?;
    let mut stats = MigrationStats::default();
    for (dst, buf) in out.iter().enumerate() {
        if !buf.is_empty() {
            ep.send(dst, encode(MessageKind::Migration, 6, buf));
            stats.sent += counts[dst];
            stats.messages += 1;
        }
    }
    for (src, row) in all.iter().enumerate() {
        let expect = row[me] as usize;
        if expect == 0 || src == me {
            continue;
        }
        let pk = decode_expect(&ep.recv(src)?, MessageKind::Migration, 6)?;
        if pk.count != expect {
            return Err(Error::protocol(
                me,
                format!("block transfer from rank {src}: {} particles, {expect} announced", pk.count),
            ));
        }
        store.ensure_capacity(store.n_local() + pk.count);
        for k in 0..pk.count {
            let r = pk.record(k);
            store.append_local(Vec3::new(r[0], r[1], r[2]), Vec3::new(r[3], r[4], r[5]));
        }
        stats.received += expect as u64;
    }
    for i in 0..store.n_local() {
        let q = store.get_position(i);
        if forest.leaves()[forest.locate(q)].owner != me {
            return Err(Error::protocol(me, format!("migrated particle at {q:?} landed on the wrong rank")));
        }
    }
    Ok(stats)
}

/// Per-rank load measured directly from the particle stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RankLoad {
    pub local: u64,
    pub ghost: u64,
}

#[derive(Debug, Clone, Default)]
pub struct BalanceReport {
    pub leaves: usize,
    pub min_level: u32,
    pub max_level: u32,
    pub before: Vec<RankLoad>,
    pub after: Vec<RankLoad>,
    /// Block-weight sums per rank under the final assignment.
    pub block_weights: Vec<u64>,
    pub migrated: u64,
    pub migration_messages: u64,
}

impl BalanceReport {
    /// `max / mean` of the local particle counts before balancing.
    pub fn ratio_before(&self) -> f64 {
        imbalance_ratio(&self.before.iter().map(|l| l.local).collect::<Vec<_>>())
    }

    pub fn ratio_after(&self) -> f64 {
        imbalance_ratio(&self.after.iter().map(|l| l.local).collect::<Vec<_>>())
    }
}

fn gather_loads<L: Layout>(ep: &mut Endpoint, store: &ParticleStore<L>) -> Result<Vec<RankLoad>> {
    let all = ep.allgather_u64(&[store.n_local() as u64, store.n_ghost() as u64])?;
    Ok(all.into_iter().map(|v| RankLoad { local: v[0], ghost: v[1] }).collect())
}

/// Balance the particles of every rank collectively and switch the world to
/// the block-neighborhood pattern.
///
/// The forest starts at `initial_level`, is refined and merged on the
/// particle counts, then partitioned along the curve on computational plus
/// communication weight. Particles migrate to their new owners and each rank
/// rebuilds its domain. Ghosts are cleared on return.
pub fn balance_world<L: Layout, B: Backend>(
    world: &mut RankWorld,
    store: &mut ParticleStore<L>,
    config: &BalanceConfig,
    initial_level: u32,
) -> Result<(BlockForest, BalanceReport)> {
    config.validate()?;
    let spacing = world.pattern.spacing();
    exchange(world, store)?;
    define_borders(world, store, false)?;
    let before = gather_loads(&mut world.endpoint, store)?;

    let mut forest = BlockForest::new(world.global, *config, initial_level);
    let w = gather_weights(&mut world.endpoint, &forest, store)?;
    forest.set_weights(&w);
    {
        let ep = &mut world.endpoint;
        let s = &*store;
        forest.refine_and_merge(|f| gather_weights(ep, f, s))?;
    }
    let p = world.size();
    forest.partition(p);

    let stats = migrate_blocks(&mut world.endpoint, &forest, None, store)?;
    let domain = rebuild_rank_domain::<L, B>(&forest, world.rank(), p, store, spacing);
    world.pattern = CommPattern::Blocks(domain);

    exchange(world, store)?;
    define_borders(world, store, false)?;
    let after = gather_loads(&mut world.endpoint, store)?;
    store.clear_ghosts();

    let moved = world.endpoint.allreduce_sum_u64(&[stats.sent, stats.messages])?;
    let report = BalanceReport {
        leaves: forest.len(),
        min_level: forest.leaves().iter().map(|b| b.level).min().unwrap_or(0),
        max_level: forest.leaves().iter().map(|b| b.level).max().unwrap_or(0),
        before,
        after,
        block_weights: forest.rank_weights(p),
        migrated: moved[0],
        migration_messages: moved[1],
    };
    Ok((forest, report))
}
