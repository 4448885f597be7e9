//! Octree block forest with particle-count weights and SFC partitioning.

use std::collections::HashMap;

use crate::comm::pattern::{slab_boundary, slab_index};
use crate::error::{Error, Result};
use crate::geometry::{pbc_correct, Aabb, Vec3};
use crate::layout::Layout;
use crate::particles::ParticleStore;

use super::sfc::{curve_key, CurveKind, MAX_DEPTH};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceConfig {
    pub curve: CurveKind,
    pub refine_threshold: u64,
    pub merge_threshold: u64,
    pub max_depth: u32,
}

impl Default for BalanceConfig {
    fn default() -> Self {
        Self {
            curve: CurveKind::Hilbert,
            refine_threshold: 800,
            merge_threshold: 100,
            max_depth: 6,
        }
    }
}

impl BalanceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.merge_threshold >= self.refine_threshold {
            return Err(Error::config(
                "merge_threshold",
                format!(
                    "must be below the refine threshold ({} >= {})",
                    self.merge_threshold, self.refine_threshold
                ),
            ));
        }
        if self.max_depth > MAX_DEPTH {
            return Err(Error::config("max_depth", format!("at most {MAX_DEPTH}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub level: u32,
    /// Cell coordinates at `level`.
    pub coord: [u32; 3],
    pub aabb: Aabb,
    /// Curve key of the block's first full-depth cell.
    pub sfc_key: u64,
    pub computational_weight: u64,
    pub communication_weight: u64,
    pub owner: usize,
}

impl Block {
    pub fn weight(&self) -> u64 {
        self.computational_weight + self.communication_weight
    }
}

/// The leaves of an octree over the global domain, kept sorted by curve key.
/// Every rank holds an identical copy.
#[derive(Debug, Clone)]
pub struct BlockForest {
    pub global: Aabb,
    pub config: BalanceConfig,
    leaves: Vec<Block>,
}

impl BlockForest {
    /// Uniform forest at `level`.
    pub fn new(global: Aabb, config: BalanceConfig, level: u32) -> Self {
        assert!(level <= config.max_depth, "initial level above max depth");
        let n = 1u32 << level;
        let mut f = Self {
            global,
            config,
            leaves: Vec::with_capacity((n as usize).pow(3)),
        };
        for z in 0..n {
            for y in 0..n {
                for x in 0..n {
                    let b = f.make_block(level, [x, y, z]);
                    f.leaves.push(b);
                }
            }
        }
        f.sort();
        f
    }

    /// Smallest level whose blocks can align with a rank grid of `dims`.
    pub fn level_for_grid(dims: [usize; 3]) -> u32 {
        let m = *dims.iter().max().unwrap();
        m.next_power_of_two().trailing_zeros()
    }

    fn make_block(&self, level: u32, coord: [u32; 3]) -> Block {
        let g = 1usize << level;
        let mut min = Vec3::ZERO;
        let mut max = Vec3::ZERO;
        for d in 0..3 {
            let (lo, hi) = (self.global.min.get(d), self.global.max.get(d));
            min.set(d, slab_boundary(lo, hi, coord[d] as usize, g));
            max.set(d, slab_boundary(lo, hi, coord[d] as usize + 1, g));
        }
        let up = self.config.max_depth - level;
        let key = curve_key(
            self.config.curve,
            coord[0] << up,
            coord[1] << up,
            coord[2] << up,
            self.config.max_depth,
        );
        Block {
            level,
            coord,
            aabb: Aabb::new(min, max),
            sfc_key: (key >> (3 * up)) << (3 * up),
            computational_weight: 0,
            communication_weight: 0,
            owner: 0,
        }
    }

    fn sort(&mut self) {
        self.leaves.sort_by_key(|b| b.sfc_key);
    }

    pub fn leaves(&self) -> &[Block] {
        &self.leaves
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn owners(&self) -> Vec<usize> {
        self.leaves.iter().map(|b| b.owner).collect()
    }

    pub fn set_owners(&mut self, owners: &[usize]) {
        assert_eq!(owners.len(), self.leaves.len());
        for (b, &o) in self.leaves.iter_mut().zip(owners) {
            b.owner = o;
        }
    }

    pub fn set_weights(&mut self, weights: &[(u64, u64)]) {
        assert_eq!(weights.len(), self.leaves.len());
        for (b, &(c, m)) in self.leaves.iter_mut().zip(weights) {
            b.computational_weight = c;
            b.communication_weight = m;
        }
    }

    pub fn total_weight(&self) -> u64 {
        self.leaves.iter().map(Block::weight).sum()
    }

    /// Leaf containing an in-domain position.
    pub fn locate(&self, p: Vec3) -> usize {
        let depth = self.config.max_depth;
        let g = 1usize << depth;
        let mut c = [0u32; 3];
        for (d, cd) in c.iter_mut().enumerate() {
            *cd = slab_index(p.get(d), self.global.min.get(d), self.global.max.get(d), g) as u32;
        }
        let key = curve_key(self.config.curve, c[0], c[1], c[2], depth);
        // leaves cover disjoint key ranges starting at their sfc_key
        let k = self.leaves.partition_point(|b| b.sfc_key <= key);
        debug_assert!(k > 0);
        k - 1
    }

    /// Leaf-wise (computational, communication) counts for one rank: locals
    /// and ghosts binned by their wrapped position.
    pub fn count_weights<L: Layout>(&self, store: &ParticleStore<L>) -> Vec<(u64, u64)> {
        let mut w = vec![(0u64, 0u64); self.leaves.len()];
        for i in 0..store.len() {
            let p = pbc_correct(store.get_position(i), &self.global);
            let k = self.locate(p);
            if i < store.n_local() {
                w[k].0 += 1;
            } else {
                w[k].1 += 1;
            }
        }
        w
    }

    /// Refine leaves whose computational weight exceeds the refine threshold
    /// and merge complete octets whose total stays below the merge
    /// threshold, recounting after every change, until nothing changes.
    /// Returns whether the forest changed.
    pub fn refine_and_merge(
        &mut self,
        mut recount: impl FnMut(&BlockForest) -> Result<Vec<(u64, u64)>>,
    ) -> Result<bool> {
        let mut changed = false;
        loop {
            let mut round = false;
            if self.refine_once() {
                let w = recount(self)?;
                self.set_weights(&w);
                round = true;
            }
            if self.merge_once() {
                let w = recount(self)?;
                self.set_weights(&w);
                round = true;
            }
            if !round {
                return Ok(changed);
            }
            changed = true;
        }
    }

    fn refine_once(&mut self) -> bool {
        let t = self.config.refine_threshold;
        let max = self.config.max_depth;
        if !self.leaves.iter().any(|b| b.computational_weight > t && b.level < max) {
            return false;
        }
        let old = std::mem::take(&mut self.leaves);
        for b in old {
            if b.computational_weight > t && b.level < max {
                for o in 0..8u32 {
                    let c = [
                        2 * b.coord[0] + (o & 1),
                        2 * b.coord[1] + ((o >> 1) & 1),
                        2 * b.coord[2] + (o >> 2),
                    ];
                    let child = self.make_block(b.level + 1, c);
                    self.leaves.push(child);
                }
            } else {
                self.leaves.push(b);
            }
        }
        self.sort();
        true
    }

    fn merge_once(&mut self) -> bool {
        let t = self.config.merge_threshold;
        let mut octets: HashMap<(u32, [u32; 3]), (usize, u64)> = HashMap::new();
        for b in &self.leaves {
            if b.level == 0 {
                continue;
            }
            let parent = (b.level - 1, [b.coord[0] >> 1, b.coord[1] >> 1, b.coord[2] >> 1]);
            let e = octets.entry(parent).or_insert((0, 0));
            e.0 += 1;
            e.1 += b.computational_weight;
        }
        let mut merge: Vec<(u32, [u32; 3])> = octets
            .into_iter()
            .filter(|(_, (n, w))| *n == 8 && *w < t)
            .map(|(k, _)| k)
            .collect();
        if merge.is_empty() {
            return false;
        }
        merge.sort_unstable();
        let old = std::mem::take(&mut self.leaves);
        for b in old {
            let parent = (b.level.wrapping_sub(1), [b.coord[0] >> 1, b.coord[1] >> 1, b.coord[2] >> 1]);
            if b.level == 0 || merge.binary_search(&parent).is_err() {
                self.leaves.push(b);
            }
        }
        for (level, coord) in merge {
            let p = self.make_block(level, coord);
            self.leaves.push(p);
        }
        self.sort();
        true
    }

    /// Assign contiguous runs of leaves (in curve order) to `p` ranks and
    /// record the owners.
    pub fn partition(&mut self, p: usize) -> Vec<usize> {
        let w: Vec<u64> = self.leaves.iter().map(Block::weight).collect();
        let owners = partition_weights(&w, p);
        self.set_owners(&owners);
        owners
    }

    /// Summed block weight per rank under the current owners.
    pub fn rank_weights(&self, p: usize) -> Vec<u64> {
        let mut out = vec![0u64; p];
        for b in &self.leaves {
            out[b.owner] += b.weight();
        }
        out
    }

    /// Owned block boxes per rank.
    pub fn block_sets(&self, p: usize) -> Vec<Vec<Aabb>> {
        let mut sets = vec![Vec::new(); p];
        for b in &self.leaves {
            sets[b.owner].push(b.aabb);
        }
        sets
    }
}

/// Contiguous split of a weight sequence over `p` ranks. A block goes to the
/// rank whose equal share of the total contains the block's weight midpoint,
/// `floor(p * (2 * before + w) / (2 * total))`. Owners are non-decreasing,
/// and scaling all weights by a constant leaves the result unchanged. With
/// zero total weight the blocks are split evenly by count.
pub fn partition_weights(weights: &[u64], p: usize) -> Vec<usize> {
    assert!(p > 0);
    let n = weights.len();
    let total: u128 = weights.iter().map(|&w| w as u128).sum();
    if total == 0 {
        return (0..n).map(|i| i * p / n.max(1)).collect();
    }
    let mut before: u128 = 0;
    weights
        .iter()
        .map(|&w| {
            let w = w as u128;
            let r = (p as u128 * (2 * before + w)) / (2 * total);
            before += w;
            (r as usize).min(p - 1)
        })
        .collect()
}

/// `max / mean` of a set of loads (1 for a perfect balance).
pub fn imbalance_ratio(loads: &[u64]) -> f64 {
    let total: u64 = loads.iter().sum();
    if total == 0 {
        return 1.0;
    }
    let mean = total as f64 / loads.len() as f64;
    *loads.iter().max().unwrap() as f64 / mean
}
