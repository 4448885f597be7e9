//! Communication neighborhoods: the 6-stencil over a regular rank grid and
//! the block neighborhood used once ranks own arbitrary sets of blocks.

use crate::error::{Error, Result};
use crate::geometry::{aabb_union, Aabb, Vec3};

/// Near-cubic factorization of `p` ranks over `global`: the grid whose
/// subdomains have the least surface area. Ties prefer more ranks along x,
/// then y.
pub fn rank_grid_dims(p: usize, global: &Aabb) -> [usize; 3] {
    assert!(p > 0);
    let e = global.extent();
    let mut best = [p, 1, 1];
    let mut best_area = f64::INFINITY;
    for gx in (1..=p).rev() {
        if p % gx != 0 {
            continue;
        }
        for gy in (1..=p / gx).rev() {
            if (p / gx) % gy != 0 {
                continue;
            }
            let gz = p / gx / gy;
            let (sx, sy, sz) = (e.x / gx as f64, e.y / gy as f64, e.z / gz as f64);
            let area = sx * sy + sy * sz + sx * sz;
            if area < best_area * (1.0 - 1e-12) {
                best_area = area;
                best = [gx, gy, gz];
            }
        }
    }
    best
}

/// Boundary `k` of `g` equal slabs of `[lo, hi)`. Neighboring ranks evaluate
/// the same expression, so shared faces are bitwise identical.
pub fn slab_boundary(lo: f64, hi: f64, k: usize, g: usize) -> f64 {
    if k == 0 {
        lo
    } else if k >= g {
        hi
    } else {
        lo + (hi - lo) * k as f64 / g as f64
    }
}

/// Index `k` of the slab `[boundary(k), boundary(k + 1))` holding `x`,
/// clamped to `[0, g)`. Consistent with [`slab_boundary`] bit for bit.
pub fn slab_index(x: f64, lo: f64, hi: f64, g: usize) -> usize {
    let mut k = (((x - lo) / (hi - lo)) * g as f64).floor().clamp(0.0, (g - 1) as f64) as usize;
    // the float guess can be one slab off near a boundary
    while k > 0 && x < slab_boundary(lo, hi, k, g) {
        k -= 1;
    }
    while k + 1 < g && x >= slab_boundary(lo, hi, k + 1, g) {
        k += 1;
    }
    k
}

pub fn grid_rank(dims: [usize; 3], c: [usize; 3]) -> usize {
    (c[2] * dims[1] + c[1]) * dims[0] + c[0]
}

pub fn grid_coord(dims: [usize; 3], rank: usize) -> [usize; 3] {
    [rank % dims[0], (rank / dims[0]) % dims[1], rank / (dims[0] * dims[1])]
}

/// Ownership box of grid cell `c`.
pub fn grid_box(dims: [usize; 3], c: [usize; 3], global: &Aabb) -> Aabb {
    let mut min = Vec3::ZERO;
    let mut max = Vec3::ZERO;
    for d in 0..3 {
        let (lo, hi) = (global.min.get(d), global.max.get(d));
        min.set(d, slab_boundary(lo, hi, c[d], dims[d]));
        max.set(d, slab_boundary(lo, hi, c[d] + 1, dims[d]));
    }
    Aabb::new(min, max)
}

/// The regular-grid pattern. Stage `d` handles dimension `d` with two
/// entries: entry 0 sends toward `-d` and receives from `+d`, entry 1 the
/// reverse.
#[derive(Debug, Clone)]
pub struct SixStencil {
    pub dims: [usize; 3],
    pub coord: [usize; 3],
    pub rank: usize,
    pub global: Aabb,
    pub spacing: f64,
    pub bounds: Aabb,
    /// `peers[d] = [minus, plus]`.
    pub peers: [[usize; 2]; 3],
}

impl SixStencil {
    /// Rank the entry sends to.
    pub fn send_rank(&self, d: usize, e: usize) -> usize {
        self.peers[d][e]
    }

    /// Rank the entry receives from.
    pub fn recv_rank(&self, d: usize, e: usize) -> usize {
        self.peers[d][1 - e]
    }

    /// Periodic shift applied to ghosts sent by entry `e` of stage `d`.
    pub fn ghost_shift(&self, d: usize, e: usize) -> Vec3 {
        let mut s = Vec3::ZERO;
        let len = self.global.extent().get(d);
        if e == 0 && self.coord[d] == 0 {
            s.set(d, len);
        } else if e == 1 && self.coord[d] + 1 == self.dims[d] {
            s.set(d, -len);
        }
        s
    }

    /// The distinct peer ranks.
    pub fn peer_set(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.peers.iter().flatten().copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Rank owning an in-domain position.
    pub fn owner_of(&self, p: Vec3) -> usize {
        let mut c = [0usize; 3];
        for (d, cd) in c.iter_mut().enumerate() {
            *cd = slab_index(p.get(d), self.global.min.get(d), self.global.max.get(d), self.dims[d]);
        }
        grid_rank(self.dims, c)
    }
}

pub fn six_stencil_pattern(
    dims: [usize; 3],
    this_rank: usize,
    rank_count: usize,
    global: &Aabb,
    spacing: f64,
) -> Result<SixStencil> {
    if dims.iter().product::<usize>() != rank_count {
        return Err(Error::config(
            "rank_grid",
            format!("{}x{}x{} does not have {rank_count} ranks", dims[0], dims[1], dims[2]),
        ));
    }
    assert!(this_rank < rank_count);
    let e = global.extent();
    for d in 0..3 {
        if e.get(d) / (dims[d] as f64) < spacing {
            return Err(Error::config(
                "rank_grid",
                format!(
                    "subdomain extent {:.4} along {} is below the ghost width {spacing}",
                    e.get(d) / dims[d] as f64,
                    ["x", "y", "z"][d]
                ),
            ));
        }
    }
    let coord = grid_coord(dims, this_rank);
    let mut peers = [[0usize; 2]; 3];
    for d in 0..3 {
        let g = dims[d];
        let mut m = coord;
        m[d] = (coord[d] + g - 1) % g;
        let mut p = coord;
        p[d] = (coord[d] + 1) % g;
        peers[d] = [grid_rank(dims, m), grid_rank(dims, p)];
    }
    Ok(SixStencil {
        dims,
        coord,
        rank: this_rank,
        global: *global,
        spacing,
        bounds: grid_box(dims, coord, global),
        peers,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborBlocks {
    pub rank: usize,
    pub blocks: Vec<Aabb>,
    /// Union of `blocks`, for quick rejection.
    pub hull: Aabb,
}

impl NeighborBlocks {
    pub fn new(rank: usize, blocks: Vec<Aabb>) -> Self {
        let hull = blocks.iter().fold(Aabb::empty(), |a, b| aabb_union(&a, b));
        Self { rank, blocks, hull }
    }

    pub fn contains(&self, p: Vec3) -> bool {
        self.hull.contains(p) && self.blocks.iter().any(|b| b.contains(p))
    }

    /// `p` is strictly within `d` of some block (per-dimension distance).
    pub fn within(&self, p: Vec3, d: f64) -> bool {
        self.hull.within_open_margin(p, d) && self.blocks.iter().any(|b| b.within_open_margin(p, d))
    }
}

/// A rank's ownership region and communication neighborhood.
#[derive(Debug, Clone)]
pub struct RankDomain {
    pub rank: usize,
    /// Owned blocks; ownership tests use these.
    pub blocks: Vec<Aabb>,
    /// Union of the owned blocks.
    pub bounds: Aabb,
    /// Box the cell grid is built over.
    pub grid_aabb: Aabb,
    /// Ranks (possibly including this one) with blocks within `spacing`
    /// under periodic images, in ascending rank order.
    pub neighbors: Vec<NeighborBlocks>,
    pub spacing: f64,
}

impl RankDomain {
    pub fn owns(&self, p: Vec3) -> bool {
        self.bounds.contains(p) && self.blocks.iter().any(|b| b.contains(p))
    }

    /// Domain of a regular rank grid expressed as one block per rank.
    pub fn from_grid(dims: [usize; 3], this_rank: usize, global: &Aabb, spacing: f64) -> Self {
        let n = dims.iter().product::<usize>();
        let boxes: Vec<Vec<Aabb>> = (0..n).map(|r| vec![grid_box(dims, grid_coord(dims, r), global)]).collect();
        Self::from_block_sets(&boxes, this_rank, global, spacing)
    }

    /// Build the domain of `this_rank` from every rank's block list.
    pub fn from_block_sets(sets: &[Vec<Aabb>], this_rank: usize, global: &Aabb, spacing: f64) -> Self {
        let blocks = sets[this_rank].clone();
        let bounds = blocks.iter().fold(Aabb::empty(), |a, b| aabb_union(&a, b));
        let neighbors = neighbor_table(sets, this_rank, global, spacing);
        Self {
            rank: this_rank,
            blocks,
            bounds,
            grid_aabb: bounds,
            neighbors,
            spacing,
        }
    }
}

fn shifts_within(a: &Aabb, b: &Aabb, global: &Aabb, spacing: f64, skip_zero: bool) -> bool {
    let ext = global.extent();
    for dz in -1i32..=1 {
        for dy in -1i32..=1 {
            for dx in -1i32..=1 {
                if skip_zero && dx == 0 && dy == 0 && dz == 0 {
                    continue;
                }
                let s = Vec3::new(dx as f64 * ext.x, dy as f64 * ext.y, dz as f64 * ext.z);
                if a.gap(&b.translate(s)) < spacing {
                    return true;
                }
            }
        }
    }
    false
}

/// Every rank with a block whose periodic image comes within `spacing` of a
/// block of `this_rank` in every dimension. This rank lists itself only
/// through a non-zero image.
pub fn neighbor_table(sets: &[Vec<Aabb>], this_rank: usize, global: &Aabb, spacing: f64) -> Vec<NeighborBlocks> {
    let mine = &sets[this_rank];
    let mut out = Vec::new();
    for (q, theirs) in sets.iter().enumerate() {
        let near = mine
            .iter()
            .any(|a| theirs.iter().any(|b| shifts_within(a, b, global, spacing, q == this_rank)));
        if near {
            out.push(NeighborBlocks::new(q, theirs.clone()));
        }
    }
    out
}

#[derive(Debug, Clone)]
pub enum CommPattern {
    SixStencil(SixStencil),
    Blocks(RankDomain),
}

impl CommPattern {
    pub fn rank(&self) -> usize {
        match self {
            CommPattern::SixStencil(s) => s.rank,
            CommPattern::Blocks(d) => d.rank,
        }
    }

    pub fn spacing(&self) -> f64 {
        match self {
            CommPattern::SixStencil(s) => s.spacing,
            CommPattern::Blocks(d) => d.spacing,
        }
    }

    pub fn owns(&self, p: Vec3) -> bool {
        match self {
            CommPattern::SixStencil(s) => s.bounds.contains(p),
            CommPattern::Blocks(d) => d.owns(p),
        }
    }

    /// Box the cell grid covers.
    pub fn grid_aabb(&self) -> Aabb {
        match self {
            CommPattern::SixStencil(s) => s.bounds,
            CommPattern::Blocks(d) => d.grid_aabb,
        }
    }

    /// Distinct ranks this one exchanges messages with.
    pub fn peer_ranks(&self) -> Vec<usize> {
        match self {
            CommPattern::SixStencil(s) => s.peer_set(),
            CommPattern::Blocks(d) => d.neighbors.iter().map(|n| n.rank).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(l: f64) -> Aabb {
        Aabb::new(Vec3::ZERO, Vec3::splat(l))
    }

    #[test]
    fn factorization_is_near_cubic() {
        let g = cube(10.0);
        assert_eq!(rank_grid_dims(1, &g), [1, 1, 1]);
        assert_eq!(rank_grid_dims(2, &g), [2, 1, 1]);
        assert_eq!(rank_grid_dims(4, &g), [2, 2, 1]);
        assert_eq!(rank_grid_dims(8, &g), [2, 2, 2]);
        assert_eq!(rank_grid_dims(12, &g), [3, 2, 2]);
        let long = Aabb::new(Vec3::ZERO, Vec3::new(40.0, 10.0, 10.0));
        assert_eq!(rank_grid_dims(4, &long), [4, 1, 1]);
    }

    #[test]
    fn single_rank_peers_are_all_self() {
        let s = six_stencil_pattern([1, 1, 1], 0, 1, &cube(8.0), 1.0).unwrap();
        assert_eq!(s.peers, [[0, 0]; 3]);
        assert_eq!(s.ghost_shift(0, 0), Vec3::new(8.0, 0.0, 0.0));
        assert_eq!(s.ghost_shift(2, 1), Vec3::new(0.0, 0.0, -8.0));
    }

    #[test]
    fn two_ranks_along_x_face_each_other_twice() {
        let s = six_stencil_pattern([2, 1, 1], 0, 2, &cube(8.0), 1.0).unwrap();
        assert_eq!(s.peers[0], [1, 1]);
        assert_eq!(s.peers[1], [0, 0]);
        assert_eq!(s.bounds, Aabb::new(Vec3::ZERO, Vec3::new(4.0, 8.0, 8.0)));
        assert_eq!(s.ghost_shift(0, 0), Vec3::new(8.0, 0.0, 0.0));
        assert_eq!(s.ghost_shift(0, 1), Vec3::ZERO);
    }

    #[test]
    fn grid_adjacency_on_2x2x2() {
        let g = cube(8.0);
        for r in 0..8 {
            let s = six_stencil_pattern([2, 2, 2], r, 8, &g, 1.0).unwrap();
            let c = [r & 1, (r >> 1) & 1, r >> 2];
            for d in 0..3 {
                // with two ranks per dimension both directions reach the flipped coordinate
                let flipped = r ^ (1 << d);
                assert_eq!(s.peers[d], [flipped, flipped]);
                assert_eq!(s.coord[d], c[d]);
            }
            assert_eq!(s.peer_set().len(), 3);
        }
    }

    #[test]
    fn bad_grids_are_config_errors() {
        let g = cube(8.0);
        assert!(matches!(six_stencil_pattern([2, 2, 1], 0, 8, &g, 1.0), Err(Error::Config { .. })));
        assert!(matches!(six_stencil_pattern([8, 1, 1], 0, 8, &g, 1.5), Err(Error::Config { .. })));
    }

    #[test]
    fn rank_boxes_tile_the_domain() {
        let g = Aabb::new(Vec3::splat(-1.0), Vec3::new(12.3, 7.1, 9.9));
        let dims = [3, 2, 4];
        let boxes: Vec<Aabb> = (0..24).map(|r| grid_box(dims, grid_coord(dims, r), &g)).collect();
        let vol: f64 = boxes.iter().map(|b| b.volume()).sum();
        assert!((vol - g.volume()).abs() < 1e-9 * g.volume());
        for i in 0..24 {
            for j in 0..i {
                assert!(!boxes[i].interiors_overlap(&boxes[j]));
            }
        }
        let s = six_stencil_pattern(dims, 0, 24, &g, 0.5).unwrap();
        for (r, b) in boxes.iter().enumerate() {
            assert_eq!(s.owner_of(b.min), r);
            assert_eq!(s.owner_of(b.center()), r);
        }
    }

    #[test]
    fn block_table_of_a_grid_matches_stencil_peers() {
        let g = cube(8.0);
        for dims in [[1, 1, 1], [2, 1, 1], [2, 2, 1], [2, 2, 2]] {
            let n: usize = dims.iter().product();
            for r in 0..n {
                let s = six_stencil_pattern(dims, r, n, &g, 1.0).unwrap();
                let d = RankDomain::from_grid(dims, r, &g, 1.0);
                let table: Vec<usize> = d.neighbors.iter().map(|n| n.rank).collect();
                // the block table also has diagonal neighbors, which the
                // stencil reaches by forwarding
                for p in s.peer_set() {
                    assert!(table.contains(&p), "{dims:?} rank {r}: stencil peer {p} missing");
                }
                assert_eq!(table.contains(&r), dims.contains(&1));
            }
        }
    }

    #[test]
    fn neighbor_table_is_symmetric() {
        let g = cube(12.0);
        let sets: Vec<Vec<Aabb>> = vec![
            vec![Aabb::new(Vec3::ZERO, Vec3::new(6.0, 12.0, 12.0))],
            vec![Aabb::new(Vec3::new(6.0, 0.0, 0.0), Vec3::new(12.0, 6.0, 12.0))],
            vec![Aabb::new(Vec3::new(6.0, 6.0, 0.0), Vec3::new(9.0, 12.0, 12.0))],
            vec![Aabb::new(Vec3::new(9.0, 6.0, 0.0), Vec3::new(12.0, 12.0, 12.0))],
        ];
        for a in 0..4 {
            let ta: Vec<usize> = neighbor_table(&sets, a, &g, 1.0).iter().map(|n| n.rank).collect();
            for b in 0..4 {
                let tb: Vec<usize> = neighbor_table(&sets, b, &g, 1.0).iter().map(|n| n.rank).collect();
                assert_eq!(ta.contains(&b), tb.contains(&a));
            }
        }
        // rank 2 spans y fully inside [6, 12) but wraps in z onto itself
        assert!(neighbor_table(&sets, 2, &g, 1.0).iter().any(|n| n.rank == 2));
    }
}
