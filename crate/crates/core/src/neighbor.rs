//! Cell-list binning and Verlet neighbor lists.
//!
//! The cell grid covers the rank's box plus exactly one shell of cells on
//! every side for ghosts. Cells are at least `r = cutoff + buffer` wide, so
//! all partners of a particle within `r` lie in the 27 surrounding cells.

use crate::backend::Backend;
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Vec3};
use crate::layout::{ArrayData, Layout, RowMajor};
use crate::particles::ParticleStore;

#[derive(Debug, Clone)]
pub struct CellGrid {
    /// Min corner of the first inner cell (the rank box min).
    inner_min: Vec3,
    cell_size: Vec3,
    /// Inner cell counts per dimension (without the shell).
    inner_dims: [usize; 3],
    /// Cell counts including the two shell layers.
    dims: [usize; 3],
    /// CSR: particles of cell `c` are `cell_particles[cell_start[c]..cell_start[c + 1]]`.
    cell_start: Vec<u32>,
    cell_particles: Vec<u32>,
    n_binned: usize,
}

impl CellGrid {
    pub fn cell_size(&self) -> Vec3 {
        self.cell_size
    }

    /// Cell counts including the ghost shell.
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn inner_dims(&self) -> [usize; 3] {
        self.inner_dims
    }

    pub fn n_cells(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn n_binned(&self) -> usize {
        self.n_binned
    }

    /// Cell coordinate of `p` relative to the rank box (`floor((p - min) / s)`),
    /// before any clamping. The shell cells are `-1` and `inner_dims`.
    pub fn bin_of(&self, p: Vec3) -> [i64; 3] {
        let mut c = [0i64; 3];
        for (d, cd) in c.iter_mut().enumerate() {
            *cd = ((p.get(d) - self.inner_min.get(d)) / self.cell_size.get(d)).floor() as i64;
        }
        c
    }

    #[inline]
    fn linear(&self, c: [usize; 3]) -> usize {
        (c[2] * self.dims[1] + c[1]) * self.dims[0] + c[0]
    }

    pub fn cell_contents(&self, c: [usize; 3]) -> &[u32] {
        let k = self.linear(c);
        &self.cell_particles[self.cell_start[k] as usize..self.cell_start[k + 1] as usize]
    }

    /// Storage cell of `p`; shell-relative coordinates are clamped into the grid.
    fn storage_cell(&self, p: Vec3) -> ([usize; 3], f64) {
        let raw = self.bin_of(p);
        let mut c = [0usize; 3];
        let mut excess: f64 = 0.0;
        for d in 0..3 {
            let shifted = raw[d] + 1;
            let hi = self.dims[d] as i64 - 1;
            if shifted < 0 {
                excess = excess.max(-shifted as f64);
            } else if shifted > hi {
                excess = excess.max((shifted - hi) as f64);
            }
            c[d] = shifted.clamp(0, hi) as usize;
        }
        (c, excess)
    }
}

/// Bin all locals and ghosts of `store` into a grid over `rank_aabb` with
/// cells of edge at least `r`.
///
/// A local particle more than one shell outside the box is a protocol
/// error (it should have been exchanged). Ghosts beyond the shell are
/// clamped into the outermost cell: they are farther than `r` from every
/// local, so they never become neighbors.
pub fn build_cell_grid<L: Layout>(store: &ParticleStore<L>, rank_aabb: &Aabb, r: f64) -> Result<CellGrid> {
    assert!(r > 0.0, "interaction radius must be positive");
    let ext = if rank_aabb.is_valid() {
        rank_aabb.extent()
    } else {
        Vec3::ZERO
    };
    let inner_min = if rank_aabb.is_valid() {
        rank_aabb.min
    } else {
        Vec3::ZERO
    };
    let mut inner_dims = [1usize; 3];
    let mut cell_size = Vec3::splat(r);
    for d in 0..3 {
        let e = ext.get(d);
        let n = ((e / r).floor() as usize).max(1);
        inner_dims[d] = n;
        cell_size.set(d, (e / n as f64).max(r));
    }
    let dims = [inner_dims[0] + 2, inner_dims[1] + 2, inner_dims[2] + 2];
    let mut grid = CellGrid {
        inner_min,
        cell_size,
        inner_dims,
        dims,
        cell_start: Vec::new(),
        cell_particles: Vec::new(),
        n_binned: 0,
    };

    let n = store.len();
    let mut cell_of = Vec::with_capacity(n);
    for i in 0..n {
        let p = store.get_position(i);
        let (c, excess) = grid.storage_cell(p);
        if excess > 0.0 && i < store.n_local() {
            return Err(Error::OutsideGrid { pos: p, shells: excess });
        }
        cell_of.push(grid.linear(c) as u32);
    }
    let n_cells = grid.n_cells();
    let mut counts = vec![0u32; n_cells + 1];
    for &c in &cell_of {
        counts[c as usize + 1] += 1;
    }
    for k in 0..n_cells {
        counts[k + 1] += counts[k];
    }
    let mut fill = counts.clone();
    let mut cell_particles = vec![0u32; n];
    for (i, &c) in cell_of.iter().enumerate() {
        let slot = &mut fill[c as usize];
        cell_particles[*slot as usize] = i as u32;
        *slot += 1;
    }
    grid.cell_start = counts;
    grid.cell_particles = cell_particles;
    grid.n_binned = n;
    Ok(grid)
}

/// Per-particle Verlet lists for the locals, stored in a 2D array whose
/// layout `NL` is particle-major ([`RowMajor`]) by default.
#[derive(Debug, Clone)]
pub struct NeighborLists<NL: Layout = RowMajor> {
    half: bool,
    n_local: usize,
    capacity: usize,
    counts: Vec<u32>,
    neighbors: ArrayData<u32, NL>,
    ref_positions: Vec<Vec3>,
}

const INITIAL_NEIGHBOR_CAPACITY: usize = 32;

impl<NL: Layout> NeighborLists<NL> {
    /// Lists for zero particles.
    pub fn empty(half: bool) -> Self {
        Self {
            half,
            n_local: 0,
            capacity: INITIAL_NEIGHBOR_CAPACITY,
            counts: Vec::new(),
            neighbors: ArrayData::new(0, INITIAL_NEIGHBOR_CAPACITY),
            ref_positions: Vec::new(),
        }
    }

    pub fn is_half(&self) -> bool {
        self.half
    }

    pub fn n_local(&self) -> usize {
        self.n_local
    }

    /// Per-particle slot count currently allocated.
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    #[inline(always)]
    pub fn count(&self, i: usize) -> usize {
        self.counts[i] as usize
    }

    #[inline(always)]
    pub fn neighbor(&self, i: usize, k: usize) -> usize {
        self.neighbors.get(i, k) as usize
    }

    pub fn neighbors_of(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.count(i)).map(move |k| self.neighbor(i, k))
    }

    pub fn total_pairs(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }

    pub fn ref_positions(&self) -> &[Vec3] {
        &self.ref_positions
    }
}

/// Collect the candidates of local `i` from its 27-cell neighborhood, in a
/// fixed cell and index order.
#[inline]
fn for_each_candidate<L: Layout>(
    store: &ParticleStore<L>,
    grid: &CellGrid,
    i: usize,
    rsq_max: f64,
    half: bool,
    mut emit: impl FnMut(u32),
) {
    let n_local = store.n_local();
    let pi = store.get_position(i);
    let (c, _) = grid.storage_cell(pi);
    for dz in 0..3 {
        let cz = c[2] + dz;
        if cz == 0 || cz > grid.dims[2] {
            continue;
        }
        for dy in 0..3 {
            let cy = c[1] + dy;
            if cy == 0 || cy > grid.dims[1] {
                continue;
            }
            for dx in 0..3 {
                let cx = c[0] + dx;
                if cx == 0 || cx > grid.dims[0] {
                    continue;
                }
                for &j in grid.cell_contents([cx - 1, cy - 1, cz - 1]) {
                    let ju = j as usize;
                    if ju == i {
                        continue;
                    }
                    if half && ju < n_local && ju < i {
                        continue;
                    }
                    let del = pi - store.get_position(ju);
                    if del.norm2() < rsq_max {
                        emit(j);
                    }
                }
            }
        }
    }
}

/// Build Verlet lists for every local particle: all `j != i` (locals and
/// ghosts) with squared distance below `r^2`.
///
/// In half mode a local pair `(i, j)` is stored only at `min(i, j)`; pairs
/// with a ghost are always stored at the local. Lists that overflow their
/// per-particle capacity trigger a regrow and rebuild.
pub fn build_neighbor_lists<L: Layout, NL: Layout, B: Backend>(
    store: &ParticleStore<L>,
    grid: &CellGrid,
    r: f64,
    half: bool,
) -> NeighborLists<NL> {
    build_neighbor_lists_with_capacity::<L, NL, B>(store, grid, r, half, INITIAL_NEIGHBOR_CAPACITY)
}

pub fn build_neighbor_lists_with_capacity<L: Layout, NL: Layout, B: Backend>(
    store: &ParticleStore<L>,
    grid: &CellGrid,
    r: f64,
    half: bool,
    capacity_hint: usize,
) -> NeighborLists<NL> {
    assert_eq!(grid.n_binned(), store.len(), "cell grid is stale");
    let n = store.n_local();
    let rsq = r * r;
    let mut capacity = capacity_hint.max(1);
    loop {
        let mut neighbors = ArrayData::<u32, NL>::new(n, capacity);
        let mut counts = vec![0u32; n];
        if B::PARALLEL {
            let rows = B::map(n, |i| {
                let mut row = Vec::with_capacity(capacity);
                for_each_candidate(store, grid, i, rsq, half, |j| row.push(j));
                row
            });
            for (i, row) in rows.iter().enumerate() {
                counts[i] = row.len() as u32;
                for (k, &j) in row.iter().take(capacity).enumerate() {
                    neighbors.set(i, k, j);
                }
            }
        } else {
            for (i, count) in counts.iter_mut().enumerate() {
                let mut k = 0usize;
                for_each_candidate(store, grid, i, rsq, half, |j| {
                    if k < capacity {
                        neighbors.set(i, k, j);
                    }
                    k += 1;
                });
                *count = k as u32;
            }
        }
        let max = counts.iter().copied().max().unwrap_or(0) as usize;
        if max > capacity {
            capacity = max.next_power_of_two();
            continue;
        }
        return NeighborLists {
            half,
            n_local: n,
            capacity,
            counts,
            neighbors,
            ref_positions: (0..n).map(|i| store.get_position(i)).collect(),
        };
    }
}

/// Largest displacement of any local particle since the lists were built.
pub fn max_displacement_since_rebuild<L: Layout, NL: Layout, B: Backend>(
    store: &ParticleStore<L>,
    lists: &NeighborLists<NL>,
) -> f64 {
    let n = store.n_local().min(lists.ref_positions.len());
    B::reduce(
        n,
        0.0f64,
        |i| (store.get_position(i) - lists.ref_positions[i]).norm(),
        f64::max,
    )
}
