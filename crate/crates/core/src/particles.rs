//! Layout-parameterized particle storage.
//!
//! Locals occupy indices `[0, n_local)` and ghosts the contiguous range
//! `[n_local, n_local + n_ghost)` that follows them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{LatticeFill, SimConfig};
use crate::geometry::{minimum_image, pbc_correct, Aabb, Vec3};
use crate::layout::{ArrayData, Layout};

/// Where a ghost came from: the sending rank and the position of the
/// particle in that rank's message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GhostSource {
    pub owner_rank: usize,
    pub remote_index: usize,
}

const MIN_CAPACITY: usize = 16;

#[derive(Debug, Clone)]
pub struct ParticleStore<L: Layout> {
    positions: ArrayData<f64, L>,
    velocities: ArrayData<f64, L>,
    forces: ArrayData<f64, L>,
    n_local: usize,
    n_ghost: usize,
    ghost_source: Vec<GhostSource>,
}

impl<L: Layout> Default for ParticleStore<L> {
    fn default() -> Self {
        Self::with_capacity(MIN_CAPACITY)
    }
}

impl<L: Layout> ParticleStore<L> {
    pub fn with_capacity(capacity: usize) -> Self {
        let capacity = capacity.max(MIN_CAPACITY);
        Self {
            positions: ArrayData::new(capacity, 3),
            velocities: ArrayData::new(capacity, 3),
            forces: ArrayData::new(capacity, 3),
            n_local: 0,
            n_ghost: 0,
            ghost_source: Vec::new(),
        }
    }

    /// Build a store from `(position, velocity)` pairs, forces zeroed.
    pub fn from_particles(particles: &[(Vec3, Vec3)]) -> Self {
        let mut s = Self::with_capacity(particles.len());
        for &(p, v) in particles {
            s.append_local(p, v);
        }
        s
    }

    #[inline(always)]
    pub fn n_local(&self) -> usize {
        self.n_local
    }

    #[inline(always)]
    pub fn n_ghost(&self) -> usize {
        self.n_ghost
    }

    /// Locals plus ghosts.
    #[inline(always)]
    pub fn len(&self) -> usize {
        self.n_local + self.n_ghost
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn capacity(&self) -> usize {
        self.positions.size_x()
    }

    pub fn positions(&self) -> &ArrayData<f64, L> {
        &self.positions
    }

    pub fn forces(&self) -> &ArrayData<f64, L> {
        &self.forces
    }

    pub fn forces_mut(&mut self) -> &mut ArrayData<f64, L> {
        &mut self.forces
    }

    /// Grow (geometrically) so at least `n` particles fit.
    pub fn ensure_capacity(&mut self, n: usize) {
        let cap = self.capacity();
        if n <= cap {
            return;
        }
        let mut next = cap.max(MIN_CAPACITY);
        while next < n {
            next *= 2;
        }
        self.positions.resize_x(next);
        self.velocities.resize_x(next);
        self.forces.resize_x(next);
    }

    #[inline(always)]
    pub fn get_position(&self, i: usize) -> Vec3 {
        self.positions.get_vec3(i)
    }

    #[inline(always)]
    pub fn set_position(&mut self, i: usize, p: Vec3) {
        self.positions.set_vec3(i, p)
    }

    #[inline(always)]
    pub fn get_velocity(&self, i: usize) -> Vec3 {
        self.velocities.get_vec3(i)
    }

    #[inline(always)]
    pub fn set_velocity(&mut self, i: usize, v: Vec3) {
        self.velocities.set_vec3(i, v)
    }

    #[inline(always)]
    pub fn get_force(&self, i: usize) -> Vec3 {
        self.forces.get_vec3(i)
    }

    #[inline(always)]
    pub fn set_force(&mut self, i: usize, f: Vec3) {
        self.forces.set_vec3(i, f)
    }

    #[inline(always)]
    pub fn add_force(&mut self, i: usize, f: Vec3) {
        self.forces.add_vec3(i, f)
    }

    pub fn zero_forces(&mut self) {
        self.forces.fill(0.0);
    }

    pub fn ghost_source(&self, g: usize) -> GhostSource {
        self.ghost_source[g]
    }

    fn copy_slot(&mut self, from: usize, to: usize) {
        let (p, v, f) = (self.get_position(from), self.get_velocity(from), self.get_force(from));
        self.set_position(to, p);
        self.set_velocity(to, v);
        self.set_force(to, f);
    }

    /// Append a local particle. If ghosts are present, the first ghost is
    /// moved to the end of the ghost region to make room.
    pub fn append_local(&mut self, pos: Vec3, vel: Vec3) -> usize {
        self.ensure_capacity(self.len() + 1);
        let i = self.n_local;
        if self.n_ghost > 0 {
            self.copy_slot(i, self.len());
            self.ghost_source.rotate_left(1);
        }
        self.set_position(i, pos);
        self.set_velocity(i, vel);
        self.set_force(i, Vec3::ZERO);
        self.n_local += 1;
        i
    }

    /// Remove local `i` by moving the last local into its slot. Particle
    /// order is not preserved. The last ghost fills the vacated local slot
    /// so the ghost region stays contiguous.
    pub fn remove_local(&mut self, i: usize) -> (Vec3, Vec3) {
        assert!(i < self.n_local, "remove_local({i}) with n_local = {}", self.n_local);
        let removed = (self.get_position(i), self.get_velocity(i));
        let last = self.n_local - 1;
        if i != last {
            self.copy_slot(last, i);
        }
        self.n_local -= 1;
        if self.n_ghost > 0 {
            let last_ghost = self.n_local + self.n_ghost;
            // slot `last` is now the first ghost position; refill it from the end
            self.copy_slot(last_ghost, last);
            self.ghost_source.rotate_right(1);
        }
        removed
    }

    /// Set the number of ghosts; new ghost slots are zeroed.
    pub fn resize_ghost_region(&mut self, new_ghost_count: usize) {
        let start = self.n_local;
        self.ensure_capacity(start + new_ghost_count);
        for g in self.n_ghost..new_ghost_count {
            self.set_position(start + g, Vec3::ZERO);
            self.set_velocity(start + g, Vec3::ZERO);
            self.set_force(start + g, Vec3::ZERO);
        }
        self.n_ghost = new_ghost_count;
        self.ghost_source.resize(new_ghost_count, GhostSource::default());
    }

    pub fn clear_ghosts(&mut self) {
        self.resize_ghost_region(0);
    }

    pub fn push_ghost(&mut self, pos: Vec3, source: GhostSource) -> usize {
        let i = self.len();
        self.ensure_capacity(i + 1);
        self.set_position(i, pos);
        self.set_velocity(i, Vec3::ZERO);
        self.set_force(i, Vec3::ZERO);
        self.n_ghost += 1;
        self.ghost_source.push(source);
        i
    }

    /// `(position, velocity)` of every local particle in storage order.
    pub fn local_states(&self) -> Vec<(Vec3, Vec3)> {
        (0..self.n_local)
            .map(|i| (self.get_position(i), self.get_velocity(i)))
            .collect()
    }

    /// Locals sorted lexicographically by position.
    pub fn sorted_state(&self) -> Vec<(Vec3, Vec3)> {
        let mut s = self.local_states();
        sort_states(&mut s);
        s
    }

    pub fn total_momentum(&self, mass: f64) -> Vec3 {
        let mut m = Vec3::ZERO;
        for i in 0..self.n_local {
            m += self.get_velocity(i);
        }
        m.scale(mass)
    }
}

pub fn sort_states(s: &mut [(Vec3, Vec3)]) {
    s.sort_by(|a, b| a.0.lex_cmp(&b.0).then(a.1.lex_cmp(&b.1)));
}

fn basis(particles_per_cell: usize) -> &'static [[f64; 3]] {
    match particles_per_cell {
        1 => &[[0.0, 0.0, 0.0]],
        2 => &[[0.0, 0.0, 0.0], [0.5, 0.5, 0.5]],
        4 => &[
            [0.0, 0.0, 0.0],
            [0.5, 0.5, 0.0],
            [0.5, 0.0, 0.5],
            [0.0, 0.5, 0.5],
        ],
        n => panic!("no lattice basis for {n} particles per cell"),
    }
}

/// Every lattice site of the configured system with its initial velocity.
///
/// Velocities are drawn uniformly from `[-0.5, 0.5)` per component with a
/// seeded generator in a fixed site order, then shifted to zero net
/// momentum. The result is identical on every rank, so each rank can keep
/// the subset it owns.
pub fn lattice_sites(cfg: &SimConfig) -> Vec<(Vec3, Vec3)> {
    let a = cfg.lattice_constant();
    let [nx, ny, nz] = cfg.unit_cells;
    let ext = cfg.global_domain().extent();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut out = Vec::with_capacity(cfg.total_lattice_sites());
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                for b in basis(cfg.particles_per_cell) {
                    let p = Vec3::new(
                        (i as f64 + b[0]) * a,
                        (j as f64 + b[1]) * a,
                        (k as f64 + b[2]) * a,
                    );
                    let v = Vec3::new(
                        rng.gen::<f64>() - 0.5,
                        rng.gen::<f64>() - 0.5,
                        rng.gen::<f64>() - 0.5,
                    );
                    let keep = match cfg.fill {
                        LatticeFill::Full => true,
                        LatticeFill::DiagonalHalf => p.x / ext.x + p.y / ext.y + p.z / ext.z < 1.5,
                    };
                    if keep {
                        out.push((p, v));
                    }
                }
            }
        }
    }
    if !out.is_empty() {
        let mut mean = Vec3::ZERO;
        for (_, v) in &out {
            mean += *v;
        }
        let mean = mean.scale(1.0 / out.len() as f64);
        for (_, v) in &mut out {
            *v -= mean;
        }
    }
    out
}

/// Lattice particles that fall inside `domain` (half-open).
pub fn create_lattice<L: Layout>(cfg: &SimConfig, domain: &Aabb) -> ParticleStore<L> {
    let sites: Vec<_> = lattice_sites(cfg)
        .into_iter()
        .filter(|(p, _)| domain.contains(*p))
        .collect();
    ParticleStore::from_particles(&sites)
}

/// Largest deviation between two particle multisets after pairing each
/// particle of `a` with its nearest unused partner in `b` (positions under
/// the minimum-image convention, so a wrap at the boundary is not a
/// difference). Returns the max over position and velocity components, or an
/// error if the sets cannot be paired within `window`.
pub fn max_state_deviation(
    a: &[(Vec3, Vec3)],
    b: &[(Vec3, Vec3)],
    global: &Aabb,
    window: f64,
) -> Result<f64, String> {
    if a.len() != b.len() {
        return Err(format!("particle counts differ: {} vs {}", a.len(), b.len()));
    }
    let wrap = |s: &[(Vec3, Vec3)]| -> Vec<(Vec3, Vec3)> {
        s.iter().map(|&(p, v)| (pbc_correct(p, global), v)).collect()
    };
    let a = wrap(a);
    let mut b = wrap(b);
    b.sort_by(|p, q| p.0.x.total_cmp(&q.0.x));
    let xs: Vec<f64> = b.iter().map(|s| s.0.x).collect();
    let mut used = vec![false; b.len()];
    let (lo, hi) = (global.min.x, global.max.x);
    let len = hi - lo;
    let mut worst: f64 = 0.0;
    let max_norm = |d: Vec3| d.x.abs().max(d.y.abs()).max(d.z.abs());

    for (pa, va) in &a {
        let mut ranges = vec![(pa.x - window, pa.x + window)];
        if pa.x - window < lo {
            ranges.push((pa.x - window + len, hi));
        }
        if pa.x + window >= hi {
            ranges.push((lo, pa.x + window - len));
        }
        let mut best: Option<(usize, f64)> = None;
        for (r0, r1) in ranges {
            let start = xs.partition_point(|&x| x < r0);
            for (k, x) in xs.iter().enumerate().skip(start) {
                if *x > r1 {
                    break;
                }
                if used[k] {
                    continue;
                }
                let (pb, vb) = b[k];
                let d = max_norm(minimum_image(*pa - pb, global)).max(max_norm(*va - vb));
                if best.map_or(true, |(_, bd)| d < bd) {
                    best = Some((k, d));
                }
            }
        }
        match best {
            Some((k, d)) if d <= window => {
                used[k] = true;
                worst = worst.max(d);
            }
            _ => return Err(format!("no partner within {window} for particle at {pa:?}")),
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{Clustered, ColumnMajor, RowMajor};
    use proptest::prelude::*;

    #[test]
    fn lattice_counts() {
        let cfg = SimConfig {
            unit_cells: [1, 1, 1],
            ..SimConfig::default()
        };
        let s: ParticleStore<RowMajor> = create_lattice(&cfg, &cfg.global_domain());
        assert_eq!(s.n_local(), 4);
        for i in 0..4 {
            assert!(cfg.global_domain().contains(s.get_position(i)));
        }
        let cfg = SimConfig::preset_lj32();
        assert_eq!(lattice_sites(&cfg).len(), 131_072);
    }

    #[test]
    fn lattice_has_zero_momentum_and_zero_forces() {
        let cfg = SimConfig::default();
        let s: ParticleStore<ColumnMajor> = create_lattice(&cfg, &cfg.global_domain());
        let p = s.total_momentum(1.0);
        assert!(p.norm() < 1e-12, "{p:?}");
        assert!((0..s.n_local()).all(|i| s.get_force(i) == Vec3::ZERO));
    }

    #[test]
    fn diagonal_half_fill_keeps_about_half() {
        let cfg = SimConfig {
            unit_cells: [8, 8, 8],
            fill: LatticeFill::DiagonalHalf,
            ..SimConfig::default()
        };
        let n = lattice_sites(&cfg).len() as f64;
        let full = cfg.total_lattice_sites() as f64;
        assert!((n / full - 0.5).abs() < 0.05, "{n} of {full}");
    }

    #[test]
    fn append_then_remove_restores_count() {
        let mut s = ParticleStore::<Clustered<4>>::default();
        s.append_local(Vec3::splat(1.0), Vec3::ZERO);
        s.append_local(Vec3::splat(2.0), Vec3::ZERO);
        let n = s.n_local();
        s.append_local(Vec3::splat(3.0), Vec3::splat(0.5));
        s.remove_local(n);
        assert_eq!(s.n_local(), n);
        assert_eq!(s.get_position(0), Vec3::splat(1.0));
        assert_eq!(s.get_position(1), Vec3::splat(2.0));
    }

    #[test]
    fn removing_last_touches_nothing_else() {
        let mut s = ParticleStore::<RowMajor>::default();
        for k in 0..5 {
            s.append_local(Vec3::splat(k as f64), Vec3::ZERO);
        }
        let before = s.local_states();
        s.remove_local(4);
        assert_eq!(s.local_states(), before[..4].to_vec());
    }

    #[test]
    fn ghosts_stay_contiguous_after_local_edits() {
        let mut s = ParticleStore::<ColumnMajor>::default();
        for k in 0..4 {
            s.append_local(Vec3::splat(k as f64), Vec3::ZERO);
        }
        for g in 0..3 {
            s.push_ghost(
                Vec3::splat(100.0 + g as f64),
                GhostSource {
                    owner_rank: 1,
                    remote_index: g,
                },
            );
        }
        s.append_local(Vec3::splat(9.0), Vec3::ZERO);
        s.remove_local(0);
        assert_eq!(s.n_local(), 4);
        assert_eq!(s.n_ghost(), 3);
        let mut ghosts: Vec<f64> = (s.n_local()..s.len()).map(|i| s.get_position(i).x).collect();
        ghosts.sort_by(f64::total_cmp);
        assert_eq!(ghosts, vec![100.0, 101.0, 102.0]);
        for i in s.n_local()..s.len() {
            let src = s.ghost_source(i - s.n_local());
            assert_eq!(src.remote_index as f64 + 100.0, s.get_position(i).x);
        }
        let mut locals: Vec<f64> = (0..s.n_local()).map(|i| s.get_position(i).x).collect();
        locals.sort_by(f64::total_cmp);
        assert_eq!(locals, vec![1.0, 2.0, 3.0, 9.0]);
    }

    #[test]
    fn deviation_pairs_across_periodic_boundary() {
        let g = Aabb::new(Vec3::ZERO, Vec3::splat(10.0));
        let a = vec![(Vec3::new(1e-12, 5.0, 5.0), Vec3::ZERO), (Vec3::splat(3.0), Vec3::ZERO)];
        let b = vec![(Vec3::splat(3.0), Vec3::ZERO), (Vec3::new(10.0 - 1e-12, 5.0, 5.0), Vec3::ZERO)];
        let d = max_state_deviation(&a, &b, &g, 1e-8).unwrap();
        assert!(d < 1e-11);
        let c = vec![(Vec3::splat(3.0), Vec3::ZERO), (Vec3::splat(4.0), Vec3::ZERO)];
        assert!(max_state_deviation(&a, &c, &g, 1e-8).is_err());
    }

    proptest! {
        #[test]
        fn random_edits_preserve_surviving_multiset(ops in proptest::collection::vec((any::<bool>(), 0usize..64), 1..120)) {
            let mut s = ParticleStore::<Clustered<8>>::default();
            let mut shadow: Vec<(Vec3, Vec3)> = Vec::new();
            let mut next = 0.0;
            for (add, k) in ops {
                if add || shadow.is_empty() {
                    let p = (Vec3::splat(next), Vec3::new(next, -next, 1.0));
                    next += 1.0;
                    s.append_local(p.0, p.1);
                    shadow.push(p);
                } else {
                    let i = k % s.n_local();
                    let removed = s.remove_local(i);
                    let at = shadow.iter().position(|x| *x == removed).unwrap();
                    shadow.swap_remove(at);
                }
            }
            let mut got = s.local_states();
            sort_states(&mut got);
            sort_states(&mut shadow);
            prop_assert_eq!(got, shadow);
        }
    }
}
