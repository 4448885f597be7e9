//! Pair force laws and the generic particle-neighbor force kernel.

use crate::backend::Backend;
use crate::config::{PotentialKind, SimConfig};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::layout::Layout;
use crate::neighbor::NeighborLists;
use crate::particles::ParticleStore;

/// A short-range pair interaction. `force` returns the force on particle
/// `i` from `j` given `del = x_i - x_j`, `rsq = |del|^2 > 0` and both
/// velocities. Implementations must be antisymmetric under swapping `i`
/// and `j`.
pub trait PairForceLaw: Send + Sync {
    /// Whether `force` reads velocities (ghosts then need them too).
    const USES_VELOCITY: bool;

    fn force(&self, del: Vec3, rsq: f64, v_i: Vec3, v_j: Vec3) -> Vec3;

    /// Pair energy, for diagnostics only.
    fn energy(&self, rsq: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LennardJones {
    pub epsilon: f64,
    pub sigma: f64,
    sigma6: f64,
}

impl LennardJones {
    pub fn new(epsilon: f64, sigma: f64) -> Self {
        Self {
            epsilon,
            sigma,
            sigma6: sigma.powi(6),
        }
    }
}

impl PairForceLaw for LennardJones {
    const USES_VELOCITY: bool = false;

    #[inline(always)]
    fn force(&self, del: Vec3, rsq: f64, _v_i: Vec3, _v_j: Vec3) -> Vec3 {
        let sr2 = 1.0 / rsq;
        // sigma^6 / r^6, formed from rsq^3 so that r = 2^(1/6) sigma gives exactly 1/2
        let sr6 = self.sigma6 / (rsq * rsq * rsq);
        let f = 48.0 * sr6 * (sr6 - 0.5) * sr2 * self.epsilon;
        del.scale(f)
    }

    fn energy(&self, rsq: f64) -> f64 {
        let sr6 = self.sigma6 / (rsq * rsq * rsq);
        4.0 * self.epsilon * sr6 * (sr6 - 1.0)
    }
}

/// Linear spring-dashpot contact between spheres of equal `diameter`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpringDashpot {
    pub stiffness: f64,
    pub damping: f64,
    pub diameter: f64,
}

impl PairForceLaw for SpringDashpot {
    const USES_VELOCITY: bool = true;

    #[inline(always)]
    fn force(&self, del: Vec3, rsq: f64, v_i: Vec3, v_j: Vec3) -> Vec3 {
        let dist = rsq.sqrt();
        let overlap = self.diameter - dist;
        if overlap <= 0.0 {
            return Vec3::ZERO;
        }
        let n = del.scale(1.0 / dist);
        let v_ij = v_i - v_j;
        let xi = n.scale(overlap);
        let xi_dot = -n.scale(n.dot(v_ij));
        xi.scale(self.stiffness) + xi_dot.scale(self.damping)
    }

    fn energy(&self, rsq: f64) -> f64 {
        let overlap = self.diameter - rsq.sqrt();
        if overlap > 0.0 {
            0.5 * self.stiffness * overlap * overlap
        } else {
            0.0
        }
    }
}

/// Lennard-Jones force on `i` for `del = x_i - x_j`.
pub fn lj_force(del: Vec3, rsq: f64, epsilon: f64, sigma: f64) -> Result<Vec3> {
    if rsq == 0.0 {
        return Err(Error::Singularity { i: 0, j: 1 });
    }
    Ok(LennardJones::new(epsilon, sigma).force(del, rsq, Vec3::ZERO, Vec3::ZERO))
}

/// Spring-dashpot contact force on `i`.
pub fn spring_dashpot_force(
    del: Vec3,
    rsq: f64,
    v_i: Vec3,
    v_j: Vec3,
    stiffness: f64,
    damping: f64,
    diameter: f64,
) -> Result<Vec3> {
    if rsq == 0.0 {
        return Err(Error::Singularity { i: 0, j: 1 });
    }
    let law = SpringDashpot {
        stiffness,
        damping,
        diameter,
    };
    Ok(law.force(del, rsq, v_i, v_j))
}

/// Accumulate pair forces into `store.forces` for every local particle.
///
/// Forces of locals are overwritten. In half mode (`HALF = true`) each
/// stored pair adds `f` to `i` and subtracts it from `j` when `j` is local;
/// ghosts never receive forces. Pairs at or beyond `cutoff_sq` are skipped.
pub fn compute_forces<L, NL, F, B, const HALF: bool>(
    store: &mut ParticleStore<L>,
    lists: &NeighborLists<NL>,
    law: &F,
    cutoff_sq: f64,
) -> Result<()>
where
    L: Layout,
    NL: Layout,
    F: PairForceLaw,
    B: Backend,
{
    accumulate::<L, NL, F, B, HALF>(store, lists, law, cutoff_sq);
    // a coincident pair shows up as a non-finite force; locate it only then
    if (0..store.n_local()).any(|i| !store.get_force(i).is_finite()) {
        check_singular(store, lists)?;
    }
    Ok(())
}

fn accumulate<L, NL, F, B, const HALF: bool>(
    store: &mut ParticleStore<L>,
    lists: &NeighborLists<NL>,
    law: &F,
    cutoff_sq: f64,
) where
    L: Layout,
    NL: Layout,
    F: PairForceLaw,
    B: Backend,
{
    assert_eq!(lists.is_half(), HALF, "neighbor list mode does not match kernel");
    let n = store.n_local();
    assert!(lists.n_local() == n, "neighbor lists are stale");

    if !HALF {
        if B::PARALLEL {
            let st = &*store;
            let forces = B::map(n, |i| full_force_on(st, lists, law, cutoff_sq, i));
            for (i, f) in forces.into_iter().enumerate() {
                store.set_force(i, f);
            }
        } else {
            for i in 0..n {
                let f = full_force_on(store, lists, law, cutoff_sq, i);
                store.set_force(i, f);
            }
        }
        return;
    }

    for i in 0..n {
        store.set_force(i, Vec3::ZERO);
    }
    if B::PARALLEL {
        let positions: Vec<Vec3> = (0..store.len()).map(|i| store.get_position(i)).collect();
        let velocities: Vec<Vec3> = if F::USES_VELOCITY {
            (0..store.len()).map(|i| store.get_velocity(i)).collect()
        } else {
            Vec::new()
        };
        let forces = store.forces_mut().atomic_view();
        B::for_each(n, |i| {
            let pi = positions[i];
            let vi = if F::USES_VELOCITY { velocities[i] } else { Vec3::ZERO };
            let mut fi = Vec3::ZERO;
            for k in 0..lists.count(i) {
                let j = lists.neighbor(i, k);
                let del = pi - positions[j];
                let rsq = del.norm2();
                if rsq < cutoff_sq {
                    let vj = if F::USES_VELOCITY { velocities[j] } else { Vec3::ZERO };
                    let f = law.force(del, rsq, vi, vj);
                    fi += f;
                    if j < n {
                        forces.add_vec3(j, -f);
                    }
                }
            }
            forces.add_vec3(i, fi);
        });
    } else {
        for i in 0..n {
            let pi = store.get_position(i);
            let vi = if F::USES_VELOCITY { store.get_velocity(i) } else { Vec3::ZERO };
            for k in 0..lists.count(i) {
                let j = lists.neighbor(i, k);
                let del = pi - store.get_position(j);
                let rsq = del.norm2();
                if rsq < cutoff_sq {
                    let vj = if F::USES_VELOCITY { store.get_velocity(j) } else { Vec3::ZERO };
                    let f = law.force(del, rsq, vi, vj);
                    store.add_force(i, f);
                    if j < n {
                        store.add_force(j, -f);
                    }
                }
            }
        }
    }
}

#[inline(always)]
fn full_force_on<L: Layout, NL: Layout, F: PairForceLaw>(
    store: &ParticleStore<L>,
    lists: &NeighborLists<NL>,
    law: &F,
    cutoff_sq: f64,
    i: usize,
) -> Vec3 {
    let pi = store.get_position(i);
    let vi = if F::USES_VELOCITY { store.get_velocity(i) } else { Vec3::ZERO };
    let mut fi = Vec3::ZERO;
    for k in 0..lists.count(i) {
        let j = lists.neighbor(i, k);
        let del = pi - store.get_position(j);
        let rsq = del.norm2();
        if rsq < cutoff_sq {
            let vj = if F::USES_VELOCITY { store.get_velocity(j) } else { Vec3::ZERO };
            fi += law.force(del, rsq, vi, vj);
        }
    }
    fi
}

fn check_singular<L: Layout, NL: Layout>(store: &ParticleStore<L>, lists: &NeighborLists<NL>) -> Result<()> {
    for i in 0..lists.n_local() {
        let pi = store.get_position(i);
        for j in lists.neighbors_of(i) {
            if (pi - store.get_position(j)).norm2() == 0.0 {
                return Err(Error::Singularity { i, j });
            }
        }
    }
    Ok(())
}

/// Total pair energy of the locals' interactions. Pairs with ghosts count
/// one half, since the partner rank (or periodic image) counts the other.
pub fn potential_energy<L, NL, F>(store: &ParticleStore<L>, lists: &NeighborLists<NL>, law: &F, cutoff_sq: f64) -> f64
where
    L: Layout,
    NL: Layout,
    F: PairForceLaw,
{
    let n = store.n_local();
    let mut e = 0.0;
    for i in 0..n {
        let pi = store.get_position(i);
        for j in lists.neighbors_of(i) {
            let rsq = (pi - store.get_position(j)).norm2();
            if rsq < cutoff_sq {
                let w = if lists.is_half() && j < n { 1.0 } else { 0.5 };
                e += w * law.energy(rsq);
            }
        }
    }
    e
}

/// The configured force law, dispatched once per call to a monomorphized
/// kernel.
#[derive(Debug, Clone, Copy)]
pub enum ForceField {
    LennardJones(LennardJones),
    SpringDashpot(SpringDashpot),
}

impl ForceField {
    pub fn from_config(cfg: &SimConfig) -> Self {
        match cfg.potential {
            PotentialKind::LennardJones => ForceField::LennardJones(LennardJones::new(cfg.epsilon, cfg.sigma)),
            PotentialKind::SpringDashpot => ForceField::SpringDashpot(SpringDashpot {
                stiffness: cfg.stiffness,
                damping: cfg.damping,
                diameter: cfg.diameter,
            }),
        }
    }

    pub fn uses_velocity(&self) -> bool {
        match self {
            ForceField::LennardJones(_) => LennardJones::USES_VELOCITY,
            ForceField::SpringDashpot(_) => SpringDashpot::USES_VELOCITY,
        }
    }

    pub fn compute<L: Layout, NL: Layout, B: Backend>(
        &self,
        store: &mut ParticleStore<L>,
        lists: &NeighborLists<NL>,
        cutoff_sq: f64,
    ) -> Result<()> {
        match (self, lists.is_half()) {
            (ForceField::LennardJones(l), false) => compute_forces::<L, NL, _, B, false>(store, lists, l, cutoff_sq),
            (ForceField::LennardJones(l), true) => compute_forces::<L, NL, _, B, true>(store, lists, l, cutoff_sq),
            (ForceField::SpringDashpot(l), false) => compute_forces::<L, NL, _, B, false>(store, lists, l, cutoff_sq),
            (ForceField::SpringDashpot(l), true) => compute_forces::<L, NL, _, B, true>(store, lists, l, cutoff_sq),
        }
    }

    pub fn energy<L: Layout, NL: Layout>(&self, store: &ParticleStore<L>, lists: &NeighborLists<NL>, cutoff_sq: f64) -> f64 {
        match self {
            ForceField::LennardJones(l) => potential_energy(store, lists, l, cutoff_sq),
            ForceField::SpringDashpot(l) => potential_energy(store, lists, l, cutoff_sq),
        }
    }
}
