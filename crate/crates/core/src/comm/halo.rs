//! The three halo phases: exchange, border definition and synchronization.

use crate::error::{Error, Result};
use crate::geometry::{wrap_coord, pbc_correct, Aabb, Vec3};
use crate::layout::Layout;
use crate::particles::{GhostSource, ParticleStore};

use super::pattern::{six_stencil_pattern, CommPattern, RankDomain, SixStencil};
use super::transport::Endpoint;
use super::wire::{decode_expect, encode, MessageKind};

/// One rank's view of the distributed system.
pub struct RankWorld {
    pub endpoint: Endpoint,
    pub global: Aabb,
    pub pattern: CommPattern,
}

impl RankWorld {
    pub fn new(endpoint: Endpoint, global: Aabb, pattern: CommPattern) -> Self {
        Self { endpoint, global, pattern }
    }

    /// World over a regular rank grid with the 6-stencil pattern.
    pub fn grid(endpoint: Endpoint, dims: [usize; 3], global: Aabb, spacing: f64) -> Result<Self> {
        let s = six_stencil_pattern(dims, endpoint.rank(), endpoint.size(), &global, spacing)?;
        Ok(Self::new(endpoint, global, CommPattern::SixStencil(s)))
    }

    pub fn rank(&self) -> usize {
        self.endpoint.rank()
    }

    pub fn size(&self) -> usize {
        self.endpoint.size()
    }
}

/// What one plan entry sends and where its received ghosts live.
#[derive(Debug, Clone, Default)]
pub struct PlanEntry {
    pub send_rank: usize,
    pub recv_rank: usize,
    pub send_index: Vec<u32>,
    pub send_shift: Vec<Vec3>,
    pub recv_start: usize,
    pub recv_count: usize,
}

/// The border lists of the last border definition, replayed by
/// [`synchronize`] every step. Stages run in order because later stages may
/// forward ghosts received in earlier ones.
#[derive(Debug, Clone, Default)]
pub struct BorderPlan {
    pub stages: Vec<Vec<PlanEntry>>,
    pub with_velocity: bool,
    pub n_local: usize,
    pub n_ghost: usize,
}

impl BorderPlan {
    pub fn width(&self) -> usize {
        if self.with_velocity {
            6
        } else {
            3
        }
    }

    pub fn ghosts_sent(&self) -> usize {
        self.stages.iter().flatten().map(|e| e.send_index.len()).sum()
    }

    pub fn entries(&self) -> impl Iterator<Item = &PlanEntry> {
        self.stages.iter().flatten()
    }
}

fn push_state(buf: &mut Vec<f64>, p: Vec3, v: Vec3) {
    buf.extend_from_slice(&[p.x, p.y, p.z, v.x, v.y, v.z]);
}

fn read_vec(r: &[f64], at: usize) -> Vec3 {
    Vec3::new(r[at], r[at + 1], r[at + 2])
}

/// Move every local particle that left its owner's region to the owning
/// rank, wrapping positions across the periodic boundary. Ghosts are
/// discarded first. On return every local satisfies the ownership test.
pub fn exchange<L: Layout>(world: &mut RankWorld, store: &mut ParticleStore<L>) -> Result<()> {
    store.clear_ghosts();
    let RankWorld { endpoint, global, pattern } = world;
    match pattern {
        CommPattern::SixStencil(s) => exchange_stencil(endpoint, s, global, store)?,
        CommPattern::Blocks(d) => exchange_blocks(endpoint, d, global, store)?,
    }
    for i in 0..store.n_local() {
        let p = store.get_position(i);
        if !pattern.owns(p) {
            return Err(Error::protocol(
                endpoint.rank(),
                format!("particle at {p:?} is not owned by this rank after exchange"),
            ));
        }
    }
    Ok(())
}

fn receive_locals<L: Layout>(ep: &mut Endpoint, src: usize, store: &mut ParticleStore<L>) -> Result<()> {
    let pk = decode_expect(&ep.recv(src)?, MessageKind::Exchange, 6)?;
    store.ensure_capacity(store.len() + pk.count);
    for k in 0..pk.count {
        let r = pk.record(k);
        store.append_local(read_vec(r, 0), read_vec(r, 3));
    }
    Ok(())
}

fn exchange_stencil<L: Layout>(
    ep: &mut Endpoint,
    s: &SixStencil,
    global: &Aabb,
    store: &mut ParticleStore<L>,
) -> Result<()> {
    for d in 0..3 {
        let (lo, hi) = (s.bounds.min.get(d), s.bounds.max.get(d));
        let (glo, ghi) = (global.min.get(d), global.max.get(d));
        let mut out = [Vec::new(), Vec::new()];
        let mut i = store.n_local();
        while i > 0 {
            i -= 1;
            let mut p = store.get_position(i);
            let x = p.get(d);
            let e = if x < lo {
                0
            } else if x >= hi {
                1
            } else {
                continue;
            };
            p.set(d, wrap_coord(x, glo, ghi));
            if p.get(d) >= lo && p.get(d) < hi {
                // wrapped straight back into this rank's slab
                store.set_position(i, p);
                continue;
            }
            let (_, v) = store.remove_local(i);
            push_state(&mut out[e], p, v);
        }
        for (e, buf) in out.iter().enumerate() {
            ep.send(s.send_rank(d, e), encode(MessageKind::Exchange, 6, buf));
        }
        for e in 0..2 {
            receive_locals(ep, s.recv_rank(d, e), store)?;
        }
    }
    Ok(())
}

fn exchange_blocks<L: Layout>(
    ep: &mut Endpoint,
    dom: &RankDomain,
    global: &Aabb,
    store: &mut ParticleStore<L>,
) -> Result<()> {
    let mut out = vec![Vec::new(); dom.neighbors.len()];
    let mut i = store.n_local();
    while i > 0 {
        i -= 1;
        let p = store.get_position(i);
        let q = pbc_correct(p, global);
        if dom.owns(q) {
            if q != p {
                store.set_position(i, q);
            }
            continue;
        }
        let Some(k) = dom.neighbors.iter().position(|n| n.contains(q)) else {
            return Err(Error::protocol(
                ep.rank(),
                format!("no neighbor owns the particle at {q:?} (stale neighborhood)"),
            ));
        };
        let (_, v) = store.remove_local(i);
        push_state(&mut out[k], q, v);
    }
    for (n, buf) in dom.neighbors.iter().zip(&out) {
        ep.send(n.rank, encode(MessageKind::Exchange, 6, buf));
    }
    for n in &dom.neighbors {
        receive_locals(ep, n.rank, store)?;
    }
    Ok(())
}

/// Determine the border particles of every peer, send them as ghosts and
/// materialize the ghosts received. With `with_velocity` the ghosts also
/// carry velocities (needed by velocity-dependent force laws).
pub fn define_borders<L: Layout>(
    world: &mut RankWorld,
    store: &mut ParticleStore<L>,
    with_velocity: bool,
) -> Result<BorderPlan> {
    store.clear_ghosts();
    let RankWorld { endpoint, global, pattern } = world;
    let mut plan = BorderPlan {
        with_velocity,
        n_local: store.n_local(),
        ..BorderPlan::default()
    };
    match pattern {
        CommPattern::SixStencil(s) => {
            for d in 0..3 {
                let (lo, hi) = (s.bounds.min.get(d), s.bounds.max.get(d));
                let sp = s.spacing;
                let mut entries: Vec<PlanEntry> = (0..2)
                    .map(|e| PlanEntry {
                        send_rank: s.send_rank(d, e),
                        recv_rank: s.recv_rank(d, e),
                        ..PlanEntry::default()
                    })
                    .collect();
                let shifts = [s.ghost_shift(d, 0), s.ghost_shift(d, 1)];
                // candidates include ghosts from earlier stages (forwarding)
                for i in 0..store.len() {
                    let x = store.get_position(i).get(d);
                    if x < lo + sp {
                        entries[0].send_index.push(i as u32);
                        entries[0].send_shift.push(shifts[0]);
                    }
                    if x > hi - sp {
                        entries[1].send_index.push(i as u32);
                        entries[1].send_shift.push(shifts[1]);
                    }
                }
                send_and_receive_ghosts(endpoint, store, &mut entries, with_velocity, MessageKind::Border)?;
                plan.stages.push(entries);
            }
        }
        CommPattern::Blocks(dom) => {
            let mut entries: Vec<PlanEntry> = dom
                .neighbors
                .iter()
                .map(|n| PlanEntry {
                    send_rank: n.rank,
                    recv_rank: n.rank,
                    ..PlanEntry::default()
                })
                .collect();
            let me = endpoint.rank();
            let sp = dom.spacing;
            let ext = global.extent();
            let mut offsets: Vec<Vec3> = Vec::with_capacity(27);
            for i in 0..store.n_local() {
                let p = store.get_position(i);
                image_offsets_near(p, global, ext, sp, &mut offsets);
                for &s in &offsets {
                    let img = p + s;
                    let zero = s == Vec3::ZERO;
                    for (e, n) in entries.iter_mut().zip(&dom.neighbors) {
                        if zero && n.rank == me {
                            continue;
                        }
                        if n.within(img, sp) {
                            e.send_index.push(i as u32);
                            e.send_shift.push(s);
                        }
                    }
                }
            }
            send_and_receive_ghosts(endpoint, store, &mut entries, with_velocity, MessageKind::Border)?;
            plan.stages.push(entries);
        }
    }
    plan.n_ghost = store.n_ghost();
    Ok(plan)
}

/// Periodic offsets worth testing for `p`: zero, plus `+L` along a dimension
/// where `p` lies within `sp` of the lower boundary and `-L` near the upper.
fn image_offsets_near(p: Vec3, global: &Aabb, ext: Vec3, sp: f64, out: &mut Vec<Vec3>) {
    let mut opts = [[0.0f64; 3]; 3];
    let mut n = [1usize; 3];
    for d in 0..3 {
        let x = p.get(d);
        if x - global.min.get(d) < sp {
            opts[d][n[d]] = ext.get(d);
            n[d] += 1;
        }
        if global.max.get(d) - x < sp {
            opts[d][n[d]] = -ext.get(d);
            n[d] += 1;
        }
    }
    out.clear();
    for &sz in &opts[2][..n[2]] {
        for &sy in &opts[1][..n[1]] {
            for &sx in &opts[0][..n[0]] {
                out.push(Vec3::new(sx, sy, sz));
            }
        }
    }
}

fn pack<L: Layout>(store: &ParticleStore<L>, e: &PlanEntry, with_velocity: bool) -> Vec<f64> {
    let w = if with_velocity { 6 } else { 3 };
    let mut buf = Vec::with_capacity(e.send_index.len() * w);
    for (&i, &s) in e.send_index.iter().zip(&e.send_shift) {
        let p = store.get_position(i as usize) + s;
        buf.extend_from_slice(&[p.x, p.y, p.z]);
        if with_velocity {
            let v = store.get_velocity(i as usize);
            buf.extend_from_slice(&[v.x, v.y, v.z]);
        }
    }
    buf
}

fn send_and_receive_ghosts<L: Layout>(
    ep: &mut Endpoint,
    store: &mut ParticleStore<L>,
    entries: &mut [PlanEntry],
    with_velocity: bool,
    kind: MessageKind,
) -> Result<()> {
    let w = if with_velocity { 6 } else { 3 };
    for e in entries.iter() {
        ep.send(e.send_rank, encode(kind, w, &pack(store, e, with_velocity)));
    }
    for e in entries.iter_mut() {
        let pk = decode_expect(&ep.recv(e.recv_rank)?, kind, w)?;
        e.recv_start = store.len();
        e.recv_count = pk.count;
        store.ensure_capacity(store.len() + pk.count);
        for k in 0..pk.count {
            let r = pk.record(k);
            let g = store.push_ghost(
                read_vec(r, 0),
                GhostSource {
                    owner_rank: e.recv_rank,
                    remote_index: k,
                },
            );
            if with_velocity {
                store.set_velocity(g, read_vec(r, 3));
            }
        }
    }
    Ok(())
}

/// Refresh every ghost from its source particle using the retained plan.
pub fn synchronize<L: Layout>(world: &mut RankWorld, store: &mut ParticleStore<L>, plan: &BorderPlan) -> Result<()> {
    let ep = &mut world.endpoint;
    if store.n_local() != plan.n_local || store.n_ghost() != plan.n_ghost {
        return Err(Error::protocol(
            ep.rank(),
            format!(
                "border plan for {}+{} particles applied to a store with {}+{}",
                plan.n_local,
                plan.n_ghost,
                store.n_local(),
                store.n_ghost()
            ),
        ));
    }
    let w = plan.width();
    for stage in &plan.stages {
        for e in stage {
            ep.send(e.send_rank, encode(MessageKind::Sync, w, &pack(store, e, plan.with_velocity)));
        }
        for e in stage {
            let pk = decode_expect(&ep.recv(e.recv_rank)?, MessageKind::Sync, w)?;
            if pk.count != e.recv_count {
                return Err(Error::protocol(
                    ep.rank(),
                    format!(
                        "sync from rank {} carried {} ghosts, plan expects {}",
                        e.recv_rank, pk.count, e.recv_count
                    ),
                ));
            }
            for k in 0..pk.count {
                let r = pk.record(k);
                store.set_position(e.recv_start + k, read_vec(r, 0));
                if plan.with_velocity {
                    store.set_velocity(e.recv_start + k, read_vec(r, 3));
                }
            }
        }
    }
    Ok(())
}
