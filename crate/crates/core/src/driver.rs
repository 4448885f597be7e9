//! Velocity-Verlet time stepping over one rank of a (possibly distributed)
//! system, plus a launcher that runs every rank of a world.

use std::time::{Duration, Instant};

use crate::backend::{Backend, Parallel, Serial};
use crate::balance::{balance_world, crop_domain, BalanceConfig, BalanceReport, BlockForest};
use crate::comm::{define_borders, exchange, rank_grid_dims, run_ranks, synchronize, BorderPlan, CommPattern, RankWorld};
use crate::config::{BackendKind, LayoutKind, SimConfig};
use crate::error::{Error, Result};
use crate::geometry::{pbc_correct, Vec3};
use crate::layout::{Clustered, ColumnMajor, Layout, RowMajor};
use crate::neighbor::{
    build_cell_grid, build_neighbor_lists_with_capacity, max_displacement_since_rebuild, CellGrid, NeighborLists,
};
use crate::particles::{lattice_sites, ParticleStore};
use crate::potential::ForceField;

/// Half kick then drift, locals only: `v += dt/2 * F/m; x += dt * v`.
pub fn initial_integrate<L: Layout>(store: &mut ParticleStore<L>, dt: f64, mass: f64) {
    let h = 0.5 * dt / mass;
    for i in 0..store.n_local() {
        let v = store.get_velocity(i) + h * store.get_force(i);
        store.set_velocity(i, v);
        let x = store.get_position(i) + dt * v;
        store.set_position(i, x);
    }
}

/// Second half kick: `v += dt/2 * F/m`.
pub fn final_integrate<L: Layout>(store: &mut ParticleStore<L>, dt: f64, mass: f64) {
    let h = 0.5 * dt / mass;
    for i in 0..store.n_local() {
        let v = store.get_velocity(i) + h * store.get_force(i);
        store.set_velocity(i, v);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimers {
    pub force: Duration,
    pub neigh: Duration,
    pub comm: Duration,
    pub other: Duration,
}

impl PhaseTimers {
    pub fn total(&self) -> Duration {
        self.force + self.neigh + self.comm + self.other
    }

    fn as_secs(&self) -> [f64; 4] {
        [
            self.force.as_secs_f64(),
            self.neigh.as_secs_f64(),
            self.comm.as_secs_f64(),
            self.other.as_secs_f64(),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Force,
    Neigh,
    Comm,
    Other,
}

/// Run statistics. Timings are the maximum over ranks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimReport {
    pub steps: u64,
    pub ranks: usize,
    pub timers: PhaseTimers,
    pub loop_time: Duration,
    pub total_particles: u64,
    pub rank_particles: Vec<u64>,
    pub initial_momentum: Vec3,
    pub final_momentum: Vec3,
    /// Largest particle displacement since a list rebuild seen at any force
    /// computation.
    pub max_displacement: f64,
    pub guard_limit: f64,
    /// Exchange epochs at which the global particle count was verified.
    pub count_checks: u64,
    pub messages: u64,
}

impl SimReport {
    pub fn momentum_drift(&self) -> Vec3 {
        self.final_momentum - self.initial_momentum
    }

    pub fn steps_per_second(&self) -> f64 {
        let t = self.loop_time.as_secs_f64();
        if t > 0.0 {
            self.steps as f64 / t
        } else {
            0.0
        }
    }
}

/// One rank's simulation state.
pub struct Simulation<L: Layout, B: Backend = Serial> {
    cfg: SimConfig,
    world: RankWorld,
    store: ParticleStore<L>,
    grid: Option<CellGrid>,
    lists: NeighborLists<RowMajor>,
    plan: BorderPlan,
    field: ForceField,
    step: u64,
    timers: PhaseTimers,
    expected_total: u64,
    initial_momentum: Vec3,
    max_displacement: f64,
    count_checks: u64,
    _backend: std::marker::PhantomData<B>,
}

impl<L: Layout, B: Backend> Simulation<L, B> {
    /// Collective. Distributes nothing: `store` must hold this rank's share.
    /// Runs the first exchange, border definition, list build and force
    /// computation; none of it is charged to the phase timers.
    pub fn new(cfg: SimConfig, world: RankWorld, store: ParticleStore<L>) -> Result<Self> {
        cfg.validate()?;
        let field = ForceField::from_config(&cfg);
        let mut sim = Self {
            cfg,
            world,
            store,
            grid: None,
            lists: NeighborLists::empty(false),
            plan: BorderPlan::default(),
            field,
            step: 0,
            timers: PhaseTimers::default(),
            expected_total: 0,
            initial_momentum: Vec3::ZERO,
            max_displacement: 0.0,
            count_checks: 0,
            _backend: std::marker::PhantomData,
        };
        let n = sim.store.n_local() as u64;
        sim.expected_total = sim.world.endpoint.allreduce_sum_u64(&[n])?[0];
        sim.neighbor_epoch()?;
        sim.compute_forces()?;
        sim.initial_momentum = sim.total_momentum()?;
        sim.timers = PhaseTimers::default();
        Ok(sim)
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn world(&self) -> &RankWorld {
        &self.world
    }

    pub fn world_mut(&mut self) -> &mut RankWorld {
        &mut self.world
    }

    pub fn store(&self) -> &ParticleStore<L> {
        &self.store
    }

    pub fn lists(&self) -> &NeighborLists<RowMajor> {
        &self.lists
    }

    pub fn current_step(&self) -> u64 {
        self.step
    }

    pub fn timers(&self) -> PhaseTimers {
        self.timers
    }

    fn timed<T>(&mut self, phase: Phase, f: impl FnOnce(&mut Self) -> T) -> T {
        let t0 = Instant::now();
        let out = f(self);
        let dt = t0.elapsed();
        match phase {
            Phase::Force => self.timers.force += dt,
            Phase::Neigh => self.timers.neigh += dt,
            Phase::Comm => self.timers.comm += dt,
            Phase::Other => self.timers.other += dt,
        }
        out
    }

    /// Exchange, count check, border definition and neighbor rebuild.
    fn neighbor_epoch(&mut self) -> Result<()> {
        self.timed(Phase::Comm, |s| -> Result<()> {
            exchange(&mut s.world, &mut s.store)?;
            let n = s.store.n_local() as u64;
            let total = s.world.endpoint.allreduce_sum_u64(&[n])?[0];
            if total != s.expected_total {
                return Err(Error::protocol(
                    s.world.rank(),
                    format!("global particle count changed from {} to {total}", s.expected_total),
                ));
            }
            s.count_checks += 1;
            if let CommPattern::Blocks(d) = &mut s.world.pattern {
                crop_domain::<L, B>(d, &s.store);
            }
            let with_velocity = s.field.uses_velocity();
            s.plan = define_borders(&mut s.world, &mut s.store, with_velocity)?;
            Ok(())
        })?;
        self.timed(Phase::Neigh, |s| -> Result<()> {
            let r = s.cfg.interaction_radius();
            let grid = build_cell_grid(&s.store, &s.world.pattern.grid_aabb(), r)?;
            let cap = s.lists.capacity();
            s.lists = build_neighbor_lists_with_capacity::<L, RowMajor, B>(
                &s.store,
                &grid,
                r,
                s.cfg.half_neighbor,
                cap,
            );
            s.grid = Some(grid);
            Ok(())
        })
    }

    fn compute_forces(&mut self) -> Result<()> {
        let cutoff_sq = self.cfg.cutoff * self.cfg.cutoff;
        self.timed(Phase::Force, |s| {
            s.field
                .compute::<L, RowMajor, B>(&mut s.store, &s.lists, cutoff_sq)
        })
    }

    /// Advance one step. Collective.
    pub fn step(&mut self) -> Result<()> {
        let step = self.step;
        let rank = self.world.rank();
        self.step_inner().map_err(|e| e.at_step(rank, step))
    }

    fn step_inner(&mut self) -> Result<()> {
        let (dt, mass) = (self.cfg.dt, self.cfg.mass);
        self.timed(Phase::Other, |s| initial_integrate(&mut s.store, dt, mass));
        if (self.step + 1) % self.cfg.reneigh_interval == 0 {
            self.neighbor_epoch()?;
        } else {
            self.timed(Phase::Comm, |s| synchronize(&mut s.world, &mut s.store, &s.plan))?;
            self.check_displacement()?;
        }
        self.compute_forces()?;
        self.timed(Phase::Other, |s| final_integrate(&mut s.store, dt, mass));
        self.step += 1;
        Ok(())
    }

    fn check_displacement(&mut self) -> Result<()> {
        let limit = 0.5 * self.cfg.verlet_buffer;
        let step = self.step;
        self.timed(Phase::Other, |s| -> Result<()> {
            let local = max_displacement_since_rebuild::<L, RowMajor, B>(&s.store, &s.lists);
            let d = s.world.endpoint.allreduce_max_f64(local)?;
            s.max_displacement = s.max_displacement.max(d);
            if d >= limit {
                return Err(Error::DisplacementGuard {
                    step,
                    max_disp: d,
                    limit,
                });
            }
            Ok(())
        })
    }

    pub fn run(&mut self, steps: u64) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    /// Reverse the motion of every local (and ghost) particle.
    pub fn negate_velocities(&mut self) {
        for i in 0..self.store.len() {
            let v = self.store.get_velocity(i);
            self.store.set_velocity(i, -v);
        }
    }

    /// Collective. Summed over ranks in rank order.
    pub fn total_momentum(&mut self) -> Result<Vec3> {
        let m = self.store.total_momentum(self.cfg.mass);
        let s = self.world.endpoint.allreduce_sum_f64(&m.to_array())?;
        Ok(Vec3::new(s[0], s[1], s[2]))
    }

    /// Collective. Every rank's locals, rank by rank, positions wrapped into
    /// the global domain.
    pub fn gather_states(&mut self) -> Result<Vec<(Vec3, Vec3)>> {
        let global = self.world.global;
        let mut flat = Vec::with_capacity(self.store.n_local() * 6);
        for i in 0..self.store.n_local() {
            let p = pbc_correct(self.store.get_position(i), &global);
            let v = self.store.get_velocity(i);
            flat.extend_from_slice(&[p.x, p.y, p.z, v.x, v.y, v.z]);
        }
        let parts = self.world.endpoint.allgather_f64(&flat)?;
        Ok(parts
            .iter()
            .flat_map(|p| {
                p.chunks_exact(6)
                    .map(|r| (Vec3::new(r[0], r[1], r[2]), Vec3::new(r[3], r[4], r[5])))
            })
            .collect())
    }

    /// Collective.
    pub fn report(&mut self, loop_time: Duration) -> Result<SimReport> {
        let final_momentum = self.total_momentum()?;
        let ep = &mut self.world.endpoint;
        let counts: Vec<u64> = ep
            .allgather_u64(&[self.store.n_local() as u64])?
            .into_iter()
            .map(|v| v[0])
            .collect();
        let mut t = self.timers.as_secs().to_vec();
        t.push(loop_time.as_secs_f64());
        t.push(self.max_displacement);
        let all = ep.allgather_f64(&t)?;
        let mut worst = [0.0f64; 6];
        for row in &all {
            for (w, x) in worst.iter_mut().zip(row) {
                *w = w.max(*x);
            }
        }
        let d = Duration::from_secs_f64;
        let messages = ep.allreduce_sum_u64(&[ep.messages_sent()])?[0];
        Ok(SimReport {
            steps: self.step,
            ranks: ep.size(),
            timers: PhaseTimers {
                force: d(worst[0]),
                neigh: d(worst[1]),
                comm: d(worst[2]),
                other: d(worst[3]),
            },
            loop_time: d(worst[4]),
            total_particles: self.expected_total,
            rank_particles: counts,
            initial_momentum: self.initial_momentum,
            final_momentum,
            max_displacement: worst[5],
            guard_limit: 0.5 * self.cfg.verlet_buffer,
            count_checks: self.count_checks,
            messages,
        })
    }
}

/// How to launch a run.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub ranks: usize,
    pub rank_grid: Option<[usize; 3]>,
    pub balance: Option<BalanceConfig>,
    pub sequential: bool,
    /// Gather a frame at step 0 and every `k` steps.
    pub frame_every: Option<u64>,
    pub collect_final_states: bool,
}

impl RunOptions {
    pub fn ranks(p: usize) -> Self {
        Self {
            ranks: p,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Frame {
    pub step: u64,
    pub positions: Vec<Vec3>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: SimReport,
    pub balance: Option<BalanceReport>,
    pub rank_grid: [usize; 3],
    pub frames: Vec<Frame>,
    /// All final `(position, velocity)` pairs, positions wrapped.
    pub final_states: Option<Vec<(Vec3, Vec3)>>,
}

/// Run a complete simulation over `opts.ranks` simulated ranks.
pub fn launch(cfg: &SimConfig, opts: &RunOptions) -> Result<RunOutcome> {
    cfg.validate()?;
    match cfg.backend {
        BackendKind::Serial => launch_layout::<Serial>(cfg, opts),
        BackendKind::Parallel => launch_layout::<Parallel>(cfg, opts),
    }
}

fn launch_layout<B: Backend>(cfg: &SimConfig, opts: &RunOptions) -> Result<RunOutcome> {
    match cfg.layout {
        LayoutKind::Aos => launch_typed::<RowMajor, B>(cfg, opts),
        LayoutKind::Soa => launch_typed::<ColumnMajor, B>(cfg, opts),
        LayoutKind::Aosoa(1) => launch_typed::<Clustered<1>, B>(cfg, opts),
        LayoutKind::Aosoa(2) => launch_typed::<Clustered<2>, B>(cfg, opts),
        LayoutKind::Aosoa(4) => launch_typed::<Clustered<4>, B>(cfg, opts),
        LayoutKind::Aosoa(8) => launch_typed::<Clustered<8>, B>(cfg, opts),
        LayoutKind::Aosoa(16) => launch_typed::<Clustered<16>, B>(cfg, opts),
        LayoutKind::Aosoa(32) => launch_typed::<Clustered<32>, B>(cfg, opts),
        LayoutKind::Aosoa(64) => launch_typed::<Clustered<64>, B>(cfg, opts),
        LayoutKind::Aosoa(c) => Err(Error::config("layout", format!("cluster size {c} is not supported"))),
    }
}

struct RankResult {
    report: SimReport,
    balance: Option<BalanceReport>,
    frames: Vec<Frame>,
    final_states: Option<Vec<(Vec3, Vec3)>>,
}

/// Typed entry point: one layout and backend for every rank.
pub fn launch_typed<L: Layout, B: Backend>(cfg: &SimConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let p = opts.ranks.max(1);
    let global = cfg.global_domain();
    let dims = opts.rank_grid.unwrap_or_else(|| rank_grid_dims(p, &global));
    if dims.iter().product::<usize>() != p {
        return Err(Error::config(
            "rank_grid",
            format!("{}x{}x{} does not have {p} ranks", dims[0], dims[1], dims[2]),
        ));
    }
    if let Some(b) = &opts.balance {
        b.validate()?;
    }
    let sites = lattice_sites(cfg);
    let spacing = cfg.interaction_radius();
    let results = run_ranks(p, opts.sequential, |ep| -> Result<RankResult> {
        let rank = ep.rank();
        let mut world = RankWorld::grid(ep, dims, global, spacing)?;
        let mine: Vec<_> = sites.iter().copied().filter(|(x, _)| world.pattern.owns(*x)).collect();
        let mut store = ParticleStore::<L>::from_particles(&mine);
        let balance = match &opts.balance {
            Some(bc) => {
                let level = BlockForest::level_for_grid(dims).min(bc.max_depth);
                let (_, rep) = balance_world::<L, B>(&mut world, &mut store, bc, level)
                    .map_err(|e| e.at_step(rank, 0))?;
                Some(rep)
            }
            None => None,
        };
        let mut sim = Simulation::<L, B>::new(cfg.clone(), world, store).map_err(|e| e.at_step(rank, 0))?;
        let mut frames = Vec::new();
        let frame_due = |s: u64| opts.frame_every.is_some_and(|k| k > 0 && s % k == 0);
        if frame_due(0) {
            frames.push(Frame {
                step: 0,
                positions: sim.gather_states()?.into_iter().map(|s| s.0).collect(),
            });
        }
        let mut loop_time = Duration::ZERO;
        for _ in 0..cfg.steps {
            let t0 = Instant::now();
            sim.step()?;
            loop_time += t0.elapsed();
            let s = sim.current_step();
            if frame_due(s) {
                let positions = sim.gather_states()?.into_iter().map(|s| s.0).collect();
                frames.push(Frame { step: s, positions });
            }
        }
        let report = sim.report(loop_time)?;
        let final_states = if opts.collect_final_states {
            Some(sim.gather_states()?)
        } else {
            None
        };
        let keep = rank == 0;
        Ok(RankResult {
            report,
            balance,
            frames: if keep { frames } else { Vec::new() },
            final_states: if keep { final_states } else { None },
        })
    })?;
    let first = results.into_iter().next().expect("at least one rank");
    Ok(RunOutcome {
        report: first.report,
        balance: first.balance,
        rank_grid: dims,
        frames: first.frames,
        final_states: first.final_states,
    })
}
