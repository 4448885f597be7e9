use nanopair_core::balance::{BalanceConfig, CurveKind};
use nanopair_core::comm::{rank_grid_dims, run_ranks, RankWorld};
use nanopair_core::config::{LatticeFill, LayoutKind, PotentialKind, SimConfig};
use nanopair_core::driver::{final_integrate, initial_integrate, launch, RunOptions, Simulation};
use nanopair_core::error::Error;
use nanopair_core::geometry::Vec3;
use nanopair_core::layout::RowMajor;
use nanopair_core::particles::{lattice_sites, max_state_deviation, ParticleStore};

type Store = ParticleStore<RowMajor>;

fn one(p: Vec3, v: Vec3, f: Vec3) -> Store {
    let mut s = Store::default();
    s.append_local(p, v);
    s.set_force(0, f);
    s
}

#[test]
fn initial_integrate_examples() {
    let mut s = one(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::ZERO);
    initial_integrate(&mut s, 0.005, 1.0);
    assert_eq!(s.get_position(0), Vec3::new(0.005, 0.0, 0.0));

    let mut s = one(Vec3::ZERO, Vec3::ZERO, Vec3::new(2.0, 0.0, 0.0));
    initial_integrate(&mut s, 0.005, 1.0);
    assert_eq!(s.get_velocity(0), Vec3::new(0.005, 0.0, 0.0));
    assert_eq!(s.get_position(0), Vec3::new(0.005 * 0.005, 0.0, 0.0));

    let mut s = one(Vec3::splat(1.0), Vec3::splat(2.0), Vec3::splat(3.0));
    initial_integrate(&mut s, 0.0, 1.0);
    final_integrate(&mut s, 0.0, 1.0);
    assert_eq!(s.get_position(0), Vec3::splat(1.0));
    assert_eq!(s.get_velocity(0), Vec3::splat(2.0));
}

#[test]
fn final_integrate_examples() {
    let mut s = one(Vec3::ZERO, Vec3::new(0.3, -0.2, 0.1), Vec3::ZERO);
    final_integrate(&mut s, 0.005, 1.0);
    assert_eq!(s.get_velocity(0), Vec3::new(0.3, -0.2, 0.1));

    // constant force over one full step: x += v dt + F dt^2 / 2m
    let (x0, v0, f, dt, m) = (1.0, 0.7, 3.0, 0.01, 2.0);
    let mut s = one(Vec3::new(x0, 0.0, 0.0), Vec3::new(v0, 0.0, 0.0), Vec3::new(f, 0.0, 0.0));
    initial_integrate(&mut s, dt, m);
    final_integrate(&mut s, dt, m);
    assert!((s.get_position(0).x - (x0 + v0 * dt + f * dt * dt / (2.0 * m))).abs() < 1e-15);
    assert!((s.get_velocity(0).x - (v0 + f * dt / m)).abs() < 1e-15);

    // two half kicks equal one full kick
    let mut a = one(Vec3::ZERO, Vec3::new(0.25, 0.0, 0.0), Vec3::new(4.0, 0.0, 0.0));
    final_integrate(&mut a, 0.5, 1.0);
    final_integrate(&mut a, 0.5, 1.0);
    assert_eq!(a.get_velocity(0).x, 0.25 + 4.0 * 0.5);
}

fn small(n: usize) -> SimConfig {
    SimConfig {
        unit_cells: [n, n, n],
        ..SimConfig::default()
    }
}

#[test]
fn zero_steps_reports_initial_state() {
    let cfg = SimConfig { steps: 0, ..small(4) };
    let mut o = RunOptions::ranks(1);
    o.collect_final_states = true;
    let r = launch(&cfg, &o).unwrap();
    assert_eq!(r.report.steps, 0);
    assert_eq!(r.report.timers.total().as_nanos(), 0);
    assert_eq!(r.report.loop_time.as_nanos(), 0);
    let mut got = r.final_states.unwrap();
    let mut want = lattice_sites(&cfg);
    nanopair_core::particles::sort_states(&mut got);
    nanopair_core::particles::sort_states(&mut want);
    assert_eq!(got, want);
}

#[test]
fn cadence_one_and_twenty_agree() {
    let base = small(6);
    let mut finals = Vec::new();
    for n in [1, 20] {
        let cfg = SimConfig { reneigh_interval: n, ..base.clone() };
        let mut o = RunOptions::ranks(1);
        o.collect_final_states = true;
        let r = launch(&cfg, &o).unwrap();
        assert!(r.report.max_displacement < r.report.guard_limit);
        finals.push(r.final_states.unwrap());
    }
    let dev = max_state_deviation(&finals[0], &finals[1], &base.global_domain(), 0.5).unwrap();
    assert!(dev < 1e-8, "deviation {dev}");
}

#[test]
fn short_runs_are_reversible() {
    let cfg = small(4);
    let sites = lattice_sites(&cfg);
    let world = RankWorld::grid(
        nanopair_core::comm::Endpoint::solo(),
        [1, 1, 1],
        cfg.global_domain(),
        cfg.interaction_radius(),
    )
    .unwrap();
    let mut sim = Simulation::<RowMajor>::new(cfg.clone(), world, Store::from_particles(&sites)).unwrap();
    sim.run(20).unwrap();
    sim.negate_velocities();
    sim.run(20).unwrap();
    let back = sim.gather_states().unwrap();
    let start: Vec<_> = sites.iter().map(|&(p, v)| (p, -v)).collect();
    let dev = max_state_deviation(&start, &back, &cfg.global_domain(), 0.1).unwrap();
    assert!(dev < 1e-6, "deviation {dev}");
}

#[test]
fn lists_cover_every_interacting_pair_between_rebuilds() {
    let cfg = small(4);
    let world = RankWorld::grid(
        nanopair_core::comm::Endpoint::solo(),
        [1, 1, 1],
        cfg.global_domain(),
        cfg.interaction_radius(),
    )
    .unwrap();
    let mut sim = Simulation::<RowMajor>::new(cfg.clone(), world, Store::from_particles(&lattice_sites(&cfg))).unwrap();
    sim.run(13).unwrap();
    let s = sim.store();
    let l = sim.lists();
    let rc2 = cfg.cutoff * cfg.cutoff;
    for i in 0..s.n_local() {
        let listed: std::collections::HashSet<usize> = l.neighbors_of(i).collect();
        for j in 0..s.len() {
            if j != i && (s.get_position(i) - s.get_position(j)).norm2() < rc2 {
                assert!(listed.contains(&j), "pair ({i}, {j}) within cutoff is missing");
            }
        }
    }
}

#[test]
fn displacement_guard_aborts_with_diagnostic() {
    let cfg = SimConfig {
        verlet_buffer: 0.02,
        steps: 40,
        ..small(4)
    };
    let err = launch(&cfg, &RunOptions::ranks(1)).unwrap_err();
    match err {
        Error::AtStep { source, .. } => {
            assert!(matches!(*source, Error::DisplacementGuard { .. }));
            assert!(source.to_string().contains("increase the Verlet buffer"));
        }
        e => panic!("unexpected {e}"),
    }
}

fn forces_by_position(p: usize, cfg: &SimConfig) -> Vec<(Vec3, Vec3)> {
    let global = cfg.global_domain();
    let dims = rank_grid_dims(p, &global);
    let sites = lattice_sites(cfg);
    let parts = run_ranks(p, false, |ep| {
        let world = RankWorld::grid(ep, dims, global, cfg.interaction_radius())?;
        let mine: Vec<_> = sites.iter().copied().filter(|(x, _)| world.pattern.owns(*x)).collect();
        let sim = Simulation::<RowMajor>::new(cfg.clone(), world, Store::from_particles(&mine))?;
        let s = sim.store();
        Ok((0..s.n_local()).map(|i| (s.get_position(i), s.get_force(i))).collect::<Vec<_>>())
    })
    .unwrap();
    let mut all: Vec<_> = parts.into_iter().flatten().collect();
    all.sort_by(|a, b| a.0.lex_cmp(&b.0));
    all
}

#[test]
fn two_rank_forces_equal_single_rank_forces() {
    // perturb the lattice so forces are not all zero
    let cfg = SimConfig {
        lattice_density: 0.9,
        ..small(6)
    };
    let a = forces_by_position(1, &cfg);
    let b = forces_by_position(2, &cfg);
    assert_eq!(a.len(), b.len());
    let mut worst: f64 = 0.0;
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.0, y.0);
        worst = worst.max((x.1 - y.1).norm());
    }
    assert!(worst < 1e-10, "{worst}");
}

#[test]
fn multi_rank_runs_match_single_rank() {
    let cfg = SimConfig { steps: 60, ..small(6) };
    let run = |p: usize, sequential: bool| {
        let mut o = RunOptions::ranks(p);
        o.sequential = sequential;
        o.collect_final_states = true;
        launch(&cfg, &o).unwrap()
    };
    let base = run(1, false);
    for p in [2, 4, 8] {
        let r = run(p, false);
        assert_eq!(r.report.rank_particles.iter().sum::<u64>(), r.report.total_particles);
        assert_eq!(r.report.count_checks, 1 + 60 / 20);
        let dev = max_state_deviation(
            base.final_states.as_ref().unwrap(),
            r.final_states.as_ref().unwrap(),
            &cfg.global_domain(),
            0.5,
        )
        .unwrap();
        assert!(dev < 1e-8, "P = {p}: {dev}");
    }
    // the round-robin scheduler gives the same answer bit for bit
    let a = run(4, false).final_states.unwrap();
    let b = run(4, true).final_states.unwrap();
    assert_eq!(a, b);
}

#[test]
fn layouts_and_half_lists_agree() {
    let base = SimConfig { steps: 40, ..small(4) };
    let run = |cfg: SimConfig| {
        let mut o = RunOptions::ranks(1);
        o.collect_final_states = true;
        let mut s = launch(&cfg, &o).unwrap().final_states.unwrap();
        nanopair_core::particles::sort_states(&mut s);
        s
    };
    let aos = run(base.clone());
    for layout in [LayoutKind::Soa, LayoutKind::Aosoa(8), LayoutKind::Aosoa(1)] {
        assert_eq!(run(SimConfig { layout, ..base.clone() }), aos, "{layout}");
    }
    let half = run(SimConfig { half_neighbor: true, ..base.clone() });
    let dev = max_state_deviation(&aos, &half, &base.global_domain(), 0.5).unwrap();
    assert!(dev < 1e-9);
}

#[test]
fn balanced_spring_dashpot_run_conserves_particles() {
    let cfg = SimConfig {
        unit_cells: [12, 12, 12],
        fill: LatticeFill::DiagonalHalf,
        potential: PotentialKind::SpringDashpot,
        steps: 40,
        ..SimConfig::default()
    };
    let mut o = RunOptions::ranks(1);
    o.collect_final_states = true;
    let base = launch(&cfg, &o).unwrap();
    for curve in [CurveKind::Morton, CurveKind::Hilbert] {
        let mut o = RunOptions::ranks(4);
        o.collect_final_states = true;
        o.balance = Some(BalanceConfig {
            curve,
            refine_threshold: 200,
            merge_threshold: 20,
            max_depth: 4,
        });
        let r = launch(&cfg, &o).unwrap();
        let b = r.balance.unwrap();
        assert!(b.ratio_after() < b.ratio_before());
        assert_eq!(r.report.rank_particles.iter().sum::<u64>(), base.report.total_particles);
        let dev = max_state_deviation(
            base.final_states.as_ref().unwrap(),
            r.final_states.as_ref().unwrap(),
            &cfg.global_domain(),
            0.5,
        )
        .unwrap();
        assert!(dev < 1e-8, "{curve}: {dev}");
    }
}

#[test]
fn frames_follow_the_dump_cadence() {
    let cfg = SimConfig { steps: 100, ..small(4) };
    let mut o = RunOptions::ranks(2);
    o.frame_every = Some(20);
    let r = launch(&cfg, &o).unwrap();
    let steps: Vec<u64> = r.frames.iter().map(|f| f.step).collect();
    assert_eq!(steps, vec![0, 20, 40, 60, 80, 100]);
    assert!(r.frames.iter().all(|f| f.positions.len() == 256));
}
