use nanopair_core::comm::{
    define_borders, exchange, grid_box, grid_coord, run_ranks, synchronize, CommPattern, Endpoint, RankDomain,
    RankWorld,
};
use nanopair_core::geometry::{pbc_correct, Aabb, Vec3};
use nanopair_core::layout::RowMajor;
use nanopair_core::particles::{sort_states, ParticleStore};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Store = ParticleStore<RowMajor>;

fn cube(l: f64) -> Aabb {
    Aabb::new(Vec3::ZERO, Vec3::splat(l))
}

fn cloud(n: usize, global: &Aabb, seed: u64) -> Vec<(Vec3, Vec3)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e = global.extent();
    (0..n)
        .map(|_| {
            let p = global.min + Vec3::new(rng.gen::<f64>() * e.x, rng.gen::<f64>() * e.y, rng.gen::<f64>() * e.z);
            let v = Vec3::new(rng.gen(), rng.gen(), rng.gen());
            (p, v)
        })
        .collect()
}

fn world(ep: Endpoint, dims: [usize; 3], global: Aabb, spacing: f64, blocks: bool) -> RankWorld {
    if blocks {
        let d = RankDomain::from_grid(dims, ep.rank(), &global, spacing);
        RankWorld::new(ep, global, CommPattern::Blocks(d))
    } else {
        RankWorld::grid(ep, dims, global, spacing).unwrap()
    }
}

#[test]
fn exchange_moves_particles_to_their_owner() {
    let g = cube(8.0);
    for blocks in [false, true] {
        let out = run_ranks(2, false, |ep| {
            let mut w = world(ep, [2, 1, 1], g, 1.0, blocks);
            let mut s = Store::default();
            if w.rank() == 0 {
                s.append_local(Vec3::new(4.2, 1.0, 1.0), Vec3::new(1.0, 0.0, 0.0));
                s.append_local(Vec3::new(-0.1, 2.0, 2.0), Vec3::new(2.0, 0.0, 0.0));
                s.append_local(Vec3::new(1.0, 3.0, 3.0), Vec3::new(3.0, 0.0, 0.0));
            }
            exchange(&mut w, &mut s)?;
            Ok(s.sorted_state())
        })
        .unwrap();
        assert_eq!(out[0].len(), 1);
        assert_eq!(out[0][0].0.x, 1.0);
        assert_eq!(out[1].len(), 2);
        assert!((out[1][0].0.x - 4.2).abs() < 1e-15);
        assert!((out[1][1].0.x - 7.9).abs() < 1e-12);
        assert_eq!(out[1][1].1.x, 2.0, "velocity travels with the particle");
    }
}

#[test]
fn exchange_conserves_the_global_multiset_on_eight_ranks() {
    let g = Aabb::new(Vec3::splat(-2.0), Vec3::new(10.0, 11.0, 9.0));
    let dims = [2, 2, 2];
    let sp = 1.2;
    let base = cloud(4000, &g, 7);
    // drift every particle by up to half the ghost width, some across the
    // periodic boundary
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let moved: Vec<(Vec3, Vec3)> = base
        .iter()
        .map(|&(p, v)| {
            let d = Vec3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5).scale(sp);
            (p + d, v)
        })
        .collect();
    let mut expected: Vec<_> = moved.iter().map(|&(p, v)| (pbc_correct(p, &g), v)).collect();
    sort_states(&mut expected);
    for blocks in [false, true] {
        let parts = run_ranks(8, false, |ep| {
            let me = ep.rank();
            let own = grid_box(dims, grid_coord(dims, me), &g);
            let mut w = world(ep, dims, g, sp, blocks);
            let mine: Vec<_> = base
                .iter()
                .zip(&moved)
                .filter(|((p, _), _)| own.contains(*p))
                .map(|(_, m)| *m)
                .collect();
            let mut s = Store::from_particles(&mine);
            exchange(&mut w, &mut s)?;
            for i in 0..s.n_local() {
                assert!(own.contains(s.get_position(i)));
            }
            Ok(s.local_states())
        })
        .unwrap();
        let mut all: Vec<_> = parts.into_iter().flatten().collect();
        sort_states(&mut all);
        assert_eq!(all, expected, "blocks = {blocks}");
    }
}

/// Every periodic image of every particle that falls strictly within
/// `spacing` (per dimension) of the rank box, excluding the identity image
/// of the rank's own particles.
fn ghost_oracle(all: &[(Vec3, Vec3)], own: &Aabb, global: &Aabb, sp: f64) -> Vec<Vec3> {
    let e = global.extent();
    let mut out = Vec::new();
    for &(p, _) in all {
        for dz in -1i32..=1 {
            for dy in -1i32..=1 {
                for dx in -1i32..=1 {
                    let s = Vec3::new(dx as f64 * e.x, dy as f64 * e.y, dz as f64 * e.z);
                    if s == Vec3::ZERO && own.contains(p) {
                        continue;
                    }
                    let img = p + s;
                    if own.within_open_margin(img, sp) {
                        out.push(img);
                    }
                }
            }
        }
    }
    out.sort_by(|a, b| a.lex_cmp(b));
    out
}

#[test]
fn border_ghosts_match_the_image_oracle() {
    let g = Aabb::new(Vec3::ZERO, Vec3::new(9.0, 8.0, 7.0));
    let all = cloud(1500, &g, 11);
    for (dims, sp) in [([1, 1, 1], 1.5), ([2, 1, 1], 2.0), ([2, 2, 1], 1.0), ([2, 2, 2], 1.7), ([1, 1, 1], 4.0)] {
        let n: usize = dims.iter().product();
        for blocks in [false, true] {
            let out = run_ranks(n, false, |ep| {
                let me = ep.rank();
                let own = grid_box(dims, grid_coord(dims, me), &g);
                let mut w = world(ep, dims, g, sp, blocks);
                let mine: Vec<_> = all.iter().copied().filter(|(p, _)| own.contains(*p)).collect();
                let mut s = Store::from_particles(&mine);
                exchange(&mut w, &mut s)?;
                define_borders(&mut w, &mut s, false)?;
                let mut ghosts: Vec<Vec3> = (s.n_local()..s.len()).map(|i| s.get_position(i)).collect();
                ghosts.sort_by(|a, b| a.lex_cmp(b));
                Ok((own, ghosts))
            })
            .unwrap();
            for (r, (own, ghosts)) in out.iter().enumerate() {
                let want = ghost_oracle(&all, own, &g, sp);
                assert_eq!(ghosts.len(), want.len(), "{dims:?} blocks={blocks} rank {r}");
                assert_eq!(ghosts, &want, "{dims:?} blocks={blocks} rank {r}");
            }
        }
    }
}

#[test]
fn border_membership_examples() {
    let g = cube(12.0);
    let sp = 2.0;
    let out = run_ranks(2, false, |ep| {
        let mut w = world(ep, [2, 1, 1], g, sp, false);
        let mut s = Store::default();
        if w.rank() == 0 {
            // 0.5 * spacing from the +x face at x = 6
            s.append_local(Vec3::new(5.0, 6.0, 6.0), Vec3::ZERO);
            // center of the rank box
            s.append_local(Vec3::new(3.0, 6.0, 6.0), Vec3::ZERO);
        }
        exchange(&mut w, &mut s)?;
        let plan = define_borders(&mut w, &mut s, false)?;
        Ok(plan)
    })
    .unwrap();
    let x_plus = &out[0].stages[0][1];
    assert_eq!(x_plus.send_rank, 1);
    let sent: Vec<u32> = x_plus.send_index.clone();
    assert_eq!(sent.len(), 1);
    assert!(out[0].stages[0][0].send_index.is_empty());
    assert!(out[0].stages[1].iter().all(|e| e.send_index.is_empty()));
    assert!(out[0].stages[2].iter().all(|e| e.send_index.is_empty()));
}

#[test]
fn synchronize_tracks_source_motion() {
    let g = cube(10.0);
    let all = cloud(600, &g, 5);
    for blocks in [false, true] {
        let mut s = Store::from_particles(&all);
        let mut w = world(Endpoint::solo(), [1, 1, 1], g, 2.0, blocks);
        exchange(&mut w, &mut s).unwrap();
        let plan = define_borders(&mut w, &mut s, true).unwrap();
        assert!(s.n_ghost() > 0);
        let before: Vec<Vec3> = (s.n_local()..s.len()).map(|i| s.get_position(i)).collect();

        synchronize(&mut w, &mut s, &plan).unwrap();
        let same: Vec<Vec3> = (s.n_local()..s.len()).map(|i| s.get_position(i)).collect();
        assert_eq!(before, same, "unmoved sources leave ghosts unchanged");

        let d = Vec3::new(0.013, -0.007, 0.002);
        for i in 0..s.n_local() {
            let p = s.get_position(i);
            s.set_position(i, p + d);
            s.set_velocity(i, Vec3::new(i as f64, 0.0, 0.0));
        }
        synchronize(&mut w, &mut s, &plan).unwrap();
        for (k, b) in before.iter().enumerate() {
            let moved = s.get_position(s.n_local() + k) - *b;
            assert!((moved - d).norm() < 1e-13);
        }
        // ghost fidelity: each ghost is exactly its source plus the fixed shift
        for e in plan.entries() {
            for (k, (&i, &sh)) in e.send_index.iter().zip(&e.send_shift).enumerate() {
                let g = e.recv_start + k;
                let src = i as usize;
                assert_eq!(s.get_position(g), s.get_position(src) + sh);
                assert_eq!(s.get_velocity(g), s.get_velocity(src));
            }
        }

        s.append_local(Vec3::splat(5.0), Vec3::ZERO);
        assert!(synchronize(&mut w, &mut s, &plan).is_err(), "stale plan is rejected");
    }
}

#[test]
fn single_rank_block_pattern_sends_nothing() {
    let g = cube(10.0);
    let all = cloud(300, &g, 3);
    let out = run_ranks(1, false, |ep| {
        let mut w = world(ep, [1, 1, 1], g, 2.0, true);
        let mut s = Store::from_particles(&all);
        exchange(&mut w, &mut s)?;
        let plan = define_borders(&mut w, &mut s, false)?;
        synchronize(&mut w, &mut s, &plan)?;
        Ok((w.endpoint.bus().data_messages(), s.n_ghost()))
    })
    .unwrap();
    assert_eq!(out[0].0, 0);
    assert!(out[0].1 > 0);
}

#[test]
fn block_pattern_reproduces_stencil_routing() {
    // the block table built from the grid decomposition routes every
    // particle to the same rank as the 6-stencil
    let g = Aabb::new(Vec3::ZERO, Vec3::new(8.0, 9.0, 10.0));
    let dims = [2, 2, 2];
    let base = cloud(3000, &g, 21);
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let moved: Vec<(Vec3, Vec3)> = base
        .iter()
        .map(|&(p, v)| (p + Vec3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5), v))
        .collect();
    let run = |blocks: bool| {
        run_ranks(8, true, |ep| {
            let own = grid_box(dims, grid_coord(dims, ep.rank()), &g);
            let mut w = world(ep, dims, g, 1.0, blocks);
            let mine: Vec<_> = base
                .iter()
                .zip(&moved)
                .filter(|((p, _), _)| own.contains(*p))
                .map(|(_, m)| *m)
                .collect();
            let mut s = Store::from_particles(&mine);
            exchange(&mut w, &mut s)?;
            Ok(s.sorted_state())
        })
        .unwrap()
    };
    assert_eq!(run(false), run(true));
}
