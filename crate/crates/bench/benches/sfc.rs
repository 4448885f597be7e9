use criterion::{black_box, criterion_group, criterion_main, Criterion, Throughput};
use nanopair_core::balance::{curve_key, BalanceConfig, BlockForest, CurveKind};
use nanopair_core::geometry::{Aabb, Vec3};

fn keys(c: &mut Criterion) {
    let depth = 6;
    let n = 1u32 << depth;
    let mut g = c.benchmark_group("sfc_keys");
    g.throughput(Throughput::Elements(u64::from(n * n * n)));
    for kind in [CurveKind::Morton, CurveKind::Hilbert] {
        g.bench_function(kind.to_string(), |b| {
            b.iter(|| {
                let mut acc = 0u64;
                for x in 0..n {
                    for y in 0..n {
                        for z in 0..n {
                            acc ^= curve_key(kind, x, y, z, depth);
                        }
                    }
                }
                black_box(acc)
            })
        });
    }
    g.finish();
}

fn forest(c: &mut Criterion) {
    let global = Aabb::new(Vec3::ZERO, Vec3::splat(50.0));
    let mut g = c.benchmark_group("forest");
    for kind in [CurveKind::Morton, CurveKind::Hilbert] {
        let cfg = BalanceConfig {
            curve: kind,
            ..BalanceConfig::default()
        };
        g.bench_function(format!("build_partition_l4/{kind}"), |b| {
            b.iter(|| {
                let mut f = BlockForest::new(global, cfg, 4);
                let w: Vec<(u64, u64)> = (0..f.len() as u64).map(|i| (i % 97, i % 13)).collect();
                f.set_weights(&w);
                black_box(f.partition(64))
            })
        });
    }
    g.finish();
}

criterion_group!(benches, keys, forest);
criterion_main!(benches);
