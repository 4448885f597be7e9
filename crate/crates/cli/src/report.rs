//! Line-oriented `key value` run report.

use std::fmt::Write;

use nanopair_core::driver::RunOutcome;
use nanopair_core::geometry::Vec3;

use crate::deck::RunSpec;

fn vec3(v: Vec3) -> String {
    format!("{:e} {:e} {:e}", v.x, v.y, v.z)
}

fn grid(g: [usize; 3]) -> String {
    format!("{}x{}x{}", g[0], g[1], g[2])
}

/// Render the report. Lines starting with `time.` or `perf.` are the only
/// ones that vary between runs of the same deck.
pub fn format_report(spec: &RunSpec, out: &RunOutcome) -> String {
    let c = &spec.config;
    let r = &out.report;
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} {v}");
    };
    kv("config.unit_cells", grid(c.unit_cells));
    kv("config.particles_per_cell", c.particles_per_cell.to_string());
    kv("config.density", c.lattice_density.to_string());
    kv("config.fill", c.fill.to_string());
    kv("config.potential", c.potential.to_string());
    kv("config.dt", c.dt.to_string());
    kv("config.steps", c.steps.to_string());
    kv("config.cutoff", c.cutoff.to_string());
    kv("config.buffer", c.verlet_buffer.to_string());
    kv("config.reneigh_every", c.reneigh_interval.to_string());
    kv("config.half_neigh", c.half_neighbor.to_string());
    kv("config.layout", c.layout.to_string());
    kv("config.backend", c.backend.to_string());
    kv("config.seed", c.rng_seed.to_string());
    kv("ranks", r.ranks.to_string());
    kv("rank_grid", grid(out.rank_grid));
    kv("steps", r.steps.to_string());
    kv("particles.total", r.total_particles.to_string());
    for (i, n) in r.rank_particles.iter().enumerate() {
        kv(&format!("particles.rank.{i}"), n.to_string());
    }
    kv("momentum.initial", vec3(r.initial_momentum));
    kv("momentum.final", vec3(r.final_momentum));
    kv("momentum.drift", vec3(r.momentum_drift()));
    kv("guard.max_displacement", format!("{:e}", r.max_displacement));
    kv("guard.limit", format!("{:e}", r.guard_limit));
    kv("count_checks", r.count_checks.to_string());
    kv("messages", r.messages.to_string());
    match (&out.balance, &spec.balance) {
        (Some(b), Some(cfg)) => {
            kv("balance.curve", cfg.curve.to_string());
            kv("balance.leaves", b.leaves.to_string());
            kv("balance.levels", format!("{} {}", b.min_level, b.max_level));
            kv("balance.migrated", b.migrated.to_string());
            kv("balance.migration_messages", b.migration_messages.to_string());
            kv("balance.ratio_before", format!("{:.6}", b.ratio_before()));
            kv("balance.ratio_after", format!("{:.6}", b.ratio_after()));
            for (i, (x, y)) in b.before.iter().zip(&b.after).enumerate() {
                kv(&format!("balance.rank.{i}.before"), format!("{} {}", x.local, x.ghost));
                kv(&format!("balance.rank.{i}.after"), format!("{} {}", y.local, y.ghost));
                kv(&format!("balance.rank.{i}.block_weight"), b.block_weights[i].to_string());
            }
        }
        _ => kv("balance.curve", "none".into()),
    }
    kv("time.force", format!("{:.6}", r.timers.force.as_secs_f64()));
    kv("time.neigh", format!("{:.6}", r.timers.neigh.as_secs_f64()));
    kv("time.comm", format!("{:.6}", r.timers.comm.as_secs_f64()));
    kv("time.other", format!("{:.6}", r.timers.other.as_secs_f64()));
    kv("time.loop", format!("{:.6}", r.loop_time.as_secs_f64()));
    kv("perf.steps_per_second", format!("{:.3}", r.steps_per_second()));
    s
}

/// Parse report text into ordered `(key, value)` pairs.
pub fn parse_report(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once(' '))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}
