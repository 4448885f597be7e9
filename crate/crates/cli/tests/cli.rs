use std::process::Command;

use nanopair_cli::report::parse_report;
use nanopair_cli::xyz::read_frames;
use nanopair_cli::{parse_deck, run, Args, RunSpec};

use clap::Parser;

fn nanopair(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_nanopair")).args(args).output().unwrap()
}

fn value<'a>(r: &'a [(String, String)], key: &str) -> &'a str {
    &r.iter().find(|(k, _)| k == key).unwrap_or_else(|| panic!("no `{key}`")).1
}

fn stable(text: &str) -> Vec<(String, String)> {
    parse_report(text)
        .into_iter()
        .filter(|(k, _)| !k.starts_with("time.") && !k.starts_with("perf."))
        .collect()
}

#[test]
fn preset_lj32_is_single_node_setup() {
    let s = Args::parse_from(["nanopair", "--preset", "lj-32"]).to_spec().unwrap();
    let c = &s.config;
    assert_eq!(c.unit_cells, [32, 32, 32]);
    assert_eq!(c.total_lattice_sites(), 131_072);
    assert_eq!((c.steps, c.dt, c.cutoff, c.verlet_buffer, c.reneigh_interval), (100, 0.005, 2.5, 0.3, 20));
    assert_eq!((c.epsilon, c.sigma), (1.0, 1.0));
    assert_eq!(s.ranks, 1);
}

#[test]
fn flags_override_deck_and_deck_overrides_preset() {
    let dir = tempfile::tempdir().unwrap();
    let deck = dir.path().join("run.deck");
    std::fs::write(&deck, "steps = 7\nnx = 10\nbalance = morton\n").unwrap();
    let s = Args::parse_from([
        "nanopair",
        "--preset",
        "sd-halfdomain",
        "--deck",
        deck.to_str().unwrap(),
        "--nx",
        "12",
        "--balance",
        "hilbert",
    ])
    .to_spec()
    .unwrap();
    assert_eq!(s.config.steps, 7);
    assert_eq!(s.config.unit_cells, [12, 32, 32]);
    assert_eq!(s.balance.unwrap().curve.to_string(), "hilbert");
    assert_eq!(s.config.stiffness, 0.0);
}

#[test]
fn bad_input_exits_with_named_error() {
    let dir = tempfile::tempdir().unwrap();
    let deck = dir.path().join("bad.deck");
    std::fs::write(&deck, "nx = 4\ndt=abc\n").unwrap();
    let o = nanopair(&["--deck", deck.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("`dt`"), "{err}");

    let o = nanopair(&["--cutoff", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`cutoff`"));

    let o = nanopair(&["--ranks", "4", "--rank-grid", "2x1x1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn zero_steps_is_report_only() {
    let o = nanopair(&["--nx", "4", "--ny", "4", "--nz", "4", "--steps", "0", "--ranks", "2"]);
    assert!(o.status.success());
    let r = parse_report(&String::from_utf8(o.stdout).unwrap());
    assert_eq!(value(&r, "steps"), "0");
    let per: u64 = (0..2).map(|i| value(&r, &format!("particles.rank.{i}")).parse::<u64>().unwrap()).sum();
    assert_eq!(per, 256);
    assert_eq!(value(&r, "particles.total"), "256");
}

#[test]
fn report_is_deterministic() {
    let args = ["--nx", "5", "--ny", "5", "--nz", "5", "--steps", "30", "--ranks", "4"];
    let a = nanopair(&args);
    let b = nanopair(&args);
    let mut seq = args.to_vec();
    seq.push("--ranks-sequential");
    let c = nanopair(&seq);
    let (a, b, c) = (
        String::from_utf8(a.stdout).unwrap(),
        String::from_utf8(b.stdout).unwrap(),
        String::from_utf8(c.stdout).unwrap(),
    );
    assert_eq!(stable(&a), stable(&b));
    assert_eq!(stable(&a), stable(&c));
}

#[test]
fn trajectory_has_a_frame_every_k_steps() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traj.xyz");
    let spec = RunSpec {
        dump: Some(path.clone()),
        dump_every: 20,
        ..parse_deck("nx = 4\nny = 4\nnz = 4\nsteps = 100").unwrap()
    };
    let (out, _) = run(&spec).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let frames = read_frames(std::str::from_utf8(&bytes).unwrap()).unwrap();
    assert_eq!(frames.len(), 6);
    assert_eq!(frames.iter().map(|f| f.0).collect::<Vec<_>>(), vec![0, 20, 40, 60, 80, 100]);
    for (f, g) in frames.iter().zip(&out.frames) {
        assert_eq!(f.1, g.positions);
    }
    // identical runs give identical trajectory bytes
    run(&spec).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), bytes);
}

#[test]
fn lj32_preset_conserves_momentum() {
    let spec = Args::parse_from(["nanopair", "--preset", "lj-32", "--half-neigh"]).to_spec().unwrap();
    let (out, text) = run(&spec).unwrap();
    let d = out.report.momentum_drift();
    assert!(d.x.abs().max(d.y.abs()).max(d.z.abs()) <= 1e-9, "{d:?}");
    let r = parse_report(&text);
    assert_eq!(value(&r, "particles.total"), "131072");
}

#[test]
fn hilbert_balance_on_halfdomain() {
    let o = nanopair(&["--preset", "sd-halfdomain", "--ranks", "8", "--balance", "hilbert", "--steps", "0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = parse_report(&String::from_utf8(o.stdout).unwrap());
    let before: f64 = value(&r, "balance.ratio_before").parse().unwrap();
    let after: f64 = value(&r, "balance.ratio_after").parse().unwrap();
    assert!(before >= 1.9, "{before}");
    assert!(after <= 1.3, "{after}");
    let total: u64 = value(&r, "particles.total").parse().unwrap();
    let per: u64 = (0..8).map(|i| value(&r, &format!("particles.rank.{i}")).parse::<u64>().unwrap()).sum();
    assert_eq!(per, total);
}
