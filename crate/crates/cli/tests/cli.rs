use std::fs;
use std::path::Path;
use std::process::Command;

use hesim::solvers::Scheme;
use hesim_cli::bench::{run_bench, summarize, BenchOp, BenchSpec};
use hesim_cli::commands::{
    cmd_convergence, cmd_solve, cmd_sweep_refresh, CostModel, Manifest, BENCH_HEADER, CONVERGENCE_HEADER,
    FIELD_HEADER, SWEEP_HEADER, TRACE_HEADER,
};
use hesim_cli::config::{BackendKind, SimConfig};
use hesim_cli::error::CliError;
use tempfile::TempDir;

fn run(args: &[&str]) -> i32 {
    hesim_cli::run(std::iter::once("hesim").chain(args.iter().copied()))
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn header(dir: &Path, name: &str) -> String {
    read(dir, name).lines().next().unwrap().to_string()
}

fn small_bench(ops: Vec<BenchOp>) -> BenchSpec {
    BenchSpec {
        ops,
        depths: vec![4],
        ring_dim: 4096,
        ..BenchSpec::default()
    }
}

#[test]
fn solve_writes_stable_files() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for d in [&a, &b] {
        let out = d.path().to_str().unwrap();
        assert_eq!(run(&["solve", "--n", "32", "--t-end", "0.5", "--out", out]), 0);
    }
    assert_eq!(header(a.path(), "final_field.csv"), FIELD_HEADER.join(","));
    assert_eq!(header(a.path(), "trace.csv"), TRACE_HEADER.join(","));
    for f in ["final_field.csv", "trace.csv"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f} differs between runs");
    }
    let m: Manifest = serde_json::from_str(&read(a.path(), "manifest.json")).unwrap();
    for f in &m.files {
        assert!(a.path().join(f).exists(), "{f} listed but missing");
    }
    // the manifest is itself a valid config
    let cfg = SimConfig::load(&a.path().join("manifest.json")).unwrap();
    assert_eq!(cfg, m.config);
    assert_eq!((cfg.n, cfg.t_end), (32, 0.5));
}

#[test]
fn manifest_replays_to_identical_output() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let out_a = a.path().to_str().unwrap();
    assert_eq!(
        run(&["solve", "--scheme", "upwind", "--dim", "2", "--n", "8", "--t-end", "0.25", "--out", out_a]),
        0
    );
    let manifest = a.path().join("manifest.json");
    let out_b = b.path().to_str().unwrap();
    assert_eq!(run(&["solve", "--config", manifest.to_str().unwrap(), "--out", out_b]), 0);
    assert_eq!(read(a.path(), "final_field.csv"), read(b.path(), "final_field.csv"));
    assert_eq!(read(a.path(), "trace.csv"), read(b.path(), "trace.csv"));
}

#[test]
fn trace_counts_are_the_per_step_table() {
    let d = TempDir::new().unwrap();
    let cfg = SimConfig {
        dim: 2,
        n: 8,
        t_end: 1.0,
        capacity: Some(128),
        ..SimConfig::default()
    };
    let (r, s) = cmd_solve(&cfg, d.path()).unwrap();
    let trace = read(d.path(), "trace.csv");
    let mut rows = 0u64;
    for line in trace.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(&f[4..7], ["24", "38", "24"], "{line}");
        rows += 1;
    }
    assert_eq!(rows as usize, r.steps);
    assert_eq!(s.total_counts.adds, 24 * rows);
    assert_eq!(s.total_counts.mults, 38 * rows);
    assert_eq!(s.total_counts.rotates, 24 * rows);
    assert_eq!(s.total_counts.bootstraps, s.bootstrap_steps.len() as u64);
}

#[test]
fn upwind_damps_more_than_lax_wendroff() {
    let amp = |scheme| {
        let d = TempDir::new().unwrap();
        let cfg = SimConfig {
            scheme,
            ..SimConfig::default()
        };
        let (r, _) = cmd_solve(&cfg, d.path()).unwrap();
        r.final_state.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    };
    assert!(amp(Scheme::Upwind) / amp(Scheme::LaxWendroff) < 0.9);
}

#[test]
fn convergence_csv_has_two_d_upwind_orders() {
    let d = TempDir::new().unwrap();
    let cfg = SimConfig {
        scheme: Scheme::Upwind,
        dim: 2,
        t_end: 0.5,
        ..SimConfig::default()
    };
    let rows = cmd_convergence(&cfg, &[32, 64, 128, 256], d.path()).unwrap();
    assert_eq!(header(d.path(), "convergence.csv"), CONVERGENCE_HEADER.join(","));
    for (r, want) in rows[1..].iter().zip([0.82, 0.90, 0.95]) {
        assert!((r.eoc.unwrap() - want).abs() < 0.05, "{r:?}");
    }
    let csv = read(d.path(), "convergence.csv");
    let eocs: Vec<f64> = csv
        .lines()
        .skip(2)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(eocs, rows[1..].iter().map(|r| r.eoc.unwrap()).collect::<Vec<_>>());
}

#[test]
fn sweep_trades_refreshes_for_levels() {
    let d = TempDir::new().unwrap();
    let cfg = SimConfig {
        dim: 2,
        n: 32,
        ..SimConfig::default()
    };
    let list: Vec<usize> = (3..=25).step_by(2).collect();
    let rep = cmd_sweep_refresh(&cfg, &list, CostModel::default(), d.path()).unwrap();
    assert_eq!(header(d.path(), "sweep_refresh.csv"), SWEEP_HEADER.join(","));
    assert!(rep.rows.windows(2).all(|w| w[1].bootstraps < w[0].bootstraps));
    assert!(rep.rows.windows(2).all(|w| w[1].model_error < w[0].model_error));
    let best = rep.best_l_refresh;
    assert!(best > list[0] && best < *list.last().unwrap(), "minimum at {best}");
    // out-of-range entries are configuration errors
    let bad = cmd_sweep_refresh(&cfg, &[2, 30], CostModel::default(), d.path());
    assert!(matches!(bad, Err(CliError::Config(_))));
}

#[test]
fn bench_errors_are_reproducible() {
    let spec = small_bench(vec![BenchOp::AddCc, BenchOp::MulCs, BenchOp::Rotate(5)]);
    let strip = |recs: Vec<hesim_cli::bench::BenchRecord>| {
        recs.into_iter()
            .map(|r| (r.op, r.l_max, r.rep, r.error.to_bits(), r.levels))
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(run_bench(&spec).unwrap()), strip(run_bench(&spec).unwrap()));
}

#[test]
fn bench_rotation_errors_are_alike_and_scalar_adds_are_cheap() {
    let spec = BenchSpec {
        reps: 15,
        ..small_bench(vec![
            BenchOp::AddCc,
            BenchOp::AddCs,
            BenchOp::Rotate(-1),
            BenchOp::Rotate(5),
            BenchOp::Rotate(-25),
        ])
    };
    let rows = summarize(&run_bench(&spec).unwrap());
    let get = |op: &str| rows.iter().find(|r| r.op == op).unwrap();
    let rot: Vec<f64> = ["rotate:-1", "rotate:5", "rotate:-25"]
        .iter()
        .map(|o| get(o).median_error)
        .collect();
    let (lo, hi) = rot.iter().fold((f64::MAX, 0.0f64), |(a, b), &e| (a.min(e), b.max(e)));
    assert!(hi / lo < 10.0, "{rot:?}");
    assert!(get("add_cs").median_seconds < get("add_cc").median_seconds);
    assert!(rows.iter().all(|r| r.op.starts_with("rotate") || r.levels == 0));
}

#[test]
fn bench_command_writes_reports() {
    let d = TempDir::new().unwrap();
    let out = d.path().to_str().unwrap();
    let code = run(&[
        "bench", "--ring-dim", "4096", "--depths", "3", "--ops", "add_cc,mul_cc", "--growth-max", "8", "--out", out,
    ]);
    assert_eq!(code, 0);
    assert_eq!(header(d.path(), "bench.csv"), BENCH_HEADER.join(","));
    assert_eq!(read(d.path(), "bench.csv").lines().count(), 1 + 2 * 5);
    for f in ["bench_error.svg", "bench_time.svg", "noise_growth.csv", "noise_growth.svg", "bench_summary.json"] {
        assert!(d.path().join(f).exists(), "{f}");
    }
}

#[test]
fn configuration_errors_exit_with_two() {
    let d = TempDir::new().unwrap();
    let out = d.path().to_str().unwrap();
    assert_eq!(run(&["bench", "--reps", "4", "--out", out]), 2);
    assert_eq!(run(&["bench", "--ops", "fft", "--out", out]), 2);
    assert_eq!(run(&["bench", "--backend", "exact", "--out", out]), 2);
    assert_eq!(run(&["solve", "--n", "0", "--out", out]), 2);
    assert_eq!(run(&["solve", "--lrefresh", "40", "--out", out]), 2);
    assert_eq!(run(&["convergence", "--ns", "64,32", "--out", out]), 2);
    assert_eq!(run(&["no-such-command"]), 2);

    let cfg = d.path().join("bad.toml");
    fs::write(&cfg, "n = \"many\"\n").unwrap();
    assert_eq!(run(&["solve", "--config", cfg.to_str().unwrap(), "--out", out]), 2);
    assert_eq!(run(&["solve", "--config", "/nonexistent/cfg.toml", "--out", out]), 2);

    // output path blocked by a regular file
    let blocker = d.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let nested = blocker.join("sub");
    assert_eq!(run(&["solve", "--n", "16", "--out", nested.to_str().unwrap()]), 2);
}

#[test]
fn exit_codes_by_error_kind() {
    assert_eq!(CliError::Core(hesim::Error::LevelExhausted(0)).exit_code(), 3);
    assert_eq!(CliError::Config("x".into()).exit_code(), 2);
    assert_eq!(CliError::Core(hesim::Error::InvalidParameter("x".into())).exit_code(), 2);
}

#[test]
fn binary_rejects_bad_thread_count() {
    let d = TempDir::new().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_hesim"))
        .args(["solve", "--n", "16", "--out"])
        .arg(d.path())
        .env("HESIM_THREADS", "zero")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    let status = Command::new(env!("CARGO_BIN_EXE_hesim"))
        .args(["solve", "--n", "16", "--t-end", "0.1", "--out"])
        .arg(d.path())
        .env("HESIM_THREADS", "1")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
}

#[test]
fn encrypted_solve_on_a_small_ring() {
    let d = TempDir::new().unwrap();
    let cfg = SimConfig {
        backend: BackendKind::Encrypted,
        n: 32,
        t_end: 0.25,
        ring_dim: 4096,
        l_max: 10,
        l_refresh: 8,
        ..SimConfig::default()
    };
    let (r, s) = cmd_solve(&cfg, d.path()).unwrap();
    assert!(d.path().join("gap.svg").exists());
    assert!(!s.bootstrap_steps.is_empty());
    assert!(s.max_gap < 1e-4, "gap {}", s.max_gap);
    assert_eq!(s.step_seconds.len(), r.steps);
}
