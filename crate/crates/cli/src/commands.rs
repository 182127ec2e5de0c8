use std::path::{Path, PathBuf};

use hesim::secure::OpCounts;
use hesim::solvers::{
    convergence_sweep, exact_solution, l2_error, l_step, linf_error, run_simulation, ConvergenceRow, RunResult,
};
use serde::{Deserialize, Serialize};

use crate::bench::{self, BenchRecord, BenchSpec, Correlation, ReportRow};
use crate::config::SimConfig;
use crate::error::{CliError, CliResult};
use crate::report::{self, line_chart, num, opt_num, Axes, Series};

pub const BENCH_HEADER: [&str; 6] = ["op", "l_max", "rep", "error", "seconds", "levels"];
pub const CONVERGENCE_HEADER: [&str; 6] = ["n", "error", "eoc", "steps", "bootstraps", "max_gap"];
pub const FIELD_HEADER: [&str; 6] = ["i", "j", "x", "y", "u", "u_exact"];
pub const TRACE_HEADER: [&str; 9] = [
    "step", "t", "level", "refreshed", "adds", "mults", "rotates", "bootstraps", "gap",
];
pub const SWEEP_HEADER: [&str; 11] = [
    "l_refresh",
    "steps",
    "bootstraps",
    "adds",
    "mults",
    "rotates",
    "level_cost",
    "refresh_cost",
    "total_cost",
    "error",
    "model_error",
];

// ---- bench ----------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthSummary {
    pub l_max: usize,
    pub n_max: usize,
    pub correlated_slope: f64,
    pub uncorrelated_slope: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchSummary {
    pub spec: BenchSpec,
    pub rows: Vec<ReportRow>,
    pub growth: Option<GrowthSummary>,
    pub timestamp: u64,
}

pub fn bench_csv_rows(records: &[BenchRecord]) -> impl Iterator<Item = Vec<String>> + '_ {
    records.iter().map(|r| {
        vec![
            r.op.clone(),
            r.l_max.to_string(),
            r.rep.to_string(),
            num(r.error),
            num(r.seconds),
            r.levels.to_string(),
        ]
    })
}

/// Benchmarks, an optional noise-growth sweep (`growth_max >= 2`) and the
/// report files.
pub fn cmd_bench(spec: &BenchSpec, growth_max: usize, out: &Path) -> CliResult<BenchSummary> {
    spec.validate()?;
    report::ensure_dir(out)?;
    let records = bench::run_bench(spec)?;
    report::write_csv(out, "bench.csv", &BENCH_HEADER, bench_csv_rows(&records))?;
    let rows = bench::summarize(&records);

    let per_op = |f: fn(&ReportRow) -> f64| -> Vec<Series> {
        spec.ops
            .iter()
            .map(|op| {
                let name = op.to_string();
                let pts = rows
                    .iter()
                    .filter(|r| r.op == name)
                    .map(|r| (r.l_max as f64, f(r)))
                    .collect();
                Series::new(name, pts)
            })
            .collect()
    };
    let log_y = Axes { log_x: false, log_y: true };
    report::write_text(
        out,
        "bench_error.svg",
        &line_chart("Median L-inf error", "l_max", "error", log_y, &per_op(|r| r.median_error)),
    )?;
    report::write_text(
        out,
        "bench_time.svg",
        &line_chart("Median time per operation", "l_max", "seconds", log_y, &per_op(|r| r.median_seconds)),
    )?;

    let growth = if growth_max >= 2 {
        let depth = spec.depths[0];
        let c = bench::noise_growth(spec, depth, Correlation::Correlated, growth_max)?;
        let u = bench::noise_growth(spec, depth, Correlation::Uncorrelated, growth_max)?;
        report::write_csv(
            out,
            "noise_growth.csv",
            &["n", "correlated", "uncorrelated"],
            c.iter().zip(&u).map(|((n, a), (_, b))| vec![n.to_string(), num(*a), num(*b)]),
        )?;
        let pts = |v: &[(usize, f64)]| v.iter().map(|&(n, e)| (n as f64, e)).collect();
        report::write_text(
            out,
            "noise_growth.svg",
            &line_chart(
                "Error of repeated additions",
                "additions",
                "L-inf error",
                Axes { log_x: true, log_y: true },
                &[Series::new("correlated", pts(&c)), Series::new("uncorrelated", pts(&u))],
            ),
        )?;
        Some(GrowthSummary {
            l_max: depth,
            n_max: growth_max,
            correlated_slope: bench::loglog_slope(&c),
            uncorrelated_slope: bench::loglog_slope(&u),
        })
    } else {
        None
    };

    let summary = BenchSummary {
        spec: spec.clone(),
        rows,
        growth,
        timestamp: report::timestamp(),
    };
    report::write_json(out, "bench_summary.json", &summary)?;
    Ok(summary)
}

// ---- convergence ----------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub config: SimConfig,
    pub ns: Vec<usize>,
    pub rows: Vec<ConvergenceRow>,
    pub timestamp: u64,
}

pub fn check_grid_list(ns: &[usize]) -> CliResult<()> {
    if ns.is_empty() {
        return Err(CliError::Config("empty grid list".into()));
    }
    if let Some(n) = ns.iter().find(|&&n| !n.is_power_of_two() || n < 4) {
        return Err(CliError::Config(format!("grid size {n} is not a power of two >= 4")));
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Config("grid sizes must be ascending".into()));
    }
    Ok(())
}

pub fn convergence_csv_rows(rows: &[ConvergenceRow]) -> impl Iterator<Item = Vec<String>> + '_ {
    rows.iter().map(|r| {
        vec![
            r.n.to_string(),
            num(r.error),
            opt_num(r.eoc),
            r.steps.to_string(),
            r.bootstraps.to_string(),
            num(r.max_gap),
        ]
    })
}

/// L2 error and observed order over square grids of the sizes in `ns`.
pub fn cmd_convergence(cfg: &SimConfig, ns: &[usize], out: &Path) -> CliResult<Vec<ConvergenceRow>> {
    check_grid_list(ns)?;
    let mut probe = cfg.clone();
    probe.n = ns[0];
    probe.validate()?;
    report::ensure_dir(out)?;
    let rows = convergence_sweep(
        &cfg.advection(),
        cfg.dim,
        ns,
        |grid| cfg.backend_for(grid, grid.nx as u64).map_err(to_core),
        true,
    )?;
    report::write_csv(out, "convergence.csv", &CONVERGENCE_HEADER, convergence_csv_rows(&rows))?;
    report::write_text(
        out,
        "convergence.svg",
        &line_chart(
            &format!("{} {}D, {} backend", cfg.scheme, cfg.dim, cfg.backend),
            "N",
            "L2 error",
            Axes { log_x: true, log_y: true },
            &[Series::new(
                "e_N",
                rows.iter().map(|r| (r.n as f64, r.error)).collect(),
            )],
        ),
    )?;
    report::write_json(
        out,
        "convergence.json",
        &ConvergenceReport {
            config: cfg.clone(),
            ns: ns.to_vec(),
            rows: rows.clone(),
            timestamp: report::timestamp(),
        },
    )?;
    Ok(rows)
}

fn to_core(e: CliError) -> hesim::Error {
    match e {
        CliError::Core(c) => c,
        other => hesim::Error::InvalidParameter(other.to_string()),
    }
}

// ---- solve ----------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config: SimConfig,
    pub files: Vec<String>,
    pub timestamp: u64,
    pub version: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveSummary {
    pub steps: usize,
    pub dt: f64,
    pub t_final: f64,
    pub l_step: usize,
    pub at_capacity: bool,
    pub bootstrap_steps: Vec<usize>,
    pub total_counts: OpCounts,
    pub l2_error: f64,
    pub linf_error: f64,
    pub max_gap: f64,
    pub setup_seconds: f64,
    pub step_seconds: Vec<f64>,
}

fn file_names(paths: &[PathBuf]) -> Vec<String> {
    paths
        .iter()
        .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
        .collect()
}

/// One full simulation with its field, trace, summary and manifest files.
pub fn cmd_solve(cfg: &SimConfig, out: &Path) -> CliResult<(RunResult, SolveSummary)> {
    cfg.validate()?;
    report::ensure_dir(out)?;
    let grid = cfg.grid();
    let advection = cfg.advection();
    let sa = cfg.backend_for(&grid, 0)?;
    let r = run_simulation(&advection, &grid, &sa)?;
    let exact = exact_solution(&grid, &advection, r.t_final);

    let mut files = Vec::new();
    let nodes = grid.nodes();
    files.push(report::write_csv(
        out,
        "final_field.csv",
        &FIELD_HEADER,
        nodes.iter().enumerate().map(|(k, &(x, y))| {
            vec![
                (k % grid.nx).to_string(),
                (k / grid.nx).to_string(),
                num(x),
                num(y),
                num(r.final_state[k]),
                num(exact[k]),
            ]
        }),
    )?);
    files.push(report::write_csv(
        out,
        "trace.csv",
        &TRACE_HEADER,
        (0..r.steps).map(|n| {
            let t = if n + 1 == r.steps { r.t_final } else { (n + 1) as f64 * r.dt };
            let c = r.counts[n];
            vec![
                (n + 1).to_string(),
                num(t),
                r.levels[n].to_string(),
                u8::from(r.bootstrap_steps.contains(&(n + 1))).to_string(),
                c.adds.to_string(),
                c.mults.to_string(),
                c.rotates.to_string(),
                c.bootstraps.to_string(),
                num(r.gap[n]),
            ]
        }),
    )?);
    let slice: Vec<usize> = (0..grid.nx).collect();
    files.push(report::write_text(
        out,
        "final_field.svg",
        &line_chart(
            &format!("{} {}D N={} at t={:.3}", cfg.scheme, cfg.dim, cfg.n, r.t_final),
            "x",
            "u (y = 0)",
            Axes::default(),
            &[
                Series::new("computed", slice.iter().map(|&i| (nodes[i].0, r.final_state[i])).collect()),
                Series::new("exact", slice.iter().map(|&i| (nodes[i].0, exact[i])).collect()),
            ],
        ),
    )?);
    if sa.is_encrypted() {
        files.push(report::write_text(
            out,
            "gap.svg",
            &line_chart(
                "Encrypted vs exact backend",
                "step",
                "L-inf gap",
                Axes { log_x: false, log_y: true },
                &[Series::new(
                    "gap",
                    r.gap.iter().enumerate().map(|(n, &g)| ((n + 1) as f64, g)).collect(),
                )],
            ),
        )?);
    }

    let summary = SolveSummary {
        steps: r.steps,
        dt: r.dt,
        t_final: r.t_final,
        l_step: r.l_step,
        at_capacity: r.at_capacity,
        bootstrap_steps: r.bootstrap_steps.clone(),
        total_counts: r.total_counts(),
        l2_error: l2_error(&r.final_state, &exact)?,
        linf_error: linf_error(&r.final_state, &exact)?,
        max_gap: r.max_gap(),
        setup_seconds: r.setup_seconds,
        step_seconds: r.step_seconds.clone(),
    };
    files.push(report::write_json(out, "summary.json", &summary)?);
    let mut names = file_names(&files);
    names.push("manifest.json".into());
    report::write_json(
        out,
        "manifest.json",
        &Manifest {
            config: cfg.clone(),
            files: names,
            timestamp: report::timestamp(),
            version: env!("CARGO_PKG_VERSION").into(),
        },
    )?;
    Ok((r, summary))
}

// ---- sweep-refresh ----------------------------------------------------------

/// Linear per-level cost model: an operation at level `l` costs `l + 1`
/// units, a refresh costs `refresh_cost·(l_max + 1)` units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub refresh_cost: f64,
    /// Levels a real bootstrap would consume above `l_refresh`.
    pub bootstrap_reserve: usize,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            refresh_cost: 60.0,
            bootstrap_reserve: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub l_refresh: usize,
    pub steps: usize,
    pub bootstraps: usize,
    pub counts: OpCounts,
    pub level_cost: f64,
    pub refresh_cost: f64,
    pub total_cost: f64,
    /// Measured L2 error against the exact solution.
    pub error: f64,
    /// `bootstraps · eps_boot`.
    pub model_error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: SimConfig,
    pub model: CostModel,
    pub rows: Vec<SweepRow>,
    pub best_l_refresh: usize,
    pub timestamp: u64,
}

/// Level-weighted cost of a finished run.
pub fn level_cost(r: &RunResult) -> f64 {
    r.counts
        .iter()
        .zip(&r.levels)
        .map(|(c, &after)| {
            let ops = (c.adds + c.mults + c.rotates) as f64;
            ops * (after + r.l_step + 1) as f64
        })
        .sum()
}

pub fn sweep_csv_rows(rows: &[SweepRow]) -> impl Iterator<Item = Vec<String>> + '_ {
    rows.iter().map(|r| {
        vec![
            r.l_refresh.to_string(),
            r.steps.to_string(),
            r.bootstraps.to_string(),
            r.counts.adds.to_string(),
            r.counts.mults.to_string(),
            r.counts.rotates.to_string(),
            num(r.level_cost),
            num(r.refresh_cost),
            num(r.total_cost),
            num(r.error),
            num(r.model_error),
        ]
    })
}

pub fn cmd_sweep_refresh(cfg: &SimConfig, list: &[usize], model: CostModel, out: &Path) -> CliResult<SweepReport> {
    cfg.validate()?;
    if list.is_empty() || list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Config("l_refresh list must be non-empty and ascending".into()));
    }
    if !(model.refresh_cost >= 0.0 && model.refresh_cost.is_finite()) {
        return Err(CliError::Config("refresh cost must be non-negative".into()));
    }
    let grid = cfg.grid();
    let cap = cfg.capacity_for(&grid);
    let need = l_step(cfg.scheme, cfg.dim, cap == grid.len()) + cfg.policy().margin();
    let top = cfg.l_max.saturating_sub(model.bootstrap_reserve);
    if let Some(bad) = list.iter().find(|&&l| l > top || l < need) {
        return Err(CliError::Config(format!(
            "l_refresh {bad} outside {need}..={top} (l_max {} minus reserve {}, at least one step plus margin)",
            cfg.l_max, model.bootstrap_reserve
        )));
    }
    report::ensure_dir(out)?;
    let advection = cfg.advection();
    let mut rows = Vec::with_capacity(list.len());
    for &l_refresh in list {
        let c = SimConfig {
            l_refresh,
            ..cfg.clone()
        };
        let sa = c.backend_for(&grid, l_refresh as u64)?;
        let r = run_simulation(&advection, &grid, &sa)?;
        let exact = exact_solution(&grid, &advection, r.t_final);
        let bootstraps = r.bootstrap_steps.len();
        let level = level_cost(&r);
        let refresh = bootstraps as f64 * model.refresh_cost * (cfg.l_max + 1) as f64;
        rows.push(SweepRow {
            l_refresh,
            steps: r.steps,
            bootstraps,
            counts: r.total_counts(),
            level_cost: level,
            refresh_cost: refresh,
            total_cost: level + refresh,
            error: l2_error(&r.final_state, &exact)?,
            model_error: bootstraps as f64 * cfg.eps_boot,
        });
    }
    let best = rows
        .iter()
        .min_by(|a, b| a.total_cost.total_cmp(&b.total_cost))
        .map(|r| r.l_refresh)
        .expect("non-empty list");
    report::write_csv(out, "sweep_refresh.csv", &SWEEP_HEADER, sweep_csv_rows(&rows))?;
    let pts = |f: fn(&SweepRow) -> f64| rows.iter().map(|r| (r.l_refresh as f64, f(r))).collect();
    report::write_text(
        out,
        "sweep_cost.svg",
        &line_chart(
            "Level-weighted cost",
            "l_refresh",
            "cost units",
            Axes::default(),
            &[
                Series::new("total", pts(|r| r.total_cost)),
                Series::new("operations", pts(|r| r.level_cost)),
                Series::new("refresh", pts(|r| r.refresh_cost)),
            ],
        ),
    )?;
    report::write_text(
        out,
        "sweep_error.svg",
        &line_chart(
            "Error",
            "l_refresh",
            "error",
            Axes { log_x: false, log_y: true },
            &[
                Series::new("measured L2", pts(|r| r.error)),
                Series::new("refresh noise model", pts(|r| r.model_error)),
            ],
        ),
    )?;
    let rep = SweepReport {
        config: cfg.clone(),
        model,
        rows,
        best_l_refresh: best,
        timestamp: report::timestamp(),
    };
    report::write_json(out, "sweep_refresh.json", &rep)?;
    Ok(rep)
}
