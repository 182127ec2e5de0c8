//! Command-line harness: primitive-operation benchmarks, convergence sweeps,
//! full simulations and refresh-depth sweeps.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 when a run
//! exhausts its levels, 1 for anything else.

pub mod bench;
pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use hesim::solvers::Scheme;

use crate::bench::{BenchOp, BenchSpec, Correlation};
use crate::commands::CostModel;
use crate::config::{BackendKind, Overrides, SimConfig};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "hesim", version, about = "Encrypted finite-difference simulations on a toy CKKS engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Time and measure the error of primitive operations over l_max.
    Bench(BenchArgs),
    /// Error and observed order over a list of grid sizes.
    Convergence(ConvergenceArgs),
    /// One full simulation.
    Solve(SolveArgs),
    /// Error and level-weighted cost over a list of l_refresh values.
    SweepRefresh(SweepArgs),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    backend: Option<BackendKind>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Flat TOML config (or a JSON manifest from `solve`).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    eps_boot: Option<f64>,
    #[arg(long)]
    lmax: Option<usize>,
    #[arg(long)]
    lrefresh: Option<usize>,
    #[arg(long)]
    ring_dim: Option<usize>,
    #[arg(long)]
    scale_bits: Option<u32>,
}

/// Problem overrides shared by the simulation commands.
#[derive(Debug, Args)]
struct Problem {
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<Scheme>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    cfl: Option<f64>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated ops, e.g. `add_cc,mul_cs,rotate:-1`; default all.
    #[arg(long, value_delimiter = ',')]
    ops: Option<Vec<BenchOp>>,
    /// Comma-separated l_max values.
    #[arg(long, value_delimiter = ',')]
    depths: Option<Vec<usize>>,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value = "uncorrelated")]
    correlation: Correlation,
    /// Longest repeated-addition chain for the noise-growth report; 0 skips it.
    #[arg(long, default_value_t = 128)]
    growth_max: usize,
}

#[derive(Debug, Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    problem: Problem,
    /// Comma-separated ascending powers of two.
    #[arg(long, value_delimiter = ',', default_value = "32,64,128,256")]
    ns: Vec<usize>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    problem: Problem,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    problem: Problem,
    /// Comma-separated ascending l_refresh values.
    #[arg(long, value_delimiter = ',', default_value = "3,5,7,9,11,13,15,17,19,21,23,25")]
    lrefresh_list: Vec<usize>,
    /// Cost of one refresh in units of an operation at level l_max.
    #[arg(long, default_value_t = CostModel::default().refresh_cost)]
    refresh_cost: f64,
    /// Levels reserved above l_refresh for the bootstrap itself.
    #[arg(long, default_value_t = CostModel::default().bootstrap_reserve)]
    bootstrap_reserve: usize,
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    Scheme::from_str(s).map_err(|e| e.to_string())
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            backend: self.backend,
            seed: self.seed,
            eps_boot: self.eps_boot,
            l_max: self.lmax,
            l_refresh: self.lrefresh,
            ring_dim: self.ring_dim,
            scale_bits: self.scale_bits,
        }
    }

    fn load(&self) -> CliResult<SimConfig> {
        let mut cfg = match &self.config {
            Some(p) => SimConfig::load(p)?,
            None => SimConfig::default(),
        };
        cfg.apply(&self.overrides());
        Ok(cfg)
    }
}

impl Problem {
    fn apply(&self, cfg: &mut SimConfig) {
        if let Some(s) = self.scheme {
            cfg.scheme = s;
        }
        if let Some(d) = self.dim {
            cfg.dim = d;
        }
        if let Some(n) = self.n {
            cfg.n = n;
        }
        if let Some(t) = self.t_end {
            cfg.t_end = t;
        }
        if let Some(c) = self.cfl {
            cfg.cfl = c;
        }
    }
}

fn bench(a: &BenchArgs) -> CliResult<()> {
    if a.common.backend == Some(BackendKind::Exact) {
        return Err(CliError::Config("bench always measures the encrypted backend".into()));
    }
    let cfg = a.common.load()?;
    let defaults = BenchSpec::default();
    let depths = match (&a.depths, a.common.lmax) {
        (Some(d), _) => d.clone(),
        (None, Some(l)) => vec![l],
        (None, None) => defaults.depths.clone(),
    };
    let spec = BenchSpec {
        ops: a.ops.clone().unwrap_or(defaults.ops),
        depths,
        reps: a.reps,
        correlation: a.correlation,
        ring_dim: cfg.ring_dim,
        scale_bits: cfg.scale_bits,
        l_refresh: cfg.l_refresh,
        eps_boot: cfg.eps_boot,
        seed: cfg.seed,
    };
    let s = commands::cmd_bench(&spec, a.growth_max, &a.common.out)?;
    println!("{:<16} {:>5} {:>12} {:>12} {:>6}", "op", "l_max", "error", "seconds", "levels");
    for r in &s.rows {
        println!(
            "{:<16} {:>5} {:>12.3e} {:>12.3e} {:>6}",
            r.op, r.l_max, r.median_error, r.median_seconds, r.levels
        );
    }
    if let Some(g) = &s.growth {
        println!(
            "noise growth slopes: correlated {:.3}, uncorrelated {:.3}",
            g.correlated_slope, g.uncorrelated_slope
        );
    }
    Ok(())
}

fn convergence(a: &ConvergenceArgs) -> CliResult<()> {
    let mut cfg = a.common.load()?;
    if a.common.config.is_none() {
        // convergence studies run over half a period unless configured otherwise
        cfg.t_end = 0.5;
    }
    a.problem.apply(&mut cfg);
    let rows = commands::cmd_convergence(&cfg, &a.ns, &a.common.out)?;
    println!("{:>6} {:>12} {:>6}", "N", "e_N", "EOC");
    for r in &rows {
        let eoc = r.eoc.map(|e| format!("{e:.2}")).unwrap_or_else(|| "-".into());
        println!("{:>6} {:>12.3e} {:>6}", r.n, r.error, eoc);
    }
    Ok(())
}

fn solve(a: &SolveArgs) -> CliResult<()> {
    let mut cfg = a.common.load()?;
    a.problem.apply(&mut cfg);
    let (_, s) = commands::cmd_solve(&cfg, &a.common.out)?;
    println!(
        "{} steps to t = {}, L2 error {:.3e}, refreshes at {:?}, max backend gap {:.3e}",
        s.steps, s.t_final, s.l2_error, s.bootstrap_steps, s.max_gap
    );
    Ok(())
}

fn sweep(a: &SweepArgs) -> CliResult<()> {
    let mut cfg = a.common.load()?;
    a.problem.apply(&mut cfg);
    let model = CostModel {
        refresh_cost: a.refresh_cost,
        bootstrap_reserve: a.bootstrap_reserve,
    };
    let rep = commands::cmd_sweep_refresh(&cfg, &a.lrefresh_list, model, &a.common.out)?;
    println!("{:>9} {:>10} {:>12} {:>12}", "l_refresh", "refreshes", "total cost", "error");
    for r in &rep.rows {
        println!(
            "{:>9} {:>10} {:>12.4e} {:>12.3e}",
            r.l_refresh, r.bootstraps, r.total_cost, r.error
        );
    }
    println!("lowest modelled cost at l_refresh = {}", rep.best_l_refresh);
    Ok(())
}

/// Caps the global thread pool at `HESIM_THREADS` when set.
fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("HESIM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("HESIM_THREADS={v:?} is not a positive integer")))?;
    // a pool built earlier in the same process keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = init_threads().and_then(|_| match &cli.command {
        Command::Bench(a) => bench(a),
        Command::Convergence(a) => convergence(a),
        Command::Solve(a) => solve(a),
        Command::SweepRefresh(a) => sweep(a),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
