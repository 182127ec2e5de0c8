use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::run::run_simulation;
use super::{AdvectionConfig, GridSpec};
use crate::secure::SecureArithmetic;
use crate::{Error, Result};

/// `u0(x - a_x t, y - a_y t)` at every node, wrapped periodically, in
/// packing order.
pub fn exact_solution(grid: &GridSpec, config: &AdvectionConfig, t: f64) -> Vec<f64> {
    grid.nodes()
        .into_iter()
        .map(|(x, y)| {
            let xs = (x - config.ax * t).rem_euclid(1.0);
            let ys = (y - config.ay * t).rem_euclid(1.0);
            config.u0.eval(grid.dim, xs, ys)
        })
        .collect()
}

fn check_len(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() || u.is_empty() {
        return Err(Error::ShapeMismatch(format!("{} vs {} values", u.len(), v.len())));
    }
    Ok(())
}

/// Discrete L2 norm of the difference, weighted by the cell size:
/// `sqrt(Σ (u_i - v_i)² / n)`.
pub fn l2_error(u: &[f64], exact: &[f64]) -> Result<f64> {
    check_len(u, exact)?;
    let s: f64 = u.iter().zip(exact).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((s / u.len() as f64).sqrt())
}

pub fn linf_error(u: &[f64], exact: &[f64]) -> Result<f64> {
    check_len(u, exact)?;
    Ok(u.iter().zip(exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// `log2(e_n / e_2n)`; NaN unless both errors are positive and finite.
pub fn eoc(e_n: f64, e_2n: f64) -> f64 {
    if e_n > 0.0 && e_2n > 0.0 && e_n.is_finite() && e_2n.is_finite() {
        (e_n / e_2n).log2()
    } else {
        f64::NAN
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub error: f64,
    /// Against the previous (coarser) row; `None` for the first.
    pub eoc: Option<f64>,
    pub steps: usize,
    pub bootstraps: usize,
    pub max_gap: f64,
}

/// Runs `config` on square grids of the given sizes and tabulates the L2
/// error at the final time and the observed order between neighbours.
pub fn convergence_sweep<F>(
    config: &AdvectionConfig,
    dim: usize,
    ns: &[usize],
    make_backend: F,
    parallel: bool,
) -> Result<Vec<ConvergenceRow>>
where
    F: Fn(&GridSpec) -> Result<SecureArithmetic> + Sync,
{
    if ns.is_empty() || ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("grid sizes must be ascending".into()));
    }
    let one = |&n: &usize| -> Result<(usize, f64, usize, usize, f64)> {
        let grid = GridSpec::square(dim, n);
        let sa = make_backend(&grid)?;
        let r = run_simulation(config, &grid, &sa)?;
        let e = l2_error(&r.final_state, &exact_solution(&grid, config, r.t_final))?;
        Ok((n, e, r.steps, r.bootstrap_steps.len(), r.max_gap()))
    };
    let raw: Vec<_> = if parallel {
        ns.par_iter().map(one).collect::<Result<_>>()?
    } else {
        ns.iter().map(one).collect::<Result<_>>()?
    };
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(raw.len());
    for (n, error, steps, bootstraps, max_gap) in raw {
        let eoc = rows.last().map(|p| eoc(p.error, error));
        rows.push(ConvergenceRow {
            n,
            error,
            eoc,
            steps,
            bootstraps,
            max_gap,
        });
    }
    Ok(rows)
}
