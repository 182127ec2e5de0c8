use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metrics::{exact_solution, linf_error};
use super::schemes::{step, SecureField};
use super::{l_step, AdvectionConfig, GridSpec, Scheme, StepCoefficients};
use crate::secure::{OpCounts, SecureArithmetic};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub grid: GridSpec,
    pub scheme: Scheme,
    pub dt: f64,
    pub steps: usize,
    pub t_final: f64,
    pub l_step: usize,
    pub at_capacity: bool,
    /// Decrypted solution in packing order (column-major in 2D).
    pub final_state: Vec<f64>,
    /// Final state of the exact-backend twin.
    pub twin_state: Vec<f64>,
    /// Per-step L∞ distance to the exact-backend twin (zeros on the exact backend).
    pub gap: Vec<f64>,
    pub step_seconds: Vec<f64>,
    /// Dry run, key generation and initial encryption.
    pub setup_seconds: f64,
    /// Operations per step, the refresh included.
    pub counts: Vec<OpCounts>,
    /// Level after each step.
    pub levels: Vec<usize>,
    /// 1-based numbers of the steps that started with a refresh.
    pub bootstrap_steps: Vec<usize>,
}

impl RunResult {
    pub fn total_counts(&self) -> OpCounts {
        self.counts.iter().copied().fold(OpCounts::default(), |a, b| a + b)
    }

    pub fn max_gap(&self) -> f64 {
        self.gap.iter().copied().fold(0.0, f64::max)
    }
}

/// 1-based step numbers at which the guard `level - l_step < margin` fires,
/// starting from `l_max` and restoring `l_refresh`.
pub fn refresh_schedule(l_max: usize, l_refresh: usize, l_step: usize, margin: usize, steps: usize) -> Vec<usize> {
    let mut level = l_max as i64;
    let mut out = Vec::new();
    for n in 1..=steps {
        if level - (l_step as i64) < margin as i64 {
            out.push(n);
            level = l_refresh as i64;
        }
        level -= l_step as i64;
    }
    out
}

fn encode_field(sa: &SecureArithmetic, grid: &GridSpec, values: &[f64]) -> Result<SecureField> {
    Ok(if grid.dim == 1 {
        SecureField::Vector(sa.enc_vector(values)?)
    } else {
        SecureField::Matrix(sa.enc_matrix_packed(values, grid.nx, grid.ny)?)
    })
}

/// Steps an exact twin once from `l_max` and returns the levels consumed.
/// Generates every rotation key the step needs on `sa`.
pub fn dry_run_l_step(sa: &SecureArithmetic, config: &AdvectionConfig, grid: &GridSpec) -> Result<usize> {
    let twin = sa.exact_twin();
    let u = encode_field(&twin, grid, &vec![0.0; grid.len()])?;
    let coeffs = StepCoefficients::new(config, grid, config.dt(grid));
    let next = step(&twin, &u, &coeffs)?;
    sa.prepare_rotations(&twin.recorded_rotations())?;
    Ok(u.level() - next.level())
}

/// Time loop: refresh when the next step would not fit, then step.
pub fn run_simulation(config: &AdvectionConfig, grid: &GridSpec, sa: &SecureArithmetic) -> Result<RunResult> {
    config.validate(grid)?;
    let len = grid.len();
    let capacity = sa.capacity();
    if len > capacity {
        return Err(Error::CapacityExceeded { len, capacity });
    }
    let at_capacity = len == capacity;
    let l_step = l_step(config.scheme, grid.dim, at_capacity);
    let margin = sa.policy().margin();
    if sa.l_refresh() < l_step + margin {
        return Err(Error::InvalidParameter(format!(
            "l_refresh {} cannot fit a step of {l_step} levels plus a margin of {margin}",
            sa.l_refresh()
        )));
    }

    let setup = Instant::now();
    let measured = dry_run_l_step(sa, config, grid)?;
    if measured != l_step {
        return Err(Error::InvalidParameter(format!(
            "dry run consumed {measured} levels per step, table says {l_step}"
        )));
    }
    let u0 = exact_solution(grid, config, 0.0);
    let mut u = encode_field(sa, grid, &u0)?;
    let twin_sa = sa.is_encrypted().then(|| sa.exact_twin());
    let mut twin = match &twin_sa {
        Some(t) => Some(encode_field(t, grid, &u0)?),
        None => None,
    };
    let setup_seconds = setup.elapsed().as_secs_f64();

    let dt = config.dt(grid);
    let steps = config.steps(grid);
    let full = StepCoefficients::new(config, grid, dt);
    sa.reset_counters();

    let mut result = RunResult {
        grid: *grid,
        scheme: config.scheme,
        dt,
        steps,
        t_final: 0.0,
        l_step,
        at_capacity,
        final_state: Vec::new(),
        twin_state: Vec::new(),
        gap: Vec::with_capacity(steps),
        step_seconds: Vec::with_capacity(steps),
        setup_seconds,
        counts: Vec::with_capacity(steps),
        levels: Vec::with_capacity(steps),
        bootstrap_steps: Vec::new(),
    };
    let mut t = 0.0;
    for n in 0..steps {
        let mut h = if n + 1 == steps { config.t_end - n as f64 * dt } else { dt };
        if (h - dt).abs() <= 1e-12 * dt {
            h = dt;
        }
        let coeffs = if h == dt { full } else { StepCoefficients::new(config, grid, h) };

        let before = sa.counts();
        let clock = Instant::now();
        if sa.needs_refresh(u.level(), l_step) {
            result.bootstrap_steps.push(n + 1);
        }
        u = u.maybe_refresh(sa, l_step)?;
        u = step(sa, &u, &coeffs)?;
        result.step_seconds.push(clock.elapsed().as_secs_f64());
        result.counts.push(sa.counts() - before);
        result.levels.push(u.level());

        let gap = match (&twin_sa, twin.as_mut()) {
            (Some(tsa), Some(tw)) => {
                *tw = step(tsa, &tw.maybe_refresh(tsa, l_step)?, &coeffs)?;
                if tw.level() != u.level() {
                    return Err(Error::LevelMismatch(u.level(), tw.level()));
                }
                linf_error(&u.decrypt(sa)?, &tw.decrypt(tsa)?)?
            }
            _ => 0.0,
        };
        result.gap.push(gap);
        t = n as f64 * dt + h;
    }
    result.t_final = t;
    result.final_state = u.decrypt(sa)?;
    result.twin_state = match (&twin_sa, &twin) {
        (Some(tsa), Some(tw)) => tw.decrypt(tsa)?,
        _ => result.final_state.clone(),
    };
    Ok(result)
}
