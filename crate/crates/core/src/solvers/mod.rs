//! Finite-difference solvers for linear advection `u_t + a·∇u = 0` on the
//! periodic unit square, written purely in terms of secure-array operations.

mod metrics;
mod run;
mod schemes;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use metrics::{convergence_sweep, eoc, exact_solution, l2_error, linf_error, ConvergenceRow};
pub use run::{dry_run_l_step, refresh_schedule, run_simulation, RunResult};
pub use schemes::{step, step_lw_1d, step_lw_2d, step_upwind_1d, step_upwind_2d, SecureField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Upwind,
    LaxWendroff,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Upwind => "upwind",
            Scheme::LaxWendroff => "lax_wendroff",
        })
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "upwind" | "up" => Ok(Scheme::Upwind),
            "lax_wendroff" | "laxwendroff" | "lw" => Ok(Scheme::LaxWendroff),
            _ => Err(Error::InvalidParameter(format!("unknown scheme {s:?}"))),
        }
    }
}

/// Periodic function on the unit square; the second argument is ignored in 1D.
#[derive(Clone)]
pub struct PeriodicFn(pub Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>);

impl fmt::Debug for PeriodicFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PeriodicFn(..)")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// `sin(2π·kx·x)` in 1D, `sin(2π·kx·x)·sin(2π·ky·y)` in 2D.
    Sine { kx: u32, ky: u32 },
    #[serde(skip)]
    Custom(PeriodicFn),
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Sine { kx: 1, ky: 1 }
    }
}

impl InitialCondition {
    pub fn eval(&self, dim: usize, x: f64, y: f64) -> f64 {
        use std::f64::consts::TAU;
        match self {
            InitialCondition::Sine { kx, ky } => {
                let fx = (TAU * *kx as f64 * x).sin();
                if dim == 1 {
                    fx
                } else {
                    fx * (TAU * *ky as f64 * y).sin()
                }
            }
            InitialCondition::Custom(f) => (f.0)(x, y),
        }
    }
}

/// Equidistant periodic grid with nodes `x_i = i·dx`, `i = 0..nx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn one_d(nx: usize) -> Self {
        Self { dim: 1, nx, ny: 1 }
    }

    pub fn two_d(nx: usize, ny: usize) -> Self {
        Self { dim: 2, nx, ny }
    }

    /// `one_d(n)` or `two_d(n, n)`.
    pub fn square(dim: usize, n: usize) -> Self {
        if dim == 1 {
            Self::one_d(n)
        } else {
            Self::two_d(n, n)
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.dim {
            1 if self.nx >= 4 && self.ny == 1 => Ok(()),
            2 if self.nx >= 4 && self.ny >= 4 => Ok(()),
            _ => Err(Error::InvalidParameter(format!(
                "invalid grid: dim {} with {}x{} nodes (need dim 1|2 and N >= 4)",
                self.dim, self.nx, self.ny
            ))),
        }
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        1.0 / self.ny as f64
    }

    /// Number of unknowns.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node coordinates in packing order (column-major in 2D: `i + j·nx`).
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        let (dx, dy) = (self.dx(), self.dy());
        let mut out = Vec::with_capacity(self.len());
        for j in 0..self.ny {
            for i in 0..self.nx {
                let y = if self.dim == 1 { 0.0 } else { j as f64 * dy };
                out.push((i as f64 * dx, y));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdvectionConfig {
    pub ax: f64,
    pub ay: f64,
    pub cfl: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    #[serde(default)]
    pub u0: InitialCondition,
}

impl Default for AdvectionConfig {
    fn default() -> Self {
        Self {
            ax: 1.0,
            ay: 1.0,
            cfl: 0.5,
            t_end: 1.0,
            scheme: Scheme::LaxWendroff,
            u0: InitialCondition::default(),
        }
    }
}

impl AdvectionConfig {
    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        grid.validate()?;
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.ax > 0.0 && self.ax.is_finite()) {
            return bad(format!("advection speed a_x = {} must be positive", self.ax));
        }
        if grid.dim == 2 && !(self.ay > 0.0 && self.ay.is_finite()) {
            return bad(format!("advection speed a_y = {} must be positive", self.ay));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("CFL number {} must lie in (0, 1]", self.cfl));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end = {} must be positive", self.t_end));
        }
        Ok(())
    }

    /// `cfl·dx/a_x` in 1D and `cfl / (a_x/dx + a_y/dy)` in 2D.
    pub fn dt(&self, grid: &GridSpec) -> f64 {
        if grid.dim == 1 {
            self.cfl * grid.dx() / self.ax
        } else {
            self.cfl / (self.ax / grid.dx() + self.ay / grid.dy())
        }
    }

    /// Number of time steps, counting a final partial step.
    pub fn steps(&self, grid: &GridSpec) -> usize {
        let r = self.t_end / self.dt(grid);
        // tolerate round-off in t_end / dt for exact multiples
        (r - 1e-9 * r.max(1.0)).ceil().max(1.0) as usize
    }
}

/// Plaintext stencil factors for one step of size `dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepCoefficients {
    pub scheme: Scheme,
    pub dim: usize,
    pub dt: f64,
    /// `a_x·dt/dx`
    pub cx: f64,
    /// `a_y·dt/dy` (zero in 1D)
    pub cy: f64,
}

impl StepCoefficients {
    pub fn new(config: &AdvectionConfig, grid: &GridSpec, dt: f64) -> Self {
        let cy = if grid.dim == 2 { config.ay * dt / grid.dy() } else { 0.0 };
        Self {
            scheme: config.scheme,
            dim: grid.dim,
            dt,
            cx: config.ax * dt / grid.dx(),
            cy,
        }
    }

    /// Weight of `u` in the Lax-Wendroff update.
    pub fn lw_center(&self) -> f64 {
        1.0 - self.cx * self.cx - self.cy * self.cy
    }

    /// Weights of the backward (`shift -1`) and forward (`shift +1`)
    /// neighbours along x in the Lax-Wendroff update.
    pub fn lw_x(&self) -> (f64, f64) {
        let s = self.cx * self.cx / 2.0;
        (s - self.cx / 2.0, s + self.cx / 2.0)
    }

    pub fn lw_y(&self) -> (f64, f64) {
        let s = self.cy * self.cy / 2.0;
        (s - self.cy / 2.0, s + self.cy / 2.0)
    }

    /// `a_x·a_y·dt²/(4·dx·dy)`
    pub fn lw_cross(&self) -> f64 {
        self.cx * self.cy / 4.0
    }
}

/// Levels one step consumes: one for the scalar weights plus whatever the
/// circular shifts need in the given capacity regime.
pub fn l_step(scheme: Scheme, dim: usize, at_capacity: bool) -> usize {
    match (scheme, dim, at_capacity) {
        (_, 1, true) => 1,
        (_, 1, false) => 2,
        (Scheme::Upwind, _, _) => 2,
        (Scheme::LaxWendroff, _, true) => 2,
        (Scheme::LaxWendroff, _, false) => 3,
    }
}
