use std::fmt;
use std::path::Path;
use std::str::FromStr;

use hesim::ckks::{CkksParams, RefreshMode, RefreshPolicy};
use hesim::secure::{default_capacity, SecureArithmetic};
use hesim::solvers::{AdvectionConfig, GridSpec, InitialCondition, Scheme};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Exact,
    Encrypted,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Exact => "exact",
            BackendKind::Encrypted => "encrypted",
        })
    }
}

impl FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(BackendKind::Exact),
            "encrypted" | "ckks" => Ok(BackendKind::Encrypted),
            _ => Err(format!("unknown backend {s:?} (expected exact or encrypted)")),
        }
    }
}

/// Everything a run needs. Serialized as a flat TOML table; every key is
/// optional and falls back to the desk defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub scheme: Scheme,
    pub dim: usize,
    pub n: usize,
    pub cfl: f64,
    pub t_end: f64,
    pub ax: f64,
    pub ay: f64,
    /// Wave numbers of the sine initial condition.
    pub kx: u32,
    pub ky: u32,
    pub backend: BackendKind,
    pub seed: u64,
    pub eps_boot: f64,
    pub refresh_mode: RefreshMode,
    pub l_max: usize,
    pub l_refresh: usize,
    pub ring_dim: usize,
    pub scale_bits: u32,
    pub dnum: usize,
    /// Packing capacity; defaults to the grid size rounded up to a power of two.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capacity: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        let p = CkksParams::default();
        Self {
            scheme: Scheme::LaxWendroff,
            dim: 1,
            n: 64,
            cfl: 0.5,
            t_end: 1.0,
            ax: 1.0,
            ay: 1.0,
            kx: 1,
            ky: 1,
            backend: BackendKind::Exact,
            seed: 1,
            eps_boot: RefreshPolicy::standard().eps_boot,
            refresh_mode: RefreshMode::Standard,
            l_max: p.l_max,
            l_refresh: p.l_refresh,
            ring_dim: p.ring_dim,
            scale_bits: p.scale_bits,
            dnum: p.dnum,
            capacity: None,
        }
    }
}

/// Values given on the command line; `Some` wins over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub backend: Option<BackendKind>,
    pub seed: Option<u64>,
    pub eps_boot: Option<f64>,
    pub l_max: Option<usize>,
    pub l_refresh: Option<usize>,
    pub ring_dim: Option<usize>,
    pub scale_bits: Option<u32>,
}

impl SimConfig {
    /// Reads a flat TOML file, or a JSON manifest written by `solve` (its
    /// `config` object) or a bare JSON config.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Input {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: SimConfig = if text.trim_start().starts_with('{') {
            let mut v: serde_json::Value =
                serde_json::from_str(text).map_err(|e| CliError::Config(format!("malformed JSON: {e}")))?;
            if let Some(inner) = v.get_mut("config") {
                v = inner.take();
            }
            serde_json::from_value(v).map_err(|e| CliError::Config(format!("malformed JSON config: {e}")))?
        } else {
            toml::from_str(text).map_err(|e| CliError::Config(format!("malformed config: {e}")))?
        };
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.backend {
            self.backend = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.eps_boot {
            self.eps_boot = v;
        }
        if let Some(v) = o.l_max {
            self.l_max = v;
        }
        if let Some(v) = o.l_refresh {
            self.l_refresh = v;
        }
        if let Some(v) = o.ring_dim {
            self.ring_dim = v;
        }
        if let Some(v) = o.scale_bits {
            self.scale_bits = v;
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let grid = self.grid();
        self.advection().validate(&grid)?;
        if !(self.eps_boot >= 0.0 && self.eps_boot.is_finite()) {
            return Err(CliError::Config(format!("eps_boot {} must be non-negative", self.eps_boot)));
        }
        if self.l_refresh == 0 || self.l_refresh > self.l_max {
            return Err(CliError::Config(format!(
                "l_refresh {} must lie in 1..={}",
                self.l_refresh, self.l_max
            )));
        }
        if let Some(c) = self.capacity {
            if !c.is_power_of_two() || c < grid.len() {
                return Err(CliError::Config(format!(
                    "capacity {c} must be a power of two >= {}",
                    grid.len()
                )));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec::square(self.dim, self.n)
    }

    pub fn advection(&self) -> AdvectionConfig {
        AdvectionConfig {
            ax: self.ax,
            ay: self.ay,
            cfl: self.cfl,
            t_end: self.t_end,
            scheme: self.scheme,
            u0: InitialCondition::Sine { kx: self.kx, ky: self.ky },
        }
    }

    pub fn policy(&self) -> RefreshPolicy {
        let base = match self.refresh_mode {
            RefreshMode::Standard => RefreshPolicy::standard(),
            RefreshMode::Iterative => RefreshPolicy::iterative(),
        };
        base.with_eps(self.eps_boot)
    }

    pub fn capacity_for(&self, grid: &GridSpec) -> usize {
        self.capacity.unwrap_or_else(|| default_capacity(grid.len()))
    }

    pub fn ckks_params(&self, batch_size: usize) -> CkksParams {
        CkksParams {
            ring_dim: self.ring_dim,
            l_max: self.l_max,
            l_refresh: self.l_refresh,
            scale_bits: self.scale_bits,
            batch_size,
            dnum: self.dnum.clamp(1, self.l_max + 1),
            ..CkksParams::default()
        }
    }

    /// Backend for `grid`; `salt` separates the key material of runs that
    /// share a seed (e.g. the grids of a sweep).
    pub fn backend_for(&self, grid: &GridSpec, salt: u64) -> CliResult<SecureArithmetic> {
        let capacity = self.capacity_for(grid);
        let sa = match self.backend {
            BackendKind::Exact => SecureArithmetic::exact(capacity, self.l_max, self.l_refresh, self.policy())?,
            BackendKind::Encrypted => {
                SecureArithmetic::encrypted(self.ckks_params(capacity), self.policy(), mix_seed(self.seed, salt))?
            }
        };
        Ok(sa)
    }
}

/// SplitMix64 finalizer over `seed + salt`.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed.wrapping_add(salt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
