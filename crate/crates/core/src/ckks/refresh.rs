use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::{CkksCiphertext, CkksContext, PublicKey, SecretKey};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefreshMode {
    Standard,
    Iterative,
}

/// Noise amplitude and start requirement of the simulated bootstrap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefreshPolicy {
    pub eps_boot: f64,
    pub mode: RefreshMode,
}

impl RefreshPolicy {
    pub fn standard() -> Self {
        Self {
            eps_boot: 1e-6,
            mode: RefreshMode::Standard,
        }
    }

    pub fn iterative() -> Self {
        Self {
            eps_boot: 1e-9,
            mode: RefreshMode::Iterative,
        }
    }

    pub fn with_eps(mut self, eps_boot: f64) -> Self {
        self.eps_boot = eps_boot;
        self
    }

    /// Levels a ciphertext must keep in reserve for the refresh to start.
    pub fn margin(&self) -> usize {
        match self.mode {
            RefreshMode::Standard => 1,
            RefreshMode::Iterative => 2,
        }
    }
}

impl Default for RefreshPolicy {
    fn default() -> Self {
        Self::standard()
    }
}

/// Simulated bootstrapping.
///
/// INSECURE: holds the secret key, decrypts, perturbs every slot by uniform
/// noise in `[-eps_boot, eps_boot]`, and re-encrypts at `l_refresh`. Only
/// available when the context was built with
/// `insecure_simulated_bootstrap = true`.
#[derive(Debug)]
pub struct InsecureRefresher {
    sk: SecretKey,
    pk: PublicKey,
    policy: RefreshPolicy,
    rng: Mutex<ChaCha20Rng>,
    count: AtomicU64,
}

impl InsecureRefresher {
    pub fn new(ctx: &CkksContext, sk: SecretKey, pk: PublicKey, policy: RefreshPolicy, seed: u64) -> Result<Self> {
        if !ctx.params().insecure_simulated_bootstrap {
            return Err(Error::RefreshDisabled);
        }
        if !(policy.eps_boot >= 0.0 && policy.eps_boot.is_finite()) {
            return Err(Error::InvalidParameter(format!("invalid eps_boot {}", policy.eps_boot)));
        }
        Ok(Self {
            sk,
            pk,
            policy,
            rng: Mutex::new(ChaCha20Rng::seed_from_u64(seed)),
            count: AtomicU64::new(0),
        })
    }

    pub fn policy(&self) -> &RefreshPolicy {
        &self.policy
    }

    /// Number of refreshes performed so far.
    pub fn count(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }

    pub fn refresh(&self, ctx: &CkksContext, ct: &CkksCiphertext) -> Result<CkksCiphertext> {
        if !ctx.params().insecure_simulated_bootstrap {
            return Err(Error::RefreshDisabled);
        }
        if ct.level() < 1 {
            return Err(Error::LevelExhausted(ct.level()));
        }
        let pt = ctx.decrypt(ct, &self.sk)?;
        let mut values = ctx.decode_full(&pt)?;
        let mut rng = self.rng.lock().expect("refresh rng poisoned");
        let eps = self.policy.eps_boot;
        if eps > 0.0 {
            for v in values.iter_mut() {
                *v += rng.gen_range(-eps..=eps);
            }
        }
        let mut fresh = ctx.encode(&values, ctx.l_refresh())?;
        fresh.logical_len = ct.logical_len;
        let out = ctx.encrypt(&fresh, &self.pk, &mut *rng)?;
        self.count.fetch_add(1, Ordering::Relaxed);
        Ok(out)
    }
}
