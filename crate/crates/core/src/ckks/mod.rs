//! Leveled CKKS over the RNS ring of [`crate::polyring`].
//!
//! Rescaling happens right after every multiplication, so a ciphertext's
//! level is exactly the number of multiplications it can still absorb.
//! Scales are tracked exactly as `f64` metadata; plaintext and scalar
//! multipliers are encoded at the scale `q_l` of the prime that the
//! following rescale removes, which leaves the ciphertext scale unchanged.

mod encoding;
mod eval;
mod keys;
mod refresh;
pub mod serialize;

use serde::{Deserialize, Serialize};

use crate::polyring::{ModulusChain, RingContext, RingPoly};
use crate::{Error, Result};

pub use encoding::Encoder;
pub use keys::{KeySwitchKey, PublicKey, RelinKey, RotKeySet, SecretKey};
pub use refresh::{InsecureRefresher, RefreshMode, RefreshPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SecretDistribution {
    UniformTernary,
    SparseTernary { hamming_weight: usize },
}

/// User-facing parameter set. The defaults are the desk configuration:
/// `N_R = 2^13`, 33 levels, 25 levels after refresh, 40-bit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CkksParams {
    pub ring_dim: usize,
    pub l_max: usize,
    pub l_refresh: usize,
    pub scale_bits: u32,
    pub first_mod_bits: u32,
    pub batch_size: usize,
    pub sigma: f64,
    pub secret: SecretDistribution,
    /// Number of key-switching digits.
    pub dnum: usize,
    /// Enables [`InsecureRefresher`], which decrypts internally.
    pub insecure_simulated_bootstrap: bool,
}

impl Default for CkksParams {
    fn default() -> Self {
        Self {
            ring_dim: 1 << 13,
            l_max: 33,
            l_refresh: 25,
            scale_bits: 40,
            first_mod_bits: 60,
            batch_size: 64,
            sigma: 3.2,
            secret: SecretDistribution::UniformTernary,
            dnum: 3,
            insecure_simulated_bootstrap: true,
        }
    }
}

impl CkksParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !self.ring_dim.is_power_of_two() || self.ring_dim < 8 {
            return bad(format!("ring dimension {} must be a power of two >= 8", self.ring_dim));
        }
        if !self.batch_size.is_power_of_two() || self.batch_size > self.ring_dim / 2 {
            return bad(format!(
                "batch size {} must be a power of two <= N_R/2 = {}",
                self.batch_size,
                self.ring_dim / 2
            ));
        }
        if self.l_max == 0 {
            return bad("l_max must be positive".into());
        }
        if self.l_refresh == 0 || self.l_refresh > self.l_max {
            return bad(format!(
                "l_refresh {} must satisfy 0 < l_refresh <= l_max = {}",
                self.l_refresh, self.l_max
            ));
        }
        if self.scale_bits >= self.first_mod_bits || self.first_mod_bits > 60 {
            return bad("need scale_bits < first_mod_bits <= 60".into());
        }
        if self.dnum == 0 || self.dnum > self.l_max + 1 {
            return bad(format!("dnum {} must lie in 1..={}", self.dnum, self.l_max + 1));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be finite and non-negative".into());
        }
        Ok(())
    }
}

/// Immutable scheme context: ring tables, modulus chain and encoder.
#[derive(Debug)]
pub struct CkksContext {
    params: CkksParams,
    ring: RingContext,
    encoder: Encoder,
    scale: f64,
    id: u64,
    // P mod q_i and P^{-1} mod q_i for key switching, P = prod(special)
    special_mod: Vec<u64>,
    special_inv: Vec<u64>,
}

impl CkksContext {
    /// Always true: parameters are far below any security standard.
    pub const INSECURE_TOY: bool = true;

    pub fn new(params: CkksParams) -> Result<Self> {
        params.validate()?;
        let chain = ModulusChain::generate(
            params.ring_dim,
            params.l_max,
            params.first_mod_bits,
            params.scale_bits,
            params.dnum,
        )?;
        Self::with_chain(params, chain)
    }

    /// Rebuilds a context around an explicit chain (used by deserialization).
    pub fn with_chain(params: CkksParams, chain: ModulusChain) -> Result<Self> {
        params.validate()?;
        if chain.l_max() != params.l_max || chain.dnum != params.dnum {
            return Err(Error::InvalidParameter("chain length does not match l_max".into()));
        }
        let ring = RingContext::new(params.ring_dim, chain)?;
        let encoder = Encoder::new(params.ring_dim);
        let special_mod: Vec<u64> = ring
            .moduli()
            .iter()
            .map(|m| {
                ring.chain()
                    .special
                    .iter()
                    .fold(1, |acc, &p| m.mul(acc, p % m.value()))
            })
            .collect();
        let special_inv = ring
            .moduli()
            .iter()
            .zip(&special_mod)
            .map(|(m, &pm)| m.inv(pm))
            .collect();
        let id = fingerprint(&params, ring.chain());
        Ok(Self {
            scale: 2f64.powi(params.scale_bits as i32),
            params,
            ring,
            encoder,
            id,
            special_mod,
            special_inv,
        })
    }

    pub fn params(&self) -> &CkksParams {
        &self.params
    }

    pub fn ring(&self) -> &RingContext {
        &self.ring
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    /// Nominal scale `2^scale_bits`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn l_max(&self) -> usize {
        self.params.l_max
    }

    pub fn l_refresh(&self) -> usize {
        self.params.l_refresh
    }

    pub fn batch_size(&self) -> usize {
        self.params.batch_size
    }

    pub fn ring_dim(&self) -> usize {
        self.params.ring_dim
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    /// The prime removed by the next rescale at `level`, as a float.
    pub fn rescale_prime(&self, level: usize) -> f64 {
        self.ring.chain().primes[level] as f64
    }

    pub(crate) fn special_mod(&self) -> &[u64] {
        &self.special_mod
    }

    pub(crate) fn special_inv(&self) -> &[u64] {
        &self.special_inv
    }
}

fn fingerprint(params: &CkksParams, chain: &ModulusChain) -> u64 {
    // FNV-1a over the values that determine ring arithmetic and slot layout
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |x: u64| {
        for b in x.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    feed(params.ring_dim as u64);
    feed(params.batch_size as u64);
    feed(chain.dnum as u64);
    for &q in &chain.primes {
        feed(q);
    }
    for &p in &chain.special {
        feed(p);
    }
    h
}

/// An encoded message: `poly ≈ scale · embedding^{-1}(values)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CkksPlaintext {
    pub(crate) poly: RingPoly,
    pub(crate) scale: f64,
    pub(crate) logical_len: usize,
    pub(crate) ctx_id: u64,
}

impl CkksPlaintext {
    pub fn level(&self) -> usize {
        self.poly.level()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn logical_len(&self) -> usize {
        self.logical_len
    }

    pub fn poly(&self) -> &RingPoly {
        &self.poly
    }
}

/// A pair `(c0, c1)` with `c0 + c1·s ≈ plaintext` modulo `Q_level`.
#[derive(Debug, Clone, PartialEq)]
pub struct CkksCiphertext {
    pub(crate) c0: RingPoly,
    pub(crate) c1: RingPoly,
    pub(crate) scale: f64,
    pub(crate) logical_len: usize,
    pub(crate) ctx_id: u64,
}

impl CkksCiphertext {
    pub fn level(&self) -> usize {
        self.c0.level()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn logical_len(&self) -> usize {
        self.logical_len
    }

    pub fn c0(&self) -> &RingPoly {
        &self.c0
    }

    pub fn c1(&self) -> &RingPoly {
        &self.c1
    }

    /// Drops limbs down to `level` without touching the message or scale.
    pub fn drop_to_level(&mut self, level: usize) {
        if level < self.level() {
            self.c0.truncate(level);
            self.c1.truncate(level);
        }
    }
}

pub fn level_of(ct: &CkksCiphertext) -> usize {
    ct.level()
}
