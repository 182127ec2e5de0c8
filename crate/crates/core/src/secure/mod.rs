//! Secure vectors and matrices on top of CKKS, with an `Exact` backend that
//! runs the same code on plain `f64` slots and a virtual level counter.
//!
//! Both backends walk identical level schedules, so an exact run can be used
//! as a dry run (rotation keys to generate, levels per step) and as a
//! reference twin for the encrypted one.

mod array;
mod circshift;
mod mask;
pub mod serialize;

use std::collections::BTreeSet;
use std::ops::{Add, Sub};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::ckks::{
    CkksContext, CkksParams, InsecureRefresher, PublicKey, RefreshPolicy, RelinKey, RotKeySet, SecretKey,
};
use crate::{Error, Result};

pub use array::{pack_column_major, unpack_column_major, Packed, Payload, SecureArray, SecureMatrix, SecureVector};
pub use circshift::normalize_shift;
pub use mask::{Mask, MaskCache, MaskKey};

/// Operation tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub adds: u64,
    pub mults: u64,
    pub rotates: u64,
    pub bootstraps: u64,
}

impl Sub for OpCounts {
    type Output = OpCounts;

    fn sub(self, o: OpCounts) -> OpCounts {
        OpCounts {
            adds: self.adds - o.adds,
            mults: self.mults - o.mults,
            rotates: self.rotates - o.rotates,
            bootstraps: self.bootstraps - o.bootstraps,
        }
    }
}

impl Add for OpCounts {
    type Output = OpCounts;

    fn add(self, o: OpCounts) -> OpCounts {
        OpCounts {
            adds: self.adds + o.adds,
            mults: self.mults + o.mults,
            rotates: self.rotates + o.rotates,
            bootstraps: self.bootstraps + o.bootstraps,
        }
    }
}

#[derive(Debug, Default)]
pub struct OpCounters {
    adds: AtomicU64,
    mults: AtomicU64,
    rotates: AtomicU64,
    bootstraps: AtomicU64,
}

impl OpCounters {
    pub fn snapshot(&self) -> OpCounts {
        OpCounts {
            adds: self.adds.load(Ordering::Relaxed),
            mults: self.mults.load(Ordering::Relaxed),
            rotates: self.rotates.load(Ordering::Relaxed),
            bootstraps: self.bootstraps.load(Ordering::Relaxed),
        }
    }

    pub fn reset(&self) {
        for c in [&self.adds, &self.mults, &self.rotates, &self.bootstraps] {
            c.store(0, Ordering::Relaxed);
        }
    }

    fn bump(c: &AtomicU64) {
        c.fetch_add(1, Ordering::Relaxed);
    }
}

/// Keys and context of the encrypted backend.
#[derive(Debug)]
pub struct EncryptedBackend {
    ctx: Arc<CkksContext>,
    sk: SecretKey,
    pk: PublicKey,
    rlk: RelinKey,
    rot_keys: RwLock<RotKeySet>,
    refresher: Option<InsecureRefresher>,
    rng: Mutex<ChaCha20Rng>,
}

impl EncryptedBackend {
    pub fn new(params: CkksParams, policy: RefreshPolicy, seed: u64) -> Result<Self> {
        let ctx = Arc::new(CkksContext::new(params)?);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (sk, pk, rlk) = ctx.keygen(&mut rng);
        let refresher = if ctx.params().insecure_simulated_bootstrap {
            Some(InsecureRefresher::new(
                &ctx,
                sk.clone(),
                pk.clone(),
                policy,
                seed ^ 0x005e_ed0f_b007,
            )?)
        } else {
            None
        };
        Ok(Self {
            ctx,
            sk,
            pk,
            rlk,
            rot_keys: RwLock::new(RotKeySet::default()),
            refresher,
            rng: Mutex::new(rng),
        })
    }

    pub fn context(&self) -> &CkksContext {
        &self.ctx
    }

    pub fn secret_key(&self) -> &SecretKey {
        &self.sk
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.pk
    }

    pub fn rotation_key_count(&self) -> usize {
        self.rot_keys.read().expect("rotation keys poisoned").len()
    }
}

#[derive(Debug)]
pub enum Backend {
    Exact {
        capacity: usize,
        l_max: usize,
        l_refresh: usize,
    },
    Encrypted(Box<EncryptedBackend>),
}

/// Entry point for secure computations: owns the backend, operation
/// counters, the mask cache and the rotation-index log.
#[derive(Debug)]
pub struct SecureArithmetic {
    backend: Backend,
    policy: RefreshPolicy,
    counters: OpCounters,
    masks: MaskCache,
    rotations: Mutex<BTreeSet<i64>>,
}

impl SecureArithmetic {
    pub fn exact(capacity: usize, l_max: usize, l_refresh: usize, policy: RefreshPolicy) -> Result<Self> {
        if capacity == 0 || !capacity.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "capacity {capacity} must be a power of two"
            )));
        }
        if l_refresh == 0 || l_refresh > l_max {
            return Err(Error::InvalidParameter(format!(
                "l_refresh {l_refresh} must satisfy 0 < l_refresh <= l_max = {l_max}"
            )));
        }
        Ok(Self::with_backend(
            Backend::Exact {
                capacity,
                l_max,
                l_refresh,
            },
            policy,
        ))
    }

    /// Exact backend whose capacity is the smallest power of two holding `len`.
    pub fn exact_for_len(len: usize, l_max: usize, l_refresh: usize, policy: RefreshPolicy) -> Result<Self> {
        Self::exact(default_capacity(len), l_max, l_refresh, policy)
    }

    /// Encrypted backend; the capacity is `params.batch_size`.
    pub fn encrypted(params: CkksParams, policy: RefreshPolicy, seed: u64) -> Result<Self> {
        let enc = EncryptedBackend::new(params, policy, seed)?;
        Ok(Self::with_backend(Backend::Encrypted(Box::new(enc)), policy))
    }

    fn with_backend(backend: Backend, policy: RefreshPolicy) -> Self {
        Self {
            backend,
            policy,
            counters: OpCounters::default(),
            masks: MaskCache::default(),
            rotations: Mutex::new(BTreeSet::new()),
        }
    }

    /// Exact backend with the same capacity, levels and policy.
    pub fn exact_twin(&self) -> SecureArithmetic {
        Self::with_backend(
            Backend::Exact {
                capacity: self.capacity(),
                l_max: self.l_max(),
                l_refresh: self.l_refresh(),
            },
            self.policy,
        )
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn is_encrypted(&self) -> bool {
        matches!(self.backend, Backend::Encrypted(_))
    }

    pub fn context(&self) -> Option<&CkksContext> {
        match &self.backend {
            Backend::Exact { .. } => None,
            Backend::Encrypted(e) => Some(&e.ctx),
        }
    }

    pub fn capacity(&self) -> usize {
        match &self.backend {
            Backend::Exact { capacity, .. } => *capacity,
            Backend::Encrypted(e) => e.ctx.batch_size(),
        }
    }

    pub fn l_max(&self) -> usize {
        match &self.backend {
            Backend::Exact { l_max, .. } => *l_max,
            Backend::Encrypted(e) => e.ctx.l_max(),
        }
    }

    pub fn l_refresh(&self) -> usize {
        match &self.backend {
            Backend::Exact { l_refresh, .. } => *l_refresh,
            Backend::Encrypted(e) => e.ctx.l_refresh(),
        }
    }

    pub fn policy(&self) -> &RefreshPolicy {
        &self.policy
    }

    pub fn counts(&self) -> OpCounts {
        self.counters.snapshot()
    }

    pub fn reset_counters(&self) {
        self.counters.reset();
    }

    pub fn masks(&self) -> &MaskCache {
        &self.masks
    }

    /// Every nonzero rotation index (mod capacity) requested so far.
    pub fn recorded_rotations(&self) -> Vec<i64> {
        self.rotations.lock().expect("rotation log poisoned").iter().copied().collect()
    }

    pub fn clear_recorded_rotations(&self) {
        self.rotations.lock().expect("rotation log poisoned").clear();
    }

    /// Generates rotation keys for `indices` that are not yet available.
    /// No-op on the exact backend.
    pub fn prepare_rotations(&self, indices: &[i64]) -> Result<()> {
        let Backend::Encrypted(e) = &self.backend else {
            return Ok(());
        };
        let missing: Vec<i64> = {
            let keys = e.rot_keys.read().expect("rotation keys poisoned");
            indices
                .iter()
                .map(|&k| e.ctx.rotation_index(k))
                .filter(|&r| r != 0 && !keys.contains(e.ctx.encoder().galois_element(r)))
                .collect()
        };
        if missing.is_empty() {
            return Ok(());
        }
        let fresh = {
            let mut rng = e.rng.lock().expect("rng poisoned");
            e.ctx.rotation_keygen(&e.sk, &missing, &mut *rng)
        };
        e.rot_keys.write().expect("rotation keys poisoned").extend(fresh);
        Ok(())
    }

    /// Runs `f` on an exact twin and generates every rotation key it used.
    pub fn plan<F>(&self, f: F) -> Result<()>
    where
        F: FnOnce(&SecureArithmetic) -> Result<()>,
    {
        let twin = self.exact_twin();
        f(&twin)?;
        self.prepare_rotations(&twin.recorded_rotations())
    }

    // ---- encoding -------------------------------------------------------

    fn check_data(&self, data: &[f64]) -> Result<()> {
        if data.is_empty() {
            return Err(Error::InvalidParameter("empty data".into()));
        }
        let capacity = self.capacity();
        if data.len() > capacity {
            return Err(Error::CapacityExceeded {
                len: data.len(),
                capacity,
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(())
    }

    fn encode_packed(&self, slots: &[f64], len: usize, level: usize) -> Result<Packed> {
        self.check_data(slots)?;
        if len == 0 || len > self.capacity() {
            return Err(Error::CapacityExceeded {
                len,
                capacity: self.capacity(),
            });
        }
        if level > self.l_max() {
            return Err(Error::InvalidParameter(format!(
                "level {level} exceeds l_max {}",
                self.l_max()
            )));
        }
        let capacity = self.capacity();
        let payload = match &self.backend {
            Backend::Exact { .. } => {
                let mut data = slots.to_vec();
                data.resize(capacity, 0.0);
                Payload::Plain { data, level }
            }
            Backend::Encrypted(e) => {
                let mut pt = e.ctx.encode(slots, level)?;
                pt.logical_len = len;
                let mut rng = e.rng.lock().expect("rng poisoned");
                Payload::Cipher(e.ctx.encrypt_symmetric(&pt, &e.sk, &mut *rng)?)
            }
        };
        Ok(Packed {
            payload,
            len,
            capacity,
        })
    }

    pub fn enc_vector(&self, data: &[f64]) -> Result<SecureVector> {
        self.enc_vector_at(data, self.l_max())
    }

    pub fn enc_vector_at(&self, data: &[f64], level: usize) -> Result<SecureVector> {
        Ok(SecureVector {
            inner: self.encode_packed(data, data.len(), level)?,
        })
    }

    /// Encodes all `slots` (at most the capacity) but declares only the first
    /// `len` as data; the rest are treated as garbage.
    pub fn enc_vector_slots(&self, slots: &[f64], len: usize) -> Result<SecureVector> {
        Ok(SecureVector {
            inner: self.encode_packed(slots, len, self.l_max())?,
        })
    }

    /// Encrypts a row-major matrix in column-major slot order.
    pub fn enc_matrix(&self, rows: &[Vec<f64>]) -> Result<SecureMatrix> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::ShapeMismatch("ragged matrix rows".into()));
        }
        self.enc_matrix_packed(&pack_column_major(rows), nrows, ncols)
    }

    /// Encrypts already column-major data of shape `nrows × ncols`.
    pub fn enc_matrix_packed(&self, data: &[f64], nrows: usize, ncols: usize) -> Result<SecureMatrix> {
        if nrows * ncols != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {nrows}x{ncols} matrix",
                data.len()
            )));
        }
        self.enc_matrix_slots(data, nrows, ncols)
    }

    /// Like [`enc_vector_slots`](Self::enc_vector_slots) for matrices.
    pub fn enc_matrix_slots(&self, slots: &[f64], nrows: usize, ncols: usize) -> Result<SecureMatrix> {
        Ok(SecureMatrix {
            inner: self.encode_packed(slots, nrows * ncols, self.l_max())?,
            nrows,
            ncols,
        })
    }

    /// All capacity slots, including garbage beyond the data.
    pub fn dec_slots<T: SecureArray>(&self, x: &T) -> Result<Vec<f64>> {
        match (&x.packed().payload, &self.backend) {
            (Payload::Plain { data, .. }, Backend::Exact { .. }) => Ok(data.clone()),
            (Payload::Cipher(ct), Backend::Encrypted(e)) => {
                let pt = e.ctx.decrypt(ct, &e.sk)?;
                e.ctx.decode_full(&pt)
            }
            _ => Err(Error::ContextMismatch),
        }
    }

    pub fn dec_vector(&self, x: &SecureVector) -> Result<Vec<f64>> {
        let mut v = self.dec_slots(x)?;
        v.truncate(x.len());
        Ok(v)
    }

    /// Row-major values of the matrix.
    pub fn dec_matrix(&self, x: &SecureMatrix) -> Result<Vec<Vec<f64>>> {
        let v = self.dec_slots(x)?;
        Ok(unpack_column_major(&v, x.nrows, x.ncols))
    }

    /// Column-major values of the matrix.
    pub fn dec_matrix_packed(&self, x: &SecureMatrix) -> Result<Vec<f64>> {
        let mut v = self.dec_slots(x)?;
        v.truncate(x.nrows * x.ncols);
        Ok(v)
    }

    // ---- element-wise ---------------------------------------------------

    fn check_pair<T: SecureArray>(&self, a: &T, b: &T) -> Result<()> {
        if a.shape() != b.shape() || a.capacity() != b.capacity() {
            return Err(Error::ShapeMismatch(format!(
                "{:?} (capacity {}) vs {:?} (capacity {})",
                a.shape(),
                a.capacity(),
                b.shape(),
                b.capacity()
            )));
        }
        Ok(())
    }

    fn exact_level_after_mul(level: usize) -> Result<usize> {
        level.checked_sub(1).ok_or(Error::LevelExhausted(0))
    }

    fn zip_p(&self, a: &Packed, b: &Packed, f: impl Fn(f64, f64) -> f64, consume: bool) -> Result<Payload> {
        let (Payload::Plain { data: x, level: la }, Payload::Plain { data: y, level: lb }) = (&a.payload, &b.payload)
        else {
            return Err(Error::ContextMismatch);
        };
        let mut level = (*la).min(*lb);
        if consume {
            level = Self::exact_level_after_mul(level)?;
        }
        Ok(Payload::Plain {
            data: x.iter().zip(y).map(|(&p, &q)| f(p, q)).collect(),
            level,
        })
    }

    fn map_p(&self, a: &Packed, f: impl Fn(f64) -> f64, consume: bool) -> Result<Payload> {
        let Payload::Plain { data, level } = &a.payload else {
            return Err(Error::ContextMismatch);
        };
        let level = if consume { Self::exact_level_after_mul(*level)? } else { *level };
        Ok(Payload::Plain {
            data: data.iter().map(|&v| f(v)).collect(),
            level,
        })
    }

    fn cipher_pair<'a>(
        a: &'a Packed,
        b: &'a Packed,
    ) -> Result<(&'a crate::ckks::CkksCiphertext, &'a crate::ckks::CkksCiphertext)> {
        match (&a.payload, &b.payload) {
            (Payload::Cipher(x), Payload::Cipher(y)) => Ok((x, y)),
            _ => Err(Error::ContextMismatch),
        }
    }

    fn cipher(a: &Packed) -> Result<&crate::ckks::CkksCiphertext> {
        match &a.payload {
            Payload::Cipher(x) => Ok(x),
            _ => Err(Error::ContextMismatch),
        }
    }

    pub(crate) fn add_p(&self, a: &Packed, b: &Packed) -> Result<Packed> {
        OpCounters::bump(&self.counters.adds);
        let payload = match &self.backend {
            Backend::Exact { .. } => self.zip_p(a, b, |x, y| x + y, false)?,
            Backend::Encrypted(e) => {
                let (x, y) = Self::cipher_pair(a, b)?;
                Payload::Cipher(e.ctx.add(x, y)?)
            }
        };
        Ok(a.with_payload(payload))
    }

    pub(crate) fn sub_p(&self, a: &Packed, b: &Packed) -> Result<Packed> {
        OpCounters::bump(&self.counters.adds);
        let payload = match &self.backend {
            Backend::Exact { .. } => self.zip_p(a, b, |x, y| x - y, false)?,
            Backend::Encrypted(e) => {
                let (x, y) = Self::cipher_pair(a, b)?;
                Payload::Cipher(e.ctx.sub(x, y)?)
            }
        };
        Ok(a.with_payload(payload))
    }

    pub(crate) fn mul_p(&self, a: &Packed, b: &Packed) -> Result<Packed> {
        OpCounters::bump(&self.counters.mults);
        let payload = match &self.backend {
            Backend::Exact { .. } => self.zip_p(a, b, |x, y| x * y, true)?,
            Backend::Encrypted(e) => {
                let (x, y) = Self::cipher_pair(a, b)?;
                Payload::Cipher(e.ctx.mul(x, y, &e.rlk)?)
            }
        };
        Ok(a.with_payload(payload))
    }

    pub(crate) fn scale_p(&self, a: &Packed, c: f64) -> Result<Packed> {
        OpCounters::bump(&self.counters.mults);
        let payload = match &self.backend {
            Backend::Exact { .. } => {
                if !c.is_finite() {
                    return Err(Error::NonFinite(0));
                }
                self.map_p(a, |x| x * c, true)?
            }
            Backend::Encrypted(e) => Payload::Cipher(e.ctx.mul_scalar(Self::cipher(a)?, c)?),
        };
        Ok(a.with_payload(payload))
    }

    pub(crate) fn add_const_p(&self, a: &Packed, c: f64) -> Result<Packed> {
        OpCounters::bump(&self.counters.adds);
        let payload = match &self.backend {
            Backend::Exact { .. } => {
                if !c.is_finite() {
                    return Err(Error::NonFinite(0));
                }
                self.map_p(a, |x| x + c, false)?
            }
            Backend::Encrypted(e) => Payload::Cipher(e.ctx.add_scalar(Self::cipher(a)?, c)?),
        };
        Ok(a.with_payload(payload))
    }

    /// Multiplies by a cached {0,1} plaintext mask (one level).
    pub(crate) fn mask_p(&self, a: &Packed, key: MaskKey) -> Result<Packed> {
        OpCounters::bump(&self.counters.mults);
        let mask = self.masks.get(key);
        let payload = match &self.backend {
            Backend::Exact { .. } => {
                let Payload::Plain { data, level } = &a.payload else {
                    return Err(Error::ContextMismatch);
                };
                Payload::Plain {
                    data: data.iter().zip(mask.values()).map(|(&x, &m)| x * m).collect(),
                    level: Self::exact_level_after_mul(*level)?,
                }
            }
            Backend::Encrypted(e) => {
                let ct = Self::cipher(a)?;
                let l = ct.level();
                if l == 0 {
                    return Err(Error::LevelExhausted(0));
                }
                let pt = e
                    .ctx
                    .plaintext_from_coeffs(mask.coeffs(&e.ctx)?, l, e.ctx.rescale_prime(l), a.len)?;
                Payload::Cipher(e.ctx.mul_plain(ct, &pt)?)
            }
        };
        Ok(a.with_payload(payload))
    }

    /// Left rotation by `k` over the whole capacity: slot `i` receives slot
    /// `i + k`.
    pub(crate) fn rotate_p(&self, a: &Packed, k: i64) -> Result<Packed> {
        OpCounters::bump(&self.counters.rotates);
        let r = normalize_shift(k, a.capacity);
        if r != 0 {
            self.rotations.lock().expect("rotation log poisoned").insert(r);
        }
        let payload = match &self.backend {
            Backend::Exact { .. } => {
                let Payload::Plain { data, level } = &a.payload else {
                    return Err(Error::ContextMismatch);
                };
                let r = r.rem_euclid(data.len() as i64) as usize;
                let mut out = data[r..].to_vec();
                out.extend_from_slice(&data[..r]);
                Payload::Plain { data: out, level: *level }
            }
            Backend::Encrypted(e) => {
                let keys = e.rot_keys.read().expect("rotation keys poisoned");
                Payload::Cipher(e.ctx.rotate(Self::cipher(a)?, r, &keys)?)
            }
        };
        Ok(a.with_payload(payload))
    }

    pub(crate) fn refresh_p(&self, a: &Packed) -> Result<Packed> {
        let payload = match &self.backend {
            Backend::Exact { l_refresh, .. } => {
                let Payload::Plain { data, level } = &a.payload else {
                    return Err(Error::ContextMismatch);
                };
                if *level < 1 {
                    return Err(Error::LevelExhausted(*level));
                }
                Payload::Plain {
                    data: data.clone(),
                    level: *l_refresh,
                }
            }
            Backend::Encrypted(e) => {
                let r = e.refresher.as_ref().ok_or(Error::RefreshDisabled)?;
                Payload::Cipher(r.refresh(&e.ctx, Self::cipher(a)?)?)
            }
        };
        OpCounters::bump(&self.counters.bootstraps);
        Ok(a.with_payload(payload))
    }

    pub fn ew_add<T: SecureArray>(&self, a: &T, b: &T) -> Result<T> {
        self.check_pair(a, b)?;
        Ok(a.with_packed(self.add_p(a.packed(), b.packed())?))
    }

    pub fn ew_sub<T: SecureArray>(&self, a: &T, b: &T) -> Result<T> {
        self.check_pair(a, b)?;
        Ok(a.with_packed(self.sub_p(a.packed(), b.packed())?))
    }

    /// Hadamard product (one level).
    pub fn ew_mul<T: SecureArray>(&self, a: &T, b: &T) -> Result<T> {
        self.check_pair(a, b)?;
        Ok(a.with_packed(self.mul_p(a.packed(), b.packed())?))
    }

    /// Multiplication by a plaintext scalar (one level).
    pub fn scale_by<T: SecureArray>(&self, a: &T, c: f64) -> Result<T> {
        Ok(a.with_packed(self.scale_p(a.packed(), c)?))
    }

    pub fn add_const<T: SecureArray>(&self, a: &T, c: f64) -> Result<T> {
        Ok(a.with_packed(self.add_const_p(a.packed(), c)?))
    }

    /// Raw capacity-wide left rotation (slot `i` receives slot `i + k`).
    pub fn rotate<T: SecureArray>(&self, a: &T, k: i64) -> Result<T> {
        Ok(a.with_packed(self.rotate_p(a.packed(), k)?))
    }

    // ---- levels and refresh ---------------------------------------------

    pub fn levels_remaining<T: SecureArray>(&self, x: &T) -> usize {
        x.level()
    }

    /// Guard of the time loop: refresh iff `level - l_step < margin`.
    pub fn needs_refresh(&self, level: usize, l_step: usize) -> bool {
        (level as i64) - (l_step as i64) < self.policy.margin() as i64
    }

    pub fn refresh<T: SecureArray>(&self, x: &T) -> Result<T> {
        Ok(x.with_packed(self.refresh_p(x.packed())?))
    }

    pub fn maybe_refresh<T: SecureArray>(&self, x: &T, l_step: usize) -> Result<T> {
        if self.needs_refresh(x.level(), l_step) {
            self.refresh(x)
        } else {
            Ok(x.clone())
        }
    }
}

/// Smallest power of two holding `len`.
pub fn default_capacity(len: usize) -> usize {
    len.max(1).next_power_of_two()
}
