use rand::Rng;

use super::{CkksCiphertext, CkksContext, CkksPlaintext, PublicKey, RelinKey, RotKeySet, SecretKey};
use crate::polyring::RingPoly;
use crate::{Error, Result};

/// Relative difference below which two scales count as equal.
const SCALE_TOLERANCE: f64 = 1e-9;

fn same_scale(a: f64, b: f64) -> bool {
    ((a - b) / a).abs() < SCALE_TOLERANCE
}

impl CkksContext {
    fn check_ct(&self, ct: &CkksCiphertext) -> Result<()> {
        if ct.ctx_id != self.id() {
            return Err(Error::ContextMismatch);
        }
        Ok(())
    }

    fn check_pt(&self, pt: &CkksPlaintext) -> Result<()> {
        if pt.ctx_id != self.id() {
            return Err(Error::ContextMismatch);
        }
        Ok(())
    }

    /// Public-key encryption: `c0 = pk0·u + e1 + μ`, `c1 = pk1·u + e2`.
    pub fn encrypt<R: Rng + ?Sized>(
        &self,
        pt: &CkksPlaintext,
        pk: &PublicKey,
        rng: &mut R,
    ) -> Result<CkksCiphertext> {
        self.check_pt(pt)?;
        let ring = self.ring();
        let l = pt.level();
        let u = ring.sample_ternary(rng);
        let mut u = ring.from_signed(&u, l);
        ring.ntt_forward_in_place(&mut u)?;
        let sigma = self.params().sigma;
        let e1 = ring.from_signed(&ring.sample_error(sigma, rng), l);
        let e2 = ring.from_signed(&ring.sample_error(sigma, rng), l);

        let mut c0 = ring.mul_eval(&pk.pk0.truncated(l), &u)?;
        ring.ntt_inverse_in_place(&mut c0)?;
        ring.add_assign(&mut c0, &e1)?;
        ring.add_assign(&mut c0, &pt.poly)?;
        let mut c1 = ring.mul_eval(&pk.pk1.truncated(l), &u)?;
        ring.ntt_inverse_in_place(&mut c1)?;
        ring.add_assign(&mut c1, &e2)?;
        Ok(CkksCiphertext {
            c0,
            c1,
            scale: pt.scale,
            logical_len: pt.logical_len,
            ctx_id: self.id(),
        })
    }

    /// Secret-key encryption: `c0 = -a·s + e + μ`, `c1 = a` with `a` uniform.
    /// Fresh noise is a single error term instead of `u·e + e1 + e2·s`.
    pub fn encrypt_symmetric<R: Rng + ?Sized>(
        &self,
        pt: &CkksPlaintext,
        sk: &SecretKey,
        rng: &mut R,
    ) -> Result<CkksCiphertext> {
        self.check_pt(pt)?;
        let ring = self.ring();
        let l = pt.level();
        let a = ring.sample_uniform(l, rng);
        let mut a_eval = a.clone();
        ring.ntt_forward_in_place(&mut a_eval)?;
        let mut a_s = ring.mul_eval(&a_eval, &sk.eval_at(l))?;
        ring.ntt_inverse_in_place(&mut a_s)?;
        let e = ring.from_signed(&ring.sample_error(self.params().sigma, rng), l);
        let mut c0 = ring.sub(&e, &a_s)?;
        ring.add_assign(&mut c0, &pt.poly)?;
        Ok(CkksCiphertext {
            c0,
            c1: a,
            scale: pt.scale,
            logical_len: pt.logical_len,
            ctx_id: self.id(),
        })
    }

    pub fn encrypt_values<R: Rng + ?Sized>(
        &self,
        values: &[f64],
        level: usize,
        pk: &PublicKey,
        rng: &mut R,
    ) -> Result<CkksCiphertext> {
        let pt = self.encode(values, level)?;
        self.encrypt(&pt, pk, rng)
    }

    /// `c0 + c1·s` modulo `Q_level`.
    pub fn decrypt(&self, ct: &CkksCiphertext, sk: &SecretKey) -> Result<CkksPlaintext> {
        self.check_ct(ct)?;
        let ring = self.ring();
        let l = ct.level();
        let c1 = ring.ntt_forward(&ct.c1)?;
        let mut m = ring.mul_eval(&c1, &sk.eval_at(l))?;
        ring.ntt_inverse_in_place(&mut m)?;
        ring.add_assign(&mut m, &ct.c0)?;
        Ok(CkksPlaintext {
            poly: m,
            scale: ct.scale,
            logical_len: ct.logical_len,
            ctx_id: self.id(),
        })
    }

    pub fn decrypt_values(&self, ct: &CkksCiphertext, sk: &SecretKey) -> Result<Vec<f64>> {
        self.decode(&self.decrypt(ct, sk)?)
    }

    /// Drops the higher operand to the lower level.
    pub fn align_levels(&self, a: &CkksCiphertext, b: &CkksCiphertext) -> (CkksCiphertext, CkksCiphertext) {
        let l = a.level().min(b.level());
        let mut a = a.clone();
        let mut b = b.clone();
        a.drop_to_level(l);
        b.drop_to_level(l);
        (a, b)
    }

    /// Brings `ct` to scale `target` by an integer multiply and rescale,
    /// consuming one level.
    fn rescale_to(&self, ct: &CkksCiphertext, target: f64) -> Result<CkksCiphertext> {
        let l = ct.level();
        if l == 0 {
            return Err(Error::LevelExhausted(0));
        }
        let factor = (target * self.rescale_prime(l) / ct.scale).round();
        if !(factor >= 1.0 && factor < 2f64.powi(100)) {
            return Err(Error::InvalidParameter(format!(
                "cannot correct scale {} to {target}",
                ct.scale
            )));
        }
        let ring = self.ring();
        let mut out = CkksCiphertext {
            c0: ring.mul_scalar(&ct.c0, factor as i128),
            c1: ring.mul_scalar(&ct.c1, factor as i128),
            scale: target,
            ..ct.clone()
        };
        self.rescale_in_place(&mut out)?;
        out.scale = target;
        Ok(out)
    }

    /// Level- and scale-aligned copies of two operands.
    fn harmonize(&self, a: &CkksCiphertext, b: &CkksCiphertext) -> Result<(CkksCiphertext, CkksCiphertext)> {
        self.check_ct(a)?;
        self.check_ct(b)?;
        if same_scale(a.scale, b.scale) {
            return Ok(self.align_levels(a, b));
        }
        // spend the level on the operand that has more of them
        if a.level() >= b.level() {
            let a2 = self.rescale_to(a, b.scale)?;
            Ok(self.align_levels(&a2, b))
        } else {
            let b2 = self.rescale_to(b, a.scale)?;
            Ok(self.align_levels(a, &b2))
        }
    }

    pub fn add(&self, a: &CkksCiphertext, b: &CkksCiphertext) -> Result<CkksCiphertext> {
        let (a, b) = self.harmonize(a, b)?;
        let ring = self.ring();
        Ok(CkksCiphertext {
            c0: ring.add(&a.c0, &b.c0)?,
            c1: ring.add(&a.c1, &b.c1)?,
            logical_len: a.logical_len.max(b.logical_len),
            ..a
        })
    }

    pub fn sub(&self, a: &CkksCiphertext, b: &CkksCiphertext) -> Result<CkksCiphertext> {
        let (a, b) = self.harmonize(a, b)?;
        let ring = self.ring();
        Ok(CkksCiphertext {
            c0: ring.sub(&a.c0, &b.c0)?,
            c1: ring.sub(&a.c1, &b.c1)?,
            logical_len: a.logical_len.max(b.logical_len),
            ..a
        })
    }

    pub fn neg(&self, a: &CkksCiphertext) -> Result<CkksCiphertext> {
        self.check_ct(a)?;
        let ring = self.ring();
        Ok(CkksCiphertext {
            c0: ring.neg(&a.c0),
            c1: ring.neg(&a.c1),
            ..a.clone()
        })
    }

    fn plain_operand(&self, ct: &CkksCiphertext, pt: &CkksPlaintext) -> Result<RingPoly> {
        self.check_ct(ct)?;
        self.check_pt(pt)?;
        if pt.level() < ct.level() {
            return Err(Error::LevelMismatch(ct.level(), pt.level()));
        }
        Ok(pt.poly.truncated(ct.level()))
    }

    /// Adds a plaintext encoded at the ciphertext's scale.
    pub fn add_plain(&self, ct: &CkksCiphertext, pt: &CkksPlaintext) -> Result<CkksCiphertext> {
        let p = self.plain_operand(ct, pt)?;
        if !same_scale(ct.scale, pt.scale) {
            return Err(Error::InvalidParameter(format!(
                "plaintext scale {} differs from ciphertext scale {}",
                pt.scale, ct.scale
            )));
        }
        Ok(CkksCiphertext {
            c0: self.ring().add(&ct.c0, &p)?,
            logical_len: ct.logical_len.max(pt.logical_len),
            ..ct.clone()
        })
    }

    pub fn sub_plain(&self, ct: &CkksCiphertext, pt: &CkksPlaintext) -> Result<CkksCiphertext> {
        let p = self.plain_operand(ct, pt)?;
        if !same_scale(ct.scale, pt.scale) {
            return Err(Error::InvalidParameter(format!(
                "plaintext scale {} differs from ciphertext scale {}",
                pt.scale, ct.scale
            )));
        }
        Ok(CkksCiphertext {
            c0: self.ring().sub(&ct.c0, &p)?,
            logical_len: ct.logical_len.max(pt.logical_len),
            ..ct.clone()
        })
    }

    /// Encodes `values` at the ciphertext's level and scale and adds them.
    pub fn add_values(&self, ct: &CkksCiphertext, values: &[f64]) -> Result<CkksCiphertext> {
        let pt = self.encode_at_scale(values, ct.level(), ct.scale)?;
        self.add_plain(ct, &pt)
    }

    /// Adds `c` to every slot: the constant polynomial `round(c·scale)`.
    pub fn add_scalar(&self, ct: &CkksCiphertext, c: f64) -> Result<CkksCiphertext> {
        self.check_ct(ct)?;
        if !c.is_finite() {
            return Err(Error::NonFinite(0));
        }
        let v = (c * ct.scale).round() as i128;
        let mut out = ct.clone();
        for (limb, m) in out.c0.limbs.iter_mut().zip(self.ring().moduli()) {
            limb[0] = m.add(limb[0], m.reduce_i128(v));
        }
        Ok(out)
    }

    fn rescale_in_place(&self, ct: &mut CkksCiphertext) -> Result<()> {
        let l = ct.level();
        if l == 0 {
            return Err(Error::LevelExhausted(0));
        }
        let ring = self.ring();
        ring.drop_last_limb_in_place(&mut ct.c0)?;
        ring.drop_last_limb_in_place(&mut ct.c1)?;
        ct.scale /= self.rescale_prime(l);
        Ok(())
    }

    /// Divides by the last prime and drops it.
    pub fn rescale(&self, ct: &CkksCiphertext) -> Result<CkksCiphertext> {
        self.check_ct(ct)?;
        let mut out = ct.clone();
        self.rescale_in_place(&mut out)?;
        Ok(out)
    }

    /// Tensor product, relinearization and rescale. Consumes one level.
    pub fn mul(&self, a: &CkksCiphertext, b: &CkksCiphertext, rlk: &RelinKey) -> Result<CkksCiphertext> {
        self.check_ct(a)?;
        self.check_ct(b)?;
        let (a, b) = self.align_levels(a, b);
        if a.level() == 0 {
            return Err(Error::LevelExhausted(0));
        }
        let ring = self.ring();
        let (a0, a1) = (ring.ntt_forward(&a.c0)?, ring.ntt_forward(&a.c1)?);
        let (b0, b1) = (ring.ntt_forward(&b.c0)?, ring.ntt_forward(&b.c1)?);
        let mut d0 = ring.mul_eval(&a0, &b0)?;
        let mut d1 = ring.add(&ring.mul_eval(&a0, &b1)?, &ring.mul_eval(&a1, &b0)?)?;
        let mut d2 = ring.mul_eval(&a1, &b1)?;
        ring.ntt_inverse_in_place(&mut d0)?;
        ring.ntt_inverse_in_place(&mut d1)?;
        ring.ntt_inverse_in_place(&mut d2)?;
        let (k0, k1) = self.key_switch(&d2, &rlk.0)?;
        let mut out = CkksCiphertext {
            c0: ring.add(&d0, &k0)?,
            c1: ring.add(&d1, &k1)?,
            scale: a.scale * b.scale,
            logical_len: a.logical_len.max(b.logical_len),
            ctx_id: self.id(),
        };
        self.rescale_in_place(&mut out)?;
        Ok(out)
    }

    /// Plaintext product followed by a rescale. Consumes one level.
    pub fn mul_plain(&self, ct: &CkksCiphertext, pt: &CkksPlaintext) -> Result<CkksCiphertext> {
        let p = self.plain_operand(ct, pt)?;
        if ct.level() == 0 {
            return Err(Error::LevelExhausted(0));
        }
        let ring = self.ring();
        let p = ring.ntt_forward(&p)?;
        let mul = |c: &RingPoly| -> Result<RingPoly> {
            let mut x = ring.ntt_forward(c)?;
            x = ring.mul_eval(&x, &p)?;
            ring.ntt_inverse_in_place(&mut x)?;
            Ok(x)
        };
        let mut out = CkksCiphertext {
            c0: mul(&ct.c0)?,
            c1: mul(&ct.c1)?,
            scale: ct.scale * pt.scale,
            ..ct.clone()
        };
        self.rescale_in_place(&mut out)?;
        Ok(out)
    }

    /// Slot-wise product with `values`, keeping the scale.
    pub fn mul_values(&self, ct: &CkksCiphertext, values: &[f64]) -> Result<CkksCiphertext> {
        self.check_ct(ct)?;
        if ct.level() == 0 {
            return Err(Error::LevelExhausted(0));
        }
        let pt = self.encode_multiplier(values, ct.level())?;
        self.mul_plain(ct, &pt)
    }

    /// Multiplies every slot by `c` (encoded as `round(c·q_l)`) and rescales.
    pub fn mul_scalar(&self, ct: &CkksCiphertext, c: f64) -> Result<CkksCiphertext> {
        self.check_ct(ct)?;
        let l = ct.level();
        if l == 0 {
            return Err(Error::LevelExhausted(0));
        }
        if !c.is_finite() {
            return Err(Error::NonFinite(0));
        }
        let q = self.rescale_prime(l);
        let v = (c * q).round() as i128;
        let ring = self.ring();
        let mut out = CkksCiphertext {
            c0: ring.mul_scalar(&ct.c0, v),
            c1: ring.mul_scalar(&ct.c1, v),
            scale: ct.scale * q,
            ..ct.clone()
        };
        self.rescale_in_place(&mut out)?;
        Ok(out)
    }

    /// Left rotation: slot `i` of the result holds slot `i + k` of the input,
    /// cyclically modulo the batch size.
    /// Representative of `k` modulo the batch size in `(-batch/2, batch/2]`.
    ///
    /// The batch is replicated across all slots, so any representative gives
    /// the same message; the smallest one keeps `rotate(-k)` the exact inverse
    /// of `rotate(k)` on the noise in the remaining slots as well.
    pub fn rotation_index(&self, k: i64) -> i64 {
        let b = self.batch_size() as i64;
        let r = k.rem_euclid(b);
        if r > b / 2 {
            r - b
        } else {
            r
        }
    }

    pub fn rotate(&self, ct: &CkksCiphertext, k: i64, keys: &RotKeySet) -> Result<CkksCiphertext> {
        self.check_ct(ct)?;
        let r = self.rotation_index(k);
        if r == 0 {
            return Ok(ct.clone());
        }
        let g = self.encoder().galois_element(r);
        let key = keys.get(g).ok_or(Error::MissingRotationKey(k))?;
        let ring = self.ring();
        let c0 = ring.automorphism(&ct.c0, g)?;
        let c1 = ring.automorphism(&ct.c1, g)?;
        let (k0, k1) = self.key_switch(&c1, key)?;
        Ok(CkksCiphertext {
            c0: ring.add(&c0, &k0)?,
            c1: k1,
            ..ct.clone()
        })
    }
}
