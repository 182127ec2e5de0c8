use std::f64::consts::PI;

use num_complex::Complex64;

use super::{CkksContext, CkksPlaintext};
use crate::polyring::{Domain, RingPoly};
use crate::{Error, Result};

/// Canonical-embedding transform between `N/2` complex slots and `N` real
/// coefficients.
///
/// Slot `j` is the evaluation at `ζ^{5^j}` with `ζ = exp(iπ/N)`, so the Galois
/// map `X -> X^{5^r}` rotates slots left by `r`.
#[derive(Debug, Clone)]
pub struct Encoder {
    n: usize,
    rot_group: Vec<usize>,
    ksi_pows: Vec<Complex64>,
}

impl Encoder {
    pub fn new(n: usize) -> Self {
        let m = 2 * n;
        let slots = n / 2;
        let mut rot_group = Vec::with_capacity(slots);
        let mut g = 1usize;
        for _ in 0..slots {
            rot_group.push(g);
            g = g * 5 % m;
        }
        let ksi_pows = (0..=m)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / m as f64))
            .collect();
        Self {
            n,
            rot_group,
            ksi_pows,
        }
    }

    pub fn slots(&self) -> usize {
        self.n / 2
    }

    /// Galois element implementing a left rotation by `r` slots; negative
    /// `r` rotates right.
    pub fn galois_element(&self, r: i64) -> u64 {
        let m = 2 * self.n as u64;
        let mut g = 1u64;
        for _ in 0..r.rem_euclid(self.slots() as i64) {
            g = g * 5 % m;
        }
        g
    }

    fn bit_reverse(vals: &mut [Complex64]) {
        let n = vals.len();
        let mut j = 0;
        for i in 1..n {
            let mut bit = n >> 1;
            while j & bit != 0 {
                j ^= bit;
                bit >>= 1;
            }
            j |= bit;
            if i < j {
                vals.swap(i, j);
            }
        }
    }

    fn fft_special(&self, vals: &mut [Complex64]) {
        let size = vals.len();
        let m = 2 * self.n;
        Self::bit_reverse(vals);
        let mut len = 2;
        while len <= size {
            let lenh = len >> 1;
            let lenq = len << 2;
            let gap = m / lenq;
            for i in (0..size).step_by(len) {
                for j in 0..lenh {
                    let idx = (self.rot_group[j] % lenq) * gap;
                    let u = vals[i + j];
                    let v = vals[i + j + lenh] * self.ksi_pows[idx];
                    vals[i + j] = u + v;
                    vals[i + j + lenh] = u - v;
                }
            }
            len <<= 1;
        }
    }

    fn fft_special_inv(&self, vals: &mut [Complex64]) {
        let size = vals.len();
        let m = 2 * self.n;
        let mut len = size;
        while len >= 1 {
            let lenh = len >> 1;
            let lenq = len << 2;
            let gap = m / lenq;
            for i in (0..size).step_by(len) {
                for j in 0..lenh {
                    let idx = (lenq - (self.rot_group[j] % lenq)) * gap;
                    let u = vals[i + j] + vals[i + j + lenh];
                    let v = (vals[i + j] - vals[i + j + lenh]) * self.ksi_pows[idx];
                    vals[i + j] = u;
                    vals[i + j + lenh] = v;
                }
            }
            len >>= 1;
        }
        Self::bit_reverse(vals);
        let inv = 1.0 / size as f64;
        for v in vals.iter_mut() {
            *v *= inv;
        }
    }

    /// Real coefficient vector whose embedding is `slots`.
    pub fn embed_inverse(&self, slots: &[Complex64]) -> Vec<f64> {
        assert_eq!(slots.len(), self.slots());
        let mut vals = slots.to_vec();
        self.fft_special_inv(&mut vals);
        let h = self.slots();
        let mut coeffs = vec![0.0; self.n];
        for (i, v) in vals.iter().enumerate() {
            coeffs[i] = v.re;
            coeffs[i + h] = v.im;
        }
        coeffs
    }

    /// Slot values of a real coefficient vector.
    pub fn embed(&self, coeffs: &[f64]) -> Vec<Complex64> {
        assert_eq!(coeffs.len(), self.n);
        let h = self.slots();
        let mut vals: Vec<Complex64> = (0..h)
            .map(|i| Complex64::new(coeffs[i], coeffs[i + h]))
            .collect();
        self.fft_special(&mut vals);
        vals
    }

    /// Zero-pads `values` to `batch` entries and repeats the batch across all
    /// `N/2` slots, so rotations act cyclically modulo `batch`.
    pub fn replicate(&self, values: &[f64], batch: usize) -> Vec<Complex64> {
        let mut padded = vec![0.0; batch];
        padded[..values.len()].copy_from_slice(values);
        (0..self.slots())
            .map(|j| Complex64::new(padded[j % batch], 0.0))
            .collect()
    }
}

impl CkksContext {
    fn check_values(&self, values: &[f64]) -> Result<()> {
        let batch = self.batch_size();
        if values.len() > batch {
            return Err(Error::TooManyValues {
                len: values.len(),
                batch,
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(())
    }

    /// Unscaled coefficient vector for `values`; scaling and rounding happen
    /// in [`plaintext_from_coeffs`](Self::plaintext_from_coeffs). Split out so
    /// callers can cache the transform and re-encode at any level.
    pub fn embed_values(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.check_values(values)?;
        let slots = self.encoder().replicate(values, self.batch_size());
        Ok(self.encoder().embed_inverse(&slots))
    }

    pub fn plaintext_from_coeffs(
        &self,
        coeffs: &[f64],
        level: usize,
        scale: f64,
        logical_len: usize,
    ) -> Result<CkksPlaintext> {
        if level > self.l_max() {
            return Err(Error::InvalidParameter(format!(
                "level {level} exceeds l_max {}",
                self.l_max()
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("invalid scale {scale}")));
        }
        let rounded: Vec<i128> = coeffs.iter().map(|&c| (c * scale).round() as i128).collect();
        let limbs = self.ring().moduli()[..=level]
            .iter()
            .map(|m| {
                rounded
                    .iter()
                    .map(|&c| match i64::try_from(c) {
                        Ok(c) => m.reduce_i64(c),
                        Err(_) => m.reduce_i128(c),
                    })
                    .collect()
            })
            .collect();
        Ok(CkksPlaintext {
            poly: RingPoly {
                limbs,
                domain: Domain::Coefficient,
            },
            scale,
            logical_len,
            ctx_id: self.id(),
        })
    }

    pub fn encode(&self, values: &[f64], level: usize) -> Result<CkksPlaintext> {
        self.encode_at_scale(values, level, self.scale())
    }

    pub fn encode_at_scale(&self, values: &[f64], level: usize, scale: f64) -> Result<CkksPlaintext> {
        let coeffs = self.embed_values(values)?;
        self.plaintext_from_coeffs(&coeffs, level, scale, values.len())
    }

    /// Encodes a multiplier for [`mul_plain`](Self::mul_plain) at `level` with
    /// scale `q_level`, so the product keeps the ciphertext's scale.
    pub fn encode_multiplier(&self, values: &[f64], level: usize) -> Result<CkksPlaintext> {
        self.encode_at_scale(values, level, self.rescale_prime(level))
    }

    /// All `batch_size` slot values (real parts).
    pub fn decode_full(&self, pt: &CkksPlaintext) -> Result<Vec<f64>> {
        let coeffs = self.ring().centered_limb0(&pt.poly)?;
        let inv = 1.0 / pt.scale;
        let scaled: Vec<f64> = coeffs.iter().map(|&c| c as f64 * inv).collect();
        let slots = self.encoder().embed(&scaled);
        Ok(slots[..self.batch_size()].iter().map(|z| z.re).collect())
    }

    /// The first `logical_len` slot values.
    pub fn decode(&self, pt: &CkksPlaintext) -> Result<Vec<f64>> {
        let mut v = self.decode_full(pt)?;
        v.truncate(pt.logical_len);
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ckks::CkksParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn direct_embedding(coeffs: &[f64]) -> Vec<Complex64> {
        // independent oracle: evaluate at ζ^{5^j} term by term
        let n = coeffs.len();
        let m = 2 * n;
        let mut out = Vec::new();
        let mut g = 1usize;
        for _ in 0..n / 2 {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, &c) in coeffs.iter().enumerate() {
                let e = (g * k) % m;
                acc += Complex64::from_polar(c, 2.0 * PI * e as f64 / m as f64);
            }
            out.push(acc);
            g = g * 5 % m;
        }
        out
    }

    #[test]
    fn embedding_matches_direct_evaluation() {
        let enc = Encoder::new(32);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let coeffs: Vec<f64> = (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fast = enc.embed(&coeffs);
        let slow = direct_embedding(&coeffs);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn embed_inverse_round_trip() {
        let enc = Encoder::new(64);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let slots: Vec<Complex64> = (0..32)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let back = enc.embed(&enc.embed_inverse(&slots));
        for (a, b) in back.iter().zip(&slots) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    fn small_ctx() -> CkksContext {
        CkksContext::new(CkksParams {
            ring_dim: 256,
            l_max: 3,
            l_refresh: 2,
            batch_size: 64,
            ..CkksParams::default()
        })
        .unwrap()
    }

    #[test]
    fn encode_decode_round_trip_at_scale_2_40() {
        let ctx = small_ctx();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let v: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let pt = ctx.encode(&v, 3).unwrap();
        let back = ctx.decode(&pt).unwrap();
        let err = v.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 2f64.powi(-20), "err = {err}");
    }

    #[test]
    fn zeros_encode_to_zero_polynomial() {
        let ctx = small_ctx();
        let pt = ctx.encode(&[0.0; 64], 2).unwrap();
        assert!(pt.poly().is_zero());
        assert_eq!(ctx.decode(&pt).unwrap(), vec![0.0; 64]);
    }

    #[test]
    fn encode_rejects_bad_input() {
        let ctx = small_ctx();
        assert_eq!(
            ctx.encode(&[0.0; 65], 1).unwrap_err(),
            Error::TooManyValues { len: 65, batch: 64 }
        );
        assert_eq!(ctx.encode(&[0.0, f64::NAN], 1).unwrap_err(), Error::NonFinite(1));
    }

    #[test]
    fn short_vectors_are_zero_padded() {
        let ctx = small_ctx();
        let pt = ctx.encode(&[0.5, -0.25, 1.0], 1).unwrap();
        let full = ctx.decode_full(&pt).unwrap();
        assert!((full[0] - 0.5).abs() < 1e-9 && (full[2] - 1.0).abs() < 1e-9);
        assert!(full[3..].iter().all(|x| x.abs() < 1e-9));
        assert_eq!(ctx.decode(&pt).unwrap().len(), 3);
    }
}
