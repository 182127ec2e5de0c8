use super::{MaskKey, Packed, SecureArithmetic, SecureMatrix, SecureVector};
use crate::Result;

/// Reduces `k` modulo `len` into `(-len/2, len/2]`.
pub fn normalize_shift(k: i64, len: usize) -> i64 {
    let len = len.max(1) as i64;
    let r = k.rem_euclid(len);
    if r > len / 2 {
        r - len
    } else {
        r
    }
}

impl SecureArithmetic {
    /// Circular shift of the logical data: element `i` moves to `i + k`
    /// modulo the length. Zero levels when length equals capacity (or the
    /// shift is trivial), one level otherwise.
    pub fn circshift_vec(&self, x: &SecureVector, k: i64) -> Result<SecureVector> {
        Ok(SecureVector {
            inner: self.circshift_packed(&x.inner, k)?,
        })
    }

    pub(crate) fn circshift_packed(&self, x: &Packed, k: i64) -> Result<Packed> {
        let len = x.len;
        let k = normalize_shift(k, len);
        if k == 0 {
            return Ok(x.clone());
        }
        if len == x.capacity {
            return self.rotate_p(x, -k);
        }
        let n = len as i64;
        let u = self.rotate_p(x, -k)?;
        let v = self.rotate_p(x, if k > 0 { n } else { -n } - k)?;
        let (m1, m2) = if k < 0 {
            let split = (n + k) as usize;
            ((0, split), (split, len))
        } else {
            let k = k as usize;
            ((k, len), (0, k))
        };
        let u = self.mask_p(&u, MaskKey::range(m1.0, m1.1, x.capacity))?;
        let v = self.mask_p(&v, MaskKey::range(m2.0, m2.1, x.capacity))?;
        self.add_p(&u, &v)
    }

    /// Shifts rows by `k` and columns by `l`, circularly: element `(i, j)`
    /// moves to `(i + k, j + l)`.
    pub fn circshift_mat(&self, x: &SecureMatrix, k: i64, l: i64) -> Result<SecureMatrix> {
        let (n, m) = (x.nrows, x.ncols);
        let k = normalize_shift(k, n);
        let l = normalize_shift(l, m);
        let n_i = n as i64;
        if k == 0 {
            return Ok(SecureMatrix {
                inner: self.circshift_packed(&x.inner, l * n_i)?,
                ..x.clone()
            });
        }
        let cap = x.inner.capacity;
        let (r1, r2) = if k > 0 {
            let split = (n_i - k) as usize;
            ((0, split), (split, n))
        } else {
            let split = (-k) as usize;
            ((split, n), (0, split))
        };
        let u = self.mask_p(&x.inner, MaskKey::rows(r1.0, r1.1, n, m, cap))?;
        let v = self.mask_p(&x.inner, MaskKey::rows(r2.0, r2.1, n, m, cap))?;
        let s1 = l * n_i + k;
        let s2 = s1 + if k < 0 { n_i } else { -n_i };
        let (u, v) = if l == 0 {
            (self.rotate_p(&u, -s1)?, self.rotate_p(&v, -s2)?)
        } else {
            (self.circshift_packed(&u, s1)?, self.circshift_packed(&v, s2)?)
        };
        Ok(SecureMatrix {
            inner: self.add_p(&u, &v)?,
            ..x.clone()
        })
    }
}
