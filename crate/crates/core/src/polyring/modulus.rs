use rayon::prelude::*;

use crate::{Error, Result};

/// An NTT-friendly prime `q ≡ 1 (mod 2n)` together with the twiddle tables of
/// the negacyclic transform of length `n`.
///
/// Products use Barrett reduction; twiddle multiplications use Shoup's
/// precomputed quotients. Both require `q < 2^62`.
#[derive(Debug, Clone)]
pub struct PrimeModulus {
    q: u64,
    bits: u32,
    barrett: u128,
    n: usize,
    psi: u64,
    // psi^{bitrev(i)} and psi^{-bitrev(i)}
    psi_rev: Vec<u64>,
    psi_rev_shoup: Vec<u64>,
    psi_inv_rev: Vec<u64>,
    psi_inv_rev_shoup: Vec<u64>,
    n_inv: u64,
    n_inv_shoup: u64,
    // 2^64 mod q
    r64: u64,
}

impl PrimeModulus {
    pub fn new(q: u64, n: usize) -> Result<Self> {
        if !n.is_power_of_two() || n < 2 {
            return Err(Error::InvalidParameter(format!(
                "ring dimension {n} is not a power of two"
            )));
        }
        if q >= 1 << 62 || !is_prime(q) || !(q - 1).is_multiple_of(2 * n as u64) {
            return Err(Error::InvalidParameter(format!(
                "{q} is not an NTT-friendly prime for n = {n}"
            )));
        }
        let bits = 64 - q.leading_zeros();
        let barrett = (1u128 << (2 * bits)) / q as u128;
        let mut m = Self {
            q,
            bits,
            barrett,
            n,
            psi: 0,
            psi_rev: Vec::new(),
            psi_rev_shoup: Vec::new(),
            psi_inv_rev: Vec::new(),
            psi_inv_rev_shoup: Vec::new(),
            n_inv: 0,
            n_inv_shoup: 0,
            r64: ((1u128 << 64) % q as u128) as u64,
        };
        let psi = m.find_psi();
        let psi_inv = m.inv(psi);
        let log_n = n.trailing_zeros();
        let mut psi_rev = vec![0u64; n];
        let mut psi_inv_rev = vec![0u64; n];
        let (mut p, mut pi) = (1u64, 1u64);
        for i in 0..n {
            let r = bit_reverse(i, log_n);
            psi_rev[r] = p;
            psi_inv_rev[r] = pi;
            p = m.mul(p, psi);
            pi = m.mul(pi, psi_inv);
        }
        m.psi = psi;
        m.psi_rev_shoup = psi_rev.iter().map(|&w| m.shoup(w)).collect();
        m.psi_inv_rev_shoup = psi_inv_rev.iter().map(|&w| m.shoup(w)).collect();
        m.psi_rev = psi_rev;
        m.psi_inv_rev = psi_inv_rev;
        m.n_inv = m.inv(n as u64 % q);
        m.n_inv_shoup = m.shoup(m.n_inv);
        Ok(m)
    }

    #[inline]
    pub fn value(&self) -> u64 {
        self.q
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Primitive 2n-th root of unity used by the transform.
    pub fn psi(&self) -> u64 {
        self.psi
    }

    pub fn ring_dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        csub(a + b, self.q)
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        csub(a + self.q - b, self.q)
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    /// Barrett reduction of `x < q^2`.
    #[inline]
    pub fn reduce_u128(&self, x: u128) -> u64 {
        let t = ((x >> (self.bits - 1)) * self.barrett) >> (self.bits + 1);
        let r = (x - t * self.q as u128) as u64;
        csub(csub(r, self.q), self.q)
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce_u128(a as u128 * b as u128)
    }

    #[inline]
    pub fn shoup(&self, w: u64) -> u64 {
        (((w as u128) << 64) / self.q as u128) as u64
    }

    /// `a * w mod q` given `w_shoup = shoup(w)`.
    #[inline]
    pub fn mul_shoup(&self, a: u64, w: u64, w_shoup: u64) -> u64 {
        let hi = ((a as u128 * w_shoup as u128) >> 64) as u64;
        let r = a.wrapping_mul(w).wrapping_sub(hi.wrapping_mul(self.q));
        csub(r, self.q)
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1u64;
        base %= self.q;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: u64) -> u64 {
        debug_assert!(!a.is_multiple_of(self.q));
        self.pow(a, self.q - 2)
    }

    /// Reduces a signed integer into `[0, q)`.
    #[inline]
    pub fn reduce_i64(&self, x: i64) -> u64 {
        let a = x.unsigned_abs() as u128;
        let r = if a < self.q as u128 * self.q as u128 {
            self.reduce_u128(a)
        } else {
            (a % self.q as u128) as u64
        };
        if x < 0 {
            self.neg(r)
        } else {
            r
        }
    }

    /// Reduces any 128-bit value.
    #[inline]
    pub fn reduce_wide(&self, x: u128) -> u64 {
        let q2 = self.q as u128 * self.q as u128;
        if x < q2 {
            return self.reduce_u128(x);
        }
        let hi = (x >> 64) as u64;
        if (hi as u128) >= q2 {
            return (x % self.q as u128) as u64;
        }
        let hi_r = self.reduce_u128(hi as u128);
        let lo_r = self.reduce_u128(x as u64 as u128);
        self.add(self.mul(hi_r, self.r64), lo_r)
    }

    pub fn reduce_i128(&self, x: i128) -> u64 {
        x.rem_euclid(self.q as i128) as u64
    }

    /// Centered representative in `(-q/2, q/2]`.
    #[inline]
    pub fn center(&self, a: u64) -> i64 {
        if a > self.q / 2 {
            a as i64 - self.q as i64
        } else {
            a as i64
        }
    }

    fn find_psi(&self) -> u64 {
        let two_n = 2 * self.n as u64;
        let exp = (self.q - 1) / two_n;
        let mut g = 2u64;
        loop {
            let r = self.pow(g, exp);
            if self.pow(r, self.n as u64) == self.q - 1 {
                return r;
            }
            g += 1;
        }
    }

    /// In-place negacyclic forward transform; output in bit-reversed order.
    pub fn ntt_in_place(&self, a: &mut [u64]) {
        assert_eq!(a.len(), self.n);
        let q = self.q;
        let n = self.n;
        let mut t = n;
        let mut m = 1;
        while m < n {
            t >>= 1;
            let w = &self.psi_rev[m..2 * m];
            let ws = &self.psi_rev_shoup[m..2 * m];
            for (chunk, (&w, &ws)) in a.chunks_exact_mut(2 * t).zip(w.iter().zip(ws)) {
                let (lo, hi) = chunk.split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let u = *x;
                    let v = mul_shoup_raw(*y, w, ws, q);
                    *x = csub(u + v, q);
                    *y = csub(u + q - v, q);
                }
            }
            m <<= 1;
        }
    }

    /// In-place inverse of [`ntt_in_place`](Self::ntt_in_place).
    pub fn intt_in_place(&self, a: &mut [u64]) {
        assert_eq!(a.len(), self.n);
        let q = self.q;
        let n = self.n;
        let mut t = 1;
        let mut m = n;
        while m > 1 {
            let h = m >> 1;
            let w = &self.psi_inv_rev[h..m];
            let ws = &self.psi_inv_rev_shoup[h..m];
            for (chunk, (&w, &ws)) in a.chunks_exact_mut(2 * t).zip(w.iter().zip(ws)) {
                let (lo, hi) = chunk.split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let u = *x;
                    let v = *y;
                    *x = csub(u + v, q);
                    *y = mul_shoup_raw(csub(u + q - v, q), w, ws, q);
                }
            }
            t <<= 1;
            m = h;
        }
        let (ni, nis) = (self.n_inv, self.n_inv_shoup);
        for x in a.iter_mut() {
            *x = mul_shoup_raw(*x, ni, nis, q);
        }
    }
}

#[inline(always)]
fn mul_shoup_raw(a: u64, w: u64, w_shoup: u64, q: u64) -> u64 {
    let hi = ((a as u128 * w_shoup as u128) >> 64) as u64;
    let r = a.wrapping_mul(w).wrapping_sub(hi.wrapping_mul(q));
    csub(r, q)
}

/// `x mod q` for `x < 2q`, without a data-dependent branch.
#[inline(always)]
fn csub(x: u64, q: u64) -> u64 {
    x.min(x.wrapping_sub(q))
}

/// CRT basis extension of coefficient-domain residues.
///
/// With `B = prod(src)` and `x` given by its residues `input[i] mod src[i]`,
/// returns the centered representative of `x mod B` reduced modulo every
/// `dst[t]`. The quotient `round(sum y_i / q_i)` is estimated in floating
/// point, so a value within about `2^-40·B` of `±B/2` may come out shifted by
/// `B`.
pub fn fast_base_conv(src: &[&PrimeModulus], dst: &[&PrimeModulus], input: &[&[u64]]) -> Vec<Vec<u64>> {
    assert_eq!(src.len(), input.len());
    let n = input.first().map_or(0, |l| l.len());
    // y_i = x_i * (B/q_i)^{-1} mod q_i, so x = sum y_i (B/q_i) - v B
    let y: Vec<Vec<u64>> = src
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let hat = src
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .fold(1u64, |acc, (_, q)| m.mul(acc, q.value() % m.value()));
            let inv = m.inv(hat);
            let inv_s = m.shoup(inv);
            input[i].iter().map(|&x| m.mul_shoup(x, inv, inv_s)).collect()
        })
        .collect();
    let mut frac = vec![0.0f64; n];
    for (yi, m) in y.iter().zip(src) {
        let inv_q = 1.0 / m.value() as f64;
        for (f, &v) in frac.iter_mut().zip(yi) {
            *f += v as f64 * inv_q;
        }
    }
    let v: Vec<u64> = frac.iter().map(|f| f.round() as u64).collect();
    dst.par_iter()
        .map(|t| {
            let hats: Vec<u64> = (0..src.len())
                .map(|i| {
                    src.iter()
                        .enumerate()
                        .filter(|&(j, _)| j != i)
                        .fold(1u64, |acc, (_, q)| t.mul(acc, q.value() % t.value()))
                })
                .collect();
            let b_mod = src.iter().fold(1u64, |acc, q| t.mul(acc, q.value() % t.value()));
            let mut acc = vec![0u128; n];
            for (i, (yi, &h)) in y.iter().zip(&hats).enumerate() {
                for (a, &x) in acc.iter_mut().zip(yi) {
                    *a += x as u128 * h as u128;
                }
                if i % 32 == 31 {
                    for a in acc.iter_mut() {
                        *a = t.reduce_wide(*a) as u128;
                    }
                }
            }
            acc.into_iter()
                .zip(&v)
                .map(|(a, &vk)| t.sub(t.reduce_wide(a), t.mul(vk % t.value(), b_mod)))
                .collect()
        })
        .collect()
}

fn bit_reverse(x: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        x.reverse_bits() >> (usize::BITS - bits)
    }
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    (a as u128 * b as u128 % m as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin for 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &p in &BASES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Primes `≡ 1 (mod 2n)` of the requested bit size, nearest to `2^bits` first
/// (alternating above and below), skipping anything in `exclude`.
///
/// Scaling primes chosen this way keep `q_i / 2^bits` within `~1e-7` of one,
/// which keeps the tracked scale close to the nominal scale.
pub fn ntt_primes(bits: u32, n: usize, count: usize, exclude: &[u64]) -> Result<Vec<u64>> {
    if !(20..=61).contains(&bits) {
        return Err(Error::InvalidParameter(format!(
            "prime size {bits} bits outside supported range 20..=61"
        )));
    }
    let step = 2 * n as u64;
    let center = 1u64 << bits;
    let lo_bound = 1u64 << (bits - 1);
    let hi_bound = if bits == 61 { 1u64 << 61 } else { 1u64 << (bits + 1) };
    let mut out = Vec::with_capacity(count);
    let mut j = 0u64;
    // 2^bits + 1 is ≡ 1 mod 2n since 2n | 2^bits
    while out.len() < count {
        let mut candidates = Vec::with_capacity(2);
        let below = center + 1 - j * step;
        if j > 0 && below > lo_bound {
            candidates.push(below);
        }
        let above = center + 1 + j * step;
        if above < hi_bound {
            candidates.push(above);
        }
        if candidates.is_empty() && below <= lo_bound {
            return Err(Error::InvalidParameter(format!(
                "not enough {bits}-bit NTT primes for n = {n}"
            )));
        }
        for c in candidates {
            if out.len() < count && !exclude.contains(&c) && !out.contains(&c) && is_prime(c) {
                out.push(c);
            }
        }
        j += 1;
    }
    Ok(out)
}

/// Largest primes `≡ 1 (mod 2n)` strictly below `2^bits`.
pub fn ntt_primes_below(bits: u32, n: usize, count: usize, exclude: &[u64]) -> Result<Vec<u64>> {
    if !(20..=61).contains(&bits) {
        return Err(Error::InvalidParameter(format!(
            "prime size {bits} bits outside supported range 20..=61"
        )));
    }
    let step = 2 * n as u64;
    let mut c = (1u64 << bits) + 1 - step;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        if c < (1u64 << (bits - 1)) {
            return Err(Error::InvalidParameter(format!(
                "not enough {bits}-bit NTT primes for n = {n}"
            )));
        }
        if !exclude.contains(&c) && is_prime(c) {
            out.push(c);
        }
        c -= step;
    }
    Ok(out)
}
