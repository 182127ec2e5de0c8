//! Negacyclic polynomial arithmetic in `Z_Q[X]/(X^N + 1)` with `Q` held in
//! residue-number-system form over a chain of 64-bit NTT primes.

mod modulus;
mod sampling;

pub use modulus::{fast_base_conv, is_prime, ntt_primes, ntt_primes_below, PrimeModulus};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The ordered prime chain `q_0, q_1, ..., q_lmax` plus the auxiliary primes
/// `p_0..p_k` used only inside key switching.
///
/// Key switching splits the chain into `dnum` digits of `alpha` consecutive
/// primes; the auxiliary product `P` is sized to exceed every digit product.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModulusChain {
    pub primes: Vec<u64>,
    pub special: Vec<u64>,
    pub dnum: usize,
    pub first_bits: u32,
    pub scale_bits: u32,
}

/// Bits of headroom of `P` over the largest digit product.
const SPECIAL_MARGIN_BITS: f64 = 12.0;
const SPECIAL_BITS: u32 = 61;

impl ModulusChain {
    /// Builds a chain for `l_max` multiplicative levels: one `first_bits`
    /// prime followed by `l_max` primes close to `2^scale_bits`.
    pub fn generate(
        ring_dim: usize,
        l_max: usize,
        first_bits: u32,
        scale_bits: u32,
        dnum: usize,
    ) -> Result<Self> {
        if dnum == 0 || dnum > l_max + 1 {
            return Err(Error::InvalidParameter(format!(
                "dnum {dnum} must lie in 1..={}",
                l_max + 1
            )));
        }
        let q0 = ntt_primes_below(first_bits, ring_dim, 1, &[])?[0];
        let mut primes = vec![q0];
        primes.extend(ntt_primes(scale_bits, ring_dim, l_max, &[q0])?);
        let alpha = (l_max + 1).div_ceil(dnum);
        let digit_bits = primes
            .chunks(alpha)
            .map(|g| g.iter().map(|&q| (q as f64).log2()).sum::<f64>())
            .fold(0.0, f64::max);
        let need = digit_bits + (alpha as f64).log2() + SPECIAL_MARGIN_BITS;
        let k = (need / (SPECIAL_BITS - 1) as f64).ceil() as usize;
        let special = ntt_primes_below(SPECIAL_BITS, ring_dim, k, &primes)?;
        let chain = Self {
            primes,
            special,
            dnum,
            first_bits,
            scale_bits,
        };
        chain.validate()?;
        Ok(chain)
    }

    pub fn validate(&self) -> Result<()> {
        if self.primes.is_empty() || self.special.is_empty() {
            return Err(Error::InvalidParameter("empty modulus chain".into()));
        }
        if self.dnum == 0 || self.dnum > self.primes.len() {
            return Err(Error::InvalidParameter(format!("invalid dnum {}", self.dnum)));
        }
        let mut all = self.primes.clone();
        all.extend(&self.special);
        all.sort_unstable();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("modulus chain primes must be distinct".into()));
        }
        Ok(())
    }

    pub fn l_max(&self) -> usize {
        self.primes.len() - 1
    }

    /// Primes per key-switching digit.
    pub fn alpha(&self) -> usize {
        self.primes.len().div_ceil(self.dnum)
    }

    /// Chain indices of digit `j` restricted to `0..=level`.
    pub fn digit_range(&self, j: usize, level: usize) -> std::ops::Range<usize> {
        let a = self.alpha();
        let start = (j * a).min(level + 1);
        start..((j + 1) * a).min(level + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    Coefficient,
    Evaluation,
}

impl Domain {
    fn name(self) -> &'static str {
        match self {
            Domain::Coefficient => "coefficient",
            Domain::Evaluation => "evaluation",
        }
    }
}

/// A ring element in RNS form: limb `i` holds the residues modulo `q_i` for
/// `i = 0..=level`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingPoly {
    pub(crate) limbs: Vec<Vec<u64>>,
    pub(crate) domain: Domain,
}

impl RingPoly {
    pub fn level(&self) -> usize {
        self.limbs.len() - 1
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn limbs(&self) -> &[Vec<u64>] {
        &self.limbs
    }

    pub fn ring_dim(&self) -> usize {
        self.limbs[0].len()
    }

    /// Keeps only the limbs `0..=level`. Residues are untouched, so the
    /// represented value modulo the smaller `Q_level` is unchanged.
    pub fn truncate(&mut self, level: usize) {
        self.limbs.truncate(level + 1);
    }

    pub fn truncated(&self, level: usize) -> RingPoly {
        RingPoly {
            limbs: self.limbs[..=level].to_vec(),
            domain: self.domain,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.limbs.iter().all(|l| l.iter().all(|&c| c == 0))
    }
}

/// Precomputed arithmetic for one ring dimension and modulus chain.
#[derive(Debug, Clone)]
pub struct RingContext {
    n: usize,
    chain: ModulusChain,
    moduli: Vec<PrimeModulus>,
    special: Vec<PrimeModulus>,
    // q_l^{-1} mod q_i, indexed [l][i] for i < l
    drop_inv: Vec<Vec<u64>>,
}

impl RingContext {
    pub fn new(n: usize, chain: ModulusChain) -> Result<Self> {
        if !n.is_power_of_two() || n < 4 {
            return Err(Error::InvalidParameter(format!(
                "ring dimension {n} must be a power of two >= 4"
            )));
        }
        chain.validate()?;
        let moduli = chain
            .primes
            .iter()
            .map(|&q| PrimeModulus::new(q, n))
            .collect::<Result<Vec<_>>>()?;
        let special = chain
            .special
            .iter()
            .map(|&p| PrimeModulus::new(p, n))
            .collect::<Result<Vec<_>>>()?;
        let drop_inv = (0..moduli.len())
            .map(|l| {
                (0..l)
                    .map(|i| moduli[i].inv(chain.primes[l] % chain.primes[i]))
                    .collect()
            })
            .collect();
        Ok(Self {
            n,
            chain,
            moduli,
            special,
            drop_inv,
        })
    }

    pub fn ring_dim(&self) -> usize {
        self.n
    }

    pub fn chain(&self) -> &ModulusChain {
        &self.chain
    }

    pub fn modulus(&self, i: usize) -> &PrimeModulus {
        &self.moduli[i]
    }

    pub fn moduli(&self) -> &[PrimeModulus] {
        &self.moduli
    }

    pub fn special(&self) -> &[PrimeModulus] {
        &self.special
    }

    pub fn max_level(&self) -> usize {
        self.moduli.len() - 1
    }

    pub fn zero(&self, level: usize, domain: Domain) -> RingPoly {
        RingPoly {
            limbs: vec![vec![0u64; self.n]; level + 1],
            domain,
        }
    }

    /// Builds a polynomial from signed integer coefficients.
    pub fn from_signed(&self, coeffs: &[i64], level: usize) -> RingPoly {
        assert_eq!(coeffs.len(), self.n);
        let limbs = self.moduli[..=level]
            .iter()
            .map(|m| coeffs.iter().map(|&c| m.reduce_i64(c)).collect())
            .collect();
        RingPoly {
            limbs,
            domain: Domain::Coefficient,
        }
    }

    fn check_domain(p: &RingPoly, expected: Domain) -> Result<()> {
        if p.domain != expected {
            return Err(Error::DomainMismatch {
                expected: expected.name(),
                found: p.domain.name(),
            });
        }
        Ok(())
    }

    fn check_level(&self, p: &RingPoly) -> Result<()> {
        if p.limbs.is_empty() || p.limbs.len() > self.moduli.len() || p.ring_dim() != self.n {
            return Err(Error::InvalidParameter(
                "polynomial does not belong to this ring".into(),
            ));
        }
        Ok(())
    }

    pub fn ntt_forward(&self, p: &RingPoly) -> Result<RingPoly> {
        let mut out = p.clone();
        self.ntt_forward_in_place(&mut out)?;
        Ok(out)
    }

    pub fn ntt_inverse(&self, p: &RingPoly) -> Result<RingPoly> {
        let mut out = p.clone();
        self.ntt_inverse_in_place(&mut out)?;
        Ok(out)
    }

    pub fn ntt_forward_in_place(&self, p: &mut RingPoly) -> Result<()> {
        Self::check_domain(p, Domain::Coefficient)?;
        self.check_level(p)?;
        p.limbs
            .par_iter_mut()
            .zip(self.moduli.par_iter())
            .for_each(|(limb, m)| m.ntt_in_place(limb));
        p.domain = Domain::Evaluation;
        Ok(())
    }

    pub fn ntt_inverse_in_place(&self, p: &mut RingPoly) -> Result<()> {
        Self::check_domain(p, Domain::Evaluation)?;
        self.check_level(p)?;
        p.limbs
            .par_iter_mut()
            .zip(self.moduli.par_iter())
            .for_each(|(limb, m)| m.intt_in_place(limb));
        p.domain = Domain::Coefficient;
        Ok(())
    }

    fn check_pair(a: &RingPoly, b: &RingPoly) -> Result<()> {
        if a.level() != b.level() {
            return Err(Error::LevelMismatch(a.level(), b.level()));
        }
        if a.domain != b.domain {
            return Err(Error::DomainMismatch {
                expected: a.domain.name(),
                found: b.domain.name(),
            });
        }
        Ok(())
    }

    fn zip_with(&self, a: &RingPoly, b: &RingPoly, f: impl Fn(&PrimeModulus, u64, u64) -> u64 + Sync) -> RingPoly {
        let limbs = a
            .limbs
            .par_iter()
            .zip(b.limbs.par_iter())
            .zip(self.moduli.par_iter())
            .map(|((x, y), m)| x.iter().zip(y).map(|(&u, &v)| f(m, u, v)).collect())
            .collect();
        RingPoly {
            limbs,
            domain: a.domain,
        }
    }

    pub fn add(&self, a: &RingPoly, b: &RingPoly) -> Result<RingPoly> {
        Self::check_pair(a, b)?;
        Ok(self.zip_with(a, b, |m, x, y| m.add(x, y)))
    }

    pub fn sub(&self, a: &RingPoly, b: &RingPoly) -> Result<RingPoly> {
        Self::check_pair(a, b)?;
        Ok(self.zip_with(a, b, |m, x, y| m.sub(x, y)))
    }

    pub fn add_assign(&self, a: &mut RingPoly, b: &RingPoly) -> Result<()> {
        Self::check_pair(a, b)?;
        a.limbs
            .par_iter_mut()
            .zip(b.limbs.par_iter())
            .zip(self.moduli.par_iter())
            .for_each(|((x, y), m)| {
                for (u, &v) in x.iter_mut().zip(y) {
                    *u = m.add(*u, v);
                }
            });
        Ok(())
    }

    pub fn neg(&self, a: &RingPoly) -> RingPoly {
        let limbs = a
            .limbs
            .par_iter()
            .zip(self.moduli.par_iter())
            .map(|(x, m)| x.iter().map(|&u| m.neg(u)).collect())
            .collect();
        RingPoly {
            limbs,
            domain: a.domain,
        }
    }

    /// Pointwise product of two evaluation-domain polynomials.
    pub fn mul_eval(&self, a: &RingPoly, b: &RingPoly) -> Result<RingPoly> {
        Self::check_pair(a, b)?;
        Self::check_domain(a, Domain::Evaluation)?;
        Ok(self.zip_with(a, b, |m, x, y| m.mul(x, y)))
    }

    /// Negacyclic product. Coefficient-domain inputs are transformed
    /// internally and the result is returned in the inputs' domain.
    pub fn mul(&self, a: &RingPoly, b: &RingPoly) -> Result<RingPoly> {
        Self::check_pair(a, b)?;
        match a.domain {
            Domain::Evaluation => self.mul_eval(a, b),
            Domain::Coefficient => {
                let fa = self.ntt_forward(a)?;
                let fb = self.ntt_forward(b)?;
                let mut prod = self.mul_eval(&fa, &fb)?;
                self.ntt_inverse_in_place(&mut prod)?;
                Ok(prod)
            }
        }
    }

    /// Multiplies every coefficient by the signed integer `c`.
    pub fn mul_scalar(&self, a: &RingPoly, c: i128) -> RingPoly {
        let limbs = a
            .limbs
            .par_iter()
            .zip(self.moduli.par_iter())
            .map(|(x, m)| {
                let cm = m.reduce_i128(c);
                let cs = m.shoup(cm);
                x.iter().map(|&u| m.mul_shoup(u, cm, cs)).collect()
            })
            .collect();
        RingPoly {
            limbs,
            domain: a.domain,
        }
    }

    /// Applies `X -> X^galois_elt` in the coefficient domain.
    pub fn automorphism(&self, p: &RingPoly, galois_elt: u64) -> Result<RingPoly> {
        let two_n = 2 * self.n as u64;
        if galois_elt.is_multiple_of(2) || galois_elt == 0 || galois_elt >= two_n {
            return Err(Error::InvalidGaloisElement(galois_elt, self.n));
        }
        Self::check_domain(p, Domain::Coefficient)?;
        let n = self.n;
        let limbs = p
            .limbs
            .par_iter()
            .zip(self.moduli.par_iter())
            .map(|(x, m)| {
                let mut out = vec![0u64; n];
                let mut idx = 0u64;
                for &c in x.iter() {
                    let dst = (idx % two_n) as usize;
                    if dst < n {
                        out[dst] = c;
                    } else {
                        out[dst - n] = m.neg(c);
                    }
                    idx += galois_elt;
                }
                out
            })
            .collect();
        Ok(RingPoly {
            limbs,
            domain: Domain::Coefficient,
        })
    }

    /// Divides by the last prime `q_l` with rounding and removes that limb.
    ///
    /// For each remaining limb `i`: `(x_i - [x_l]) * q_l^{-1} mod q_i`, where
    /// `[x_l]` is the centered residue modulo `q_l`. The result differs from
    /// `round(x / q_l)` by at most one unit per coefficient.
    pub fn drop_last_limb(&self, p: &RingPoly) -> Result<RingPoly> {
        let mut out = p.clone();
        self.drop_last_limb_in_place(&mut out)?;
        Ok(out)
    }

    pub fn drop_last_limb_in_place(&self, p: &mut RingPoly) -> Result<()> {
        Self::check_domain(p, Domain::Coefficient)?;
        let l = p.level();
        if l == 0 {
            return Err(Error::LevelExhausted(0));
        }
        let last = p.limbs.pop().expect("level >= 1");
        let ql = &self.moduli[l];
        let centered: Vec<i64> = last.iter().map(|&c| ql.center(c)).collect();
        let invs = &self.drop_inv[l];
        p.limbs
            .par_iter_mut()
            .zip(self.moduli.par_iter())
            .zip(invs.par_iter())
            .for_each(|((limb, m), &inv)| {
                let inv_s = m.shoup(inv);
                for (x, &r) in limb.iter_mut().zip(&centered) {
                    let diff = m.sub(*x, m.reduce_i64(r));
                    *x = m.mul_shoup(diff, inv, inv_s);
                }
            });
        Ok(())
    }

    /// Signed centered coefficients of limb 0. Exact whenever every
    /// coefficient of the represented value lies in `(-q_0/2, q_0/2]`.
    pub fn centered_limb0(&self, p: &RingPoly) -> Result<Vec<i64>> {
        Self::check_domain(p, Domain::Coefficient)?;
        let m = &self.moduli[0];
        Ok(p.limbs[0].iter().map(|&c| m.center(c)).collect())
    }
}
