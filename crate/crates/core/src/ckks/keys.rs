use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use super::{CkksContext, SecretDistribution};
use crate::polyring::{fast_base_conv, Domain, PrimeModulus, RingPoly};
use crate::{Error, Result};

/// Evaluation-domain polynomial over `q_0..q_L` plus the auxiliary primes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ExtPoly {
    pub(crate) main: Vec<Vec<u64>>,
    pub(crate) special: Vec<Vec<u64>>,
}

impl ExtPoly {
    /// Limb `t` of the basis `q_0..q_level, p_0..p_k`; main limbs above
    /// `level` are skipped.
    fn limb(&self, t: usize, level: usize) -> &[u64] {
        if t <= level {
            &self.main[t]
        } else {
            &self.special[t - level - 1]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecretKey {
    pub(crate) coeffs: Vec<i64>,
    pub(crate) eval: ExtPoly,
}

impl SecretKey {
    pub(crate) fn from_coeffs(ctx: &CkksContext, coeffs: Vec<i64>) -> Self {
        let eval = lift_small_eval(ctx, &coeffs);
        Self { coeffs, eval }
    }

    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    /// `s` in the evaluation domain truncated to `level`.
    pub(crate) fn eval_at(&self, level: usize) -> RingPoly {
        RingPoly {
            limbs: self.eval.main[..=level].to_vec(),
            domain: Domain::Evaluation,
        }
    }
}

/// `(pk_0, pk_1) = (-a·s + e, a)` modulo `Q_lmax`, evaluation domain.
#[derive(Debug, Clone, PartialEq)]
pub struct PublicKey {
    pub(crate) pk0: RingPoly,
    pub(crate) pk1: RingPoly,
}

impl PublicKey {
    pub fn pk0(&self) -> &RingPoly {
        &self.pk0
    }

    pub fn pk1(&self) -> &RingPoly {
        &self.pk1
    }
}

/// Hybrid key-switching material from some `s'` to `s`: for digit `j`,
/// `b_j = -a_j·s + e_j + P·g_j·s'` over `Q_L·P`, where the gadget `g_j` is the
/// CRT idempotent of digit `j` (1 modulo its primes, 0 modulo the others).
#[derive(Debug, Clone, PartialEq)]
pub struct KeySwitchKey {
    pub(crate) b: Vec<ExtPoly>,
    pub(crate) a: Vec<ExtPoly>,
}

impl KeySwitchKey {
    pub fn digits(&self) -> usize {
        self.b.len()
    }
}

/// Key-switching key for `s^2 -> s`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelinKey(pub(crate) KeySwitchKey);

/// Key-switching keys for `s(X^g) -> s`, keyed by Galois element.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RotKeySet {
    pub(crate) keys: BTreeMap<u64, KeySwitchKey>,
}

impl RotKeySet {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn galois_elements(&self) -> impl Iterator<Item = u64> + '_ {
        self.keys.keys().copied()
    }

    pub fn contains(&self, galois_elt: u64) -> bool {
        self.keys.contains_key(&galois_elt)
    }

    pub(crate) fn get(&self, galois_elt: u64) -> Option<&KeySwitchKey> {
        self.keys.get(&galois_elt)
    }

    /// Merges another key set into this one.
    pub fn extend(&mut self, other: RotKeySet) {
        self.keys.extend(other.keys);
    }
}

fn lift_small_eval(ctx: &CkksContext, coeffs: &[i64]) -> ExtPoly {
    let lift = |m: &PrimeModulus| {
        let mut limb: Vec<u64> = coeffs.iter().map(|&c| m.reduce_i64(c)).collect();
        m.ntt_in_place(&mut limb);
        limb
    };
    let ring = ctx.ring();
    ExtPoly {
        main: ring.moduli().par_iter().map(lift).collect(),
        special: ring.special().par_iter().map(lift).collect(),
    }
}

fn uniform_ext<R: Rng + ?Sized>(ctx: &CkksContext, rng: &mut R) -> ExtPoly {
    let ring = ctx.ring();
    let n = ring.ring_dim();
    let mut draw = |m: &PrimeModulus| -> Vec<u64> { (0..n).map(|_| rng.gen_range(0..m.value())).collect() };
    let main = ring.moduli().iter().map(&mut draw).collect();
    let special = ring.special().iter().map(&mut draw).collect();
    ExtPoly { main, special }
}

impl CkksContext {
    fn sample_secret<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<i64> {
        match self.params().secret {
            SecretDistribution::UniformTernary => self.ring().sample_ternary(rng),
            SecretDistribution::SparseTernary { hamming_weight } => {
                self.ring().sample_sparse_ternary(hamming_weight, rng)
            }
        }
    }

    pub fn keygen<R: Rng + ?Sized>(&self, rng: &mut R) -> (SecretKey, PublicKey, RelinKey) {
        let sk = SecretKey::from_coeffs(self, self.sample_secret(rng));
        let pk = self.public_keygen(&sk, rng);
        let ring = self.ring();
        let square = |(m, s): (&PrimeModulus, &Vec<u64>)| -> Vec<u64> { s.iter().map(|&x| m.mul(x, x)).collect() };
        let s_sq = ExtPoly {
            main: ring.moduli().par_iter().zip(sk.eval.main.par_iter()).map(square).collect(),
            special: ring.special().par_iter().zip(sk.eval.special.par_iter()).map(square).collect(),
        };
        let rlk = RelinKey(self.key_switch_keygen(&sk, &s_sq, rng));
        (sk, pk, rlk)
    }

    pub fn public_keygen<R: Rng + ?Sized>(&self, sk: &SecretKey, rng: &mut R) -> PublicKey {
        let l = self.l_max();
        let ring = self.ring();
        let mut a = ring.sample_uniform(l, rng);
        ring.ntt_forward_in_place(&mut a).expect("fresh sample is in coefficient domain");
        let e = self.ring().sample_error(self.params().sigma, rng);
        let mut e = ring.from_signed(&e, l);
        ring.ntt_forward_in_place(&mut e).expect("coefficient domain");
        let a_s = ring.mul_eval(&a, &sk.eval_at(l)).expect("same level");
        let pk0 = ring.sub(&e, &a_s).expect("same level");
        PublicKey { pk0, pk1: a }
    }

    /// Key-switching key taking ciphertexts under `from` (evaluation form over
    /// `Q_L·P`) to ciphertexts under `sk`.
    pub(crate) fn key_switch_keygen<R: Rng + ?Sized>(
        &self,
        sk: &SecretKey,
        from: &ExtPoly,
        rng: &mut R,
    ) -> KeySwitchKey {
        let ring = self.ring();
        let chain = ring.chain();
        let l = self.l_max();
        let mut b_all = Vec::with_capacity(chain.dnum);
        let mut a_all = Vec::with_capacity(chain.dnum);
        for j in 0..chain.dnum {
            let a = uniform_ext(self, rng);
            let e = self.ring().sample_error(self.params().sigma, rng);
            let e = lift_small_eval(self, &e);
            let digit = chain.digit_range(j, l);
            // -a*s + e in every limb of the extended basis
            let rlwe = |t: usize, m: &PrimeModulus| -> Vec<u64> {
                a.limb(t, l)
                    .iter()
                    .zip(sk.eval.limb(t, l))
                    .zip(e.limb(t, l))
                    .map(|((&ai, &si), &ei)| m.sub(ei, m.mul(ai, si)))
                    .collect()
            };
            let main: Vec<Vec<u64>> = ring
                .moduli()
                .par_iter()
                .enumerate()
                .map(|(i, m)| {
                    let mut out = rlwe(i, m);
                    if digit.contains(&i) {
                        let p = self.special_mod()[i];
                        let ps = m.shoup(p);
                        for (o, &f) in out.iter_mut().zip(&from.main[i]) {
                            *o = m.add(*o, m.mul_shoup(f, p, ps));
                        }
                    }
                    out
                })
                .collect();
            let special: Vec<Vec<u64>> = ring
                .special()
                .par_iter()
                .enumerate()
                .map(|(s, m)| rlwe(l + 1 + s, m))
                .collect();
            b_all.push(ExtPoly { main, special });
            a_all.push(a);
        }
        KeySwitchKey { b: b_all, a: a_all }
    }

    /// Generates one key per distinct nonzero rotation index modulo the
    /// batch size (see [`CkksContext::rotation_index`]).
    pub fn rotation_keygen<R: Rng + ?Sized>(
        &self,
        sk: &SecretKey,
        indices: &[i64],
        rng: &mut R,
    ) -> RotKeySet {
        let mut set = RotKeySet::default();
        let mut reduced: Vec<i64> = indices
            .iter()
            .map(|&k| self.rotation_index(k))
            .filter(|&r| r != 0)
            .collect();
        reduced.sort_unstable();
        reduced.dedup();
        for r in reduced {
            let g = self.encoder().galois_element(r);
            if set.keys.contains_key(&g) {
                continue;
            }
            let s_g = automorphism_signed(&sk.coeffs, g);
            let from = lift_small_eval(self, &s_g);
            set.keys.insert(g, self.key_switch_keygen(sk, &from, rng));
        }
        set
    }

    /// Switches the key of a single polynomial `d` (coefficient domain):
    /// returns `(k0, k1)` with `k0 + k1·s ≈ d·s'` modulo `Q_level`.
    pub(crate) fn key_switch(&self, d: &RingPoly, key: &KeySwitchKey) -> Result<(RingPoly, RingPoly)> {
        if d.domain() != Domain::Coefficient {
            return Err(Error::DomainMismatch {
                expected: "coefficient",
                found: "evaluation",
            });
        }
        let ring = self.ring();
        let chain = ring.chain();
        let l = d.level();
        let n = ring.ring_dim();
        let width = l + 1 + ring.special().len();
        let ext: Vec<&PrimeModulus> = ring.moduli()[..=l].iter().chain(ring.special()).collect();
        // key limbs live over the full chain; map extended index t to them
        let l_key = self.l_max();
        let key_index = |t: usize| if t <= l { t } else { t - l + l_key };

        let mut acc0 = vec![vec![0u64; n]; width];
        let mut acc1 = vec![vec![0u64; n]; width];
        for j in 0..chain.dnum {
            let range = chain.digit_range(j, l);
            if range.is_empty() {
                continue;
            }
            // raise digit j from its own primes to the rest of the basis
            let others: Vec<usize> = (0..width).filter(|t| !range.contains(t)).collect();
            let dst: Vec<&PrimeModulus> = others.iter().map(|&t| ext[t]).collect();
            let input: Vec<&[u64]> = d.limbs[range.clone()].iter().map(|v| v.as_slice()).collect();
            let raised = fast_base_conv(&ext[range.clone()], &dst, &input);
            let mut limbs: Vec<Vec<u64>> = vec![Vec::new(); width];
            for t in range.clone() {
                limbs[t] = d.limbs[t].clone();
            }
            for (t, v) in others.into_iter().zip(raised) {
                limbs[t] = v;
            }
            let (kb, ka) = (&key.b[j], &key.a[j]);
            limbs
                .par_iter_mut()
                .zip(acc0.par_iter_mut().zip(acc1.par_iter_mut()))
                .enumerate()
                .for_each(|(t, (digit, (a0, a1)))| {
                    let m = ext[t];
                    m.ntt_in_place(digit);
                    let (b, a) = (kb.limb(key_index(t), l_key), ka.limb(key_index(t), l_key));
                    for i in 0..n {
                        a0[i] = m.add(a0[i], m.mul(digit[i], b[i]));
                        a1[i] = m.add(a1[i], m.mul(digit[i], a[i]));
                    }
                });
        }
        acc0.par_iter_mut()
            .chain(acc1.par_iter_mut())
            .enumerate()
            .for_each(|(t, v)| ext[t % width].intt_in_place(v));
        Ok((self.mod_down(acc0, l), self.mod_down(acc1, l)))
    }

    /// Divides an extended-basis polynomial by `P`, returning it modulo `Q_l`.
    fn mod_down(&self, mut limbs: Vec<Vec<u64>>, l: usize) -> RingPoly {
        let ring = self.ring();
        let special = limbs.split_off(l + 1);
        let src: Vec<&PrimeModulus> = ring.special().iter().collect();
        let dst: Vec<&PrimeModulus> = ring.moduli()[..=l].iter().collect();
        let input: Vec<&[u64]> = special.iter().map(|v| v.as_slice()).collect();
        let conv = fast_base_conv(&src, &dst, &input);
        limbs
            .par_iter_mut()
            .zip(conv.par_iter())
            .enumerate()
            .for_each(|(i, (x, c))| {
                let m = ring.modulus(i);
                let inv = self.special_inv()[i];
                let inv_s = m.shoup(inv);
                for (xi, &ci) in x.iter_mut().zip(c) {
                    *xi = m.mul_shoup(m.sub(*xi, ci), inv, inv_s);
                }
            });
        RingPoly {
            limbs,
            domain: Domain::Coefficient,
        }
    }
}

/// `p(X) -> p(X^g)` on signed coefficients in `Z[X]/(X^N + 1)`.
pub(crate) fn automorphism_signed(coeffs: &[i64], g: u64) -> Vec<i64> {
    let n = coeffs.len() as u64;
    let mut out = vec![0i64; coeffs.len()];
    for (i, &c) in coeffs.iter().enumerate() {
        let e = (i as u64 * g) % (2 * n);
        if e < n {
            out[e as usize] = c;
        } else {
            out[(e - n) as usize] = -c;
        }
    }
    out
}
