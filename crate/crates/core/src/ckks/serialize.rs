//! Versioned little-endian binary format.
//!
//! Every blob starts with the magic `HSIM`, a `u16` format version and a
//! one-byte type tag. Polynomials are written as domain, limb count, ring
//! dimension, then the limbs in level order.

use std::collections::BTreeMap;

use super::keys::ExtPoly;
use super::{
    CkksCiphertext, CkksContext, CkksParams, CkksPlaintext, KeySwitchKey, PublicKey, RelinKey, RotKeySet,
    SecretDistribution, SecretKey,
};
use crate::polyring::{Domain, ModulusChain, RingPoly};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"HSIM";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
enum Tag {
    Context = 1,
    Plaintext = 2,
    Ciphertext = 3,
    SecretKey = 4,
    PublicKey = 5,
    RelinKey = 6,
    RotKeys = 7,
}

struct Writer(Vec<u8>);

impl Writer {
    fn new(tag: Tag) -> Self {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.0.extend_from_slice(&VERSION.to_le_bytes());
        w.0.push(tag as u8);
        w
    }

    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }

    fn u64s(&mut self, v: &[u64]) {
        self.u64(v.len() as u64);
        for &x in v {
            self.u64(x);
        }
    }

    fn limbs(&mut self, limbs: &[Vec<u64>]) {
        self.u32(limbs.len() as u32);
        self.u32(limbs.first().map_or(0, |l| l.len()) as u32);
        for l in limbs {
            for &x in l {
                self.u64(x);
            }
        }
    }

    fn poly(&mut self, p: &RingPoly) {
        self.u8(match p.domain {
            Domain::Coefficient => 0,
            Domain::Evaluation => 1,
        });
        self.limbs(&p.limbs);
    }

    fn ext(&mut self, e: &ExtPoly) {
        self.limbs(&e.main);
        self.limbs(&e.special);
    }

    fn ksk(&mut self, k: &KeySwitchKey) {
        self.u32(k.b.len() as u32);
        for (b, a) in k.b.iter().zip(&k.a) {
            self.ext(b);
            self.ext(a);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn corrupt(what: &str) -> Error {
    Error::Serialization(what.to_string())
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], tag: Tag) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
        if version != VERSION {
            return Err(Error::Serialization(format!("unsupported version {version}")));
        }
        let t = r.u8()?;
        if t != tag as u8 {
            return Err(Error::Serialization(format!(
                "type tag {t} where {} was expected",
                tag as u8
            )));
        }
        Ok(r)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or_else(|| corrupt("length overflow"))?;
        if end > self.buf.len() {
            return Err(corrupt("unexpected end of input"));
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| corrupt("length does not fit in usize"))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn u64s(&mut self) -> Result<Vec<u64>> {
        let n = self.usize()?;
        if n > (self.buf.len() - self.pos) / 8 {
            return Err(corrupt("unexpected end of input"));
        }
        (0..n).map(|_| self.u64()).collect()
    }

    fn limbs(&mut self) -> Result<Vec<Vec<u64>>> {
        let count = self.u32()? as usize;
        let n = self.u32()? as usize;
        let need = count.checked_mul(n).and_then(|x| x.checked_mul(8));
        if need.is_none_or(|b| b > self.buf.len() - self.pos) {
            return Err(corrupt("unexpected end of input"));
        }
        (0..count)
            .map(|_| (0..n).map(|_| self.u64()).collect())
            .collect()
    }

    fn poly(&mut self) -> Result<RingPoly> {
        let domain = match self.u8()? {
            0 => Domain::Coefficient,
            1 => Domain::Evaluation,
            d => return Err(Error::Serialization(format!("unknown domain {d}"))),
        };
        let limbs = self.limbs()?;
        if limbs.is_empty() {
            return Err(corrupt("polynomial without limbs"));
        }
        Ok(RingPoly { limbs, domain })
    }

    fn ext(&mut self) -> Result<ExtPoly> {
        Ok(ExtPoly {
            main: self.limbs()?,
            special: self.limbs()?,
        })
    }

    fn ksk(&mut self) -> Result<KeySwitchKey> {
        let digits = self.u32()? as usize;
        let mut b = Vec::new();
        let mut a = Vec::new();
        for _ in 0..digits {
            b.push(self.ext()?);
            a.push(self.ext()?);
        }
        Ok(KeySwitchKey { b, a })
    }

    fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(corrupt("trailing bytes"));
        }
        Ok(())
    }
}

fn check_poly(ctx: &CkksContext, p: &RingPoly) -> Result<()> {
    let ring = ctx.ring();
    if p.limbs.len() > ring.moduli().len() || p.ring_dim() != ring.ring_dim() {
        return Err(corrupt("polynomial shape does not match context"));
    }
    for (limb, m) in p.limbs.iter().zip(ring.moduli()) {
        if limb.iter().any(|&x| x >= m.value()) {
            return Err(corrupt("unreduced residue"));
        }
    }
    Ok(())
}

fn check_ext(ctx: &CkksContext, e: &ExtPoly) -> Result<()> {
    let ring = ctx.ring();
    let n = ring.ring_dim();
    if e.main.len() != ring.moduli().len() || e.special.len() != ring.special().len() {
        return Err(corrupt("key shape does not match context"));
    }
    let moduli = ring.moduli().iter().chain(ring.special());
    for (limb, m) in e.main.iter().chain(&e.special).zip(moduli) {
        if limb.len() != n || limb.iter().any(|&x| x >= m.value()) {
            return Err(corrupt("bad key limb"));
        }
    }
    Ok(())
}

fn check_ksk(ctx: &CkksContext, k: &KeySwitchKey) -> Result<()> {
    if k.b.len() != ctx.ring().chain().dnum {
        return Err(corrupt("digit count does not match context"));
    }
    k.b.iter().chain(&k.a).try_for_each(|e| check_ext(ctx, e))
}

fn check_id(ctx: &CkksContext, id: u64) -> Result<()> {
    if id != ctx.id() {
        return Err(Error::ContextMismatch);
    }
    Ok(())
}

pub fn context_to_bytes(ctx: &CkksContext) -> Vec<u8> {
    let p = ctx.params();
    let mut w = Writer::new(Tag::Context);
    w.u64(p.ring_dim as u64);
    w.u64(p.l_max as u64);
    w.u64(p.l_refresh as u64);
    w.u32(p.scale_bits);
    w.u32(p.first_mod_bits);
    w.u64(p.batch_size as u64);
    w.f64(p.sigma);
    match p.secret {
        SecretDistribution::UniformTernary => {
            w.u8(0);
            w.u64(0);
        }
        SecretDistribution::SparseTernary { hamming_weight } => {
            w.u8(1);
            w.u64(hamming_weight as u64);
        }
    }
    w.u64(p.dnum as u64);
    w.u8(p.insecure_simulated_bootstrap as u8);
    let chain = ctx.ring().chain();
    w.u64s(&chain.primes);
    w.u64s(&chain.special);
    w.u32(chain.first_bits);
    w.u32(chain.scale_bits);
    w.0
}

pub fn context_from_bytes(bytes: &[u8]) -> Result<CkksContext> {
    let mut r = Reader::new(bytes, Tag::Context)?;
    let ring_dim = r.usize()?;
    let l_max = r.usize()?;
    let l_refresh = r.usize()?;
    let scale_bits = r.u32()?;
    let first_mod_bits = r.u32()?;
    let batch_size = r.usize()?;
    let sigma = r.f64()?;
    let secret = match (r.u8()?, r.usize()?) {
        (0, _) => SecretDistribution::UniformTernary,
        (1, hamming_weight) => SecretDistribution::SparseTernary { hamming_weight },
        (t, _) => return Err(Error::Serialization(format!("unknown secret distribution {t}"))),
    };
    let dnum = r.usize()?;
    let insecure_simulated_bootstrap = match r.u8()? {
        0 => false,
        1 => true,
        _ => return Err(corrupt("bad flag")),
    };
    let primes = r.u64s()?;
    let special = r.u64s()?;
    let first_bits = r.u32()?;
    let chain_scale_bits = r.u32()?;
    r.finish()?;
    let params = CkksParams {
        ring_dim,
        l_max,
        l_refresh,
        scale_bits,
        first_mod_bits,
        batch_size,
        sigma,
        secret,
        dnum,
        insecure_simulated_bootstrap,
    };
    let chain = ModulusChain {
        primes,
        special,
        dnum,
        first_bits,
        scale_bits: chain_scale_bits,
    };
    CkksContext::with_chain(params, chain)
}

pub fn plaintext_to_bytes(pt: &CkksPlaintext) -> Vec<u8> {
    let mut w = Writer::new(Tag::Plaintext);
    w.u64(pt.ctx_id);
    w.f64(pt.scale);
    w.u64(pt.logical_len as u64);
    w.poly(&pt.poly);
    w.0
}

pub fn plaintext_from_bytes(ctx: &CkksContext, bytes: &[u8]) -> Result<CkksPlaintext> {
    let mut r = Reader::new(bytes, Tag::Plaintext)?;
    let ctx_id = r.u64()?;
    check_id(ctx, ctx_id)?;
    let scale = r.f64()?;
    let logical_len = r.usize()?;
    let poly = r.poly()?;
    r.finish()?;
    check_poly(ctx, &poly)?;
    Ok(CkksPlaintext {
        poly,
        scale,
        logical_len,
        ctx_id,
    })
}

pub fn ciphertext_to_bytes(ct: &CkksCiphertext) -> Vec<u8> {
    let mut w = Writer::new(Tag::Ciphertext);
    w.u64(ct.ctx_id);
    w.f64(ct.scale);
    w.u64(ct.logical_len as u64);
    w.poly(&ct.c0);
    w.poly(&ct.c1);
    w.0
}

pub fn ciphertext_from_bytes(ctx: &CkksContext, bytes: &[u8]) -> Result<CkksCiphertext> {
    let mut r = Reader::new(bytes, Tag::Ciphertext)?;
    let ctx_id = r.u64()?;
    check_id(ctx, ctx_id)?;
    let scale = r.f64()?;
    let logical_len = r.usize()?;
    let c0 = r.poly()?;
    let c1 = r.poly()?;
    r.finish()?;
    check_poly(ctx, &c0)?;
    check_poly(ctx, &c1)?;
    if c0.level() != c1.level() {
        return Err(Error::LevelMismatch(c0.level(), c1.level()));
    }
    Ok(CkksCiphertext {
        c0,
        c1,
        scale,
        logical_len,
        ctx_id,
    })
}

pub fn secret_key_to_bytes(ctx: &CkksContext, sk: &SecretKey) -> Vec<u8> {
    let mut w = Writer::new(Tag::SecretKey);
    w.u64(ctx.id());
    w.u64(sk.coeffs.len() as u64);
    for &c in &sk.coeffs {
        w.u64(c as u64);
    }
    w.0
}

pub fn secret_key_from_bytes(ctx: &CkksContext, bytes: &[u8]) -> Result<SecretKey> {
    let mut r = Reader::new(bytes, Tag::SecretKey)?;
    check_id(ctx, r.u64()?)?;
    let coeffs: Vec<i64> = r.u64s()?.into_iter().map(|c| c as i64).collect();
    r.finish()?;
    if coeffs.len() != ctx.ring_dim() || coeffs.iter().any(|c| !(-1..=1).contains(c)) {
        return Err(corrupt("secret key is not a ternary polynomial of the ring"));
    }
    Ok(SecretKey::from_coeffs(ctx, coeffs))
}

pub fn public_key_to_bytes(ctx: &CkksContext, pk: &PublicKey) -> Vec<u8> {
    let mut w = Writer::new(Tag::PublicKey);
    w.u64(ctx.id());
    w.poly(&pk.pk0);
    w.poly(&pk.pk1);
    w.0
}

pub fn public_key_from_bytes(ctx: &CkksContext, bytes: &[u8]) -> Result<PublicKey> {
    let mut r = Reader::new(bytes, Tag::PublicKey)?;
    check_id(ctx, r.u64()?)?;
    let pk0 = r.poly()?;
    let pk1 = r.poly()?;
    r.finish()?;
    check_poly(ctx, &pk0)?;
    check_poly(ctx, &pk1)?;
    Ok(PublicKey { pk0, pk1 })
}

pub fn relin_key_to_bytes(ctx: &CkksContext, rlk: &RelinKey) -> Vec<u8> {
    let mut w = Writer::new(Tag::RelinKey);
    w.u64(ctx.id());
    w.ksk(&rlk.0);
    w.0
}

pub fn relin_key_from_bytes(ctx: &CkksContext, bytes: &[u8]) -> Result<RelinKey> {
    let mut r = Reader::new(bytes, Tag::RelinKey)?;
    check_id(ctx, r.u64()?)?;
    let k = r.ksk()?;
    r.finish()?;
    check_ksk(ctx, &k)?;
    Ok(RelinKey(k))
}

pub fn rot_keys_to_bytes(ctx: &CkksContext, keys: &RotKeySet) -> Vec<u8> {
    let mut w = Writer::new(Tag::RotKeys);
    w.u64(ctx.id());
    w.u64(keys.keys.len() as u64);
    for (&g, k) in &keys.keys {
        w.u64(g);
        w.ksk(k);
    }
    w.0
}

pub fn rot_keys_from_bytes(ctx: &CkksContext, bytes: &[u8]) -> Result<RotKeySet> {
    let mut r = Reader::new(bytes, Tag::RotKeys)?;
    check_id(ctx, r.u64()?)?;
    let count = r.usize()?;
    let mut keys = BTreeMap::new();
    for _ in 0..count {
        let g = r.u64()?;
        let k = r.ksk()?;
        check_ksk(ctx, &k)?;
        keys.insert(g, k);
    }
    r.finish()?;
    Ok(RotKeySet { keys })
}
