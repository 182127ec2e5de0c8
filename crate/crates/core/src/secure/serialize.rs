//! Byte format for secure arrays: `"HSAR"`, `u16` version, `u8` kind
//! (1 vector, 2 matrix), `u8` payload (0 plain, 1 cipher), then `u64`
//! len, nrows, ncols, capacity. Plain payloads continue with the `u64` level
//! and `capacity` little-endian `f64` slots; cipher payloads with a `u64`
//! byte count and a ciphertext record from [`crate::ckks::serialize`].

use super::{Packed, Payload, SecureArithmetic, SecureMatrix, SecureVector};
use crate::ckks::serialize::{ciphertext_from_bytes, ciphertext_to_bytes};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"HSAR";
pub const VERSION: u16 = 1;

const KIND_VECTOR: u8 = 1;
const KIND_MATRIX: u8 = 2;

fn write(kind: u8, p: &Packed, nrows: usize, ncols: usize) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(kind);
    out.push(matches!(p.payload, Payload::Cipher(_)) as u8);
    for v in [p.len, nrows, ncols, p.capacity] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    match &p.payload {
        Payload::Plain { data, level } => {
            out.extend_from_slice(&(*level as u64).to_le_bytes());
            for v in data {
                out.extend_from_slice(&v.to_bits().to_le_bytes());
            }
        }
        Payload::Cipher(ct) => {
            let b = ciphertext_to_bytes(ct);
            out.extend_from_slice(&(b.len() as u64).to_le_bytes());
            out.extend_from_slice(&b);
        }
    }
    out
}

struct Cursor<'a>(&'a [u8]);

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.0.len() < n {
            return Err(Error::Serialization("truncated secure array".into()));
        }
        let (h, t) = self.0.split_at(n);
        self.0 = t;
        Ok(h)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Serialization("length overflow".into()))
    }
}

fn read(sa: &SecureArithmetic, bytes: &[u8], kind: u8) -> Result<(Packed, usize, usize)> {
    let mut c = Cursor(bytes);
    if c.take(4)? != MAGIC {
        return Err(Error::Serialization("bad magic".into()));
    }
    let version = u16::from_le_bytes(c.take(2)?.try_into().expect("2 bytes"));
    if version != VERSION {
        return Err(Error::Serialization(format!("unsupported version {version}")));
    }
    if c.take(1)?[0] != kind {
        return Err(Error::Serialization("unexpected array kind".into()));
    }
    let cipher = match c.take(1)?[0] {
        0 => false,
        1 => true,
        t => return Err(Error::Serialization(format!("unknown payload tag {t}"))),
    };
    let (len, nrows, ncols, capacity) = (c.usize()?, c.usize()?, c.usize()?, c.usize()?);
    if capacity != sa.capacity() || len == 0 || len > capacity || nrows.checked_mul(ncols) != Some(len) {
        return Err(Error::Serialization("inconsistent shape header".into()));
    }
    let payload = match (cipher, sa.context()) {
        (false, None) => {
            let level = c.usize()?;
            if level > sa.l_max() {
                return Err(Error::Serialization(format!("level {level} exceeds l_max")));
            }
            let data = (0..capacity)
                .map(|_| c.u64().map(f64::from_bits))
                .collect::<Result<Vec<_>>>()?;
            Payload::Plain { data, level }
        }
        (true, Some(ctx)) => {
            let n = c.usize()?;
            Payload::Cipher(ciphertext_from_bytes(ctx, c.take(n)?)?)
        }
        _ => return Err(Error::ContextMismatch),
    };
    if !c.0.is_empty() {
        return Err(Error::Serialization("trailing bytes".into()));
    }
    Ok((
        Packed {
            payload,
            len,
            capacity,
        },
        nrows,
        ncols,
    ))
}

pub fn vector_to_bytes(x: &SecureVector) -> Vec<u8> {
    write(KIND_VECTOR, &x.inner, x.inner.len, 1)
}

pub fn vector_from_bytes(sa: &SecureArithmetic, bytes: &[u8]) -> Result<SecureVector> {
    let (inner, _, _) = read(sa, bytes, KIND_VECTOR)?;
    Ok(SecureVector { inner })
}

pub fn matrix_to_bytes(x: &SecureMatrix) -> Vec<u8> {
    write(KIND_MATRIX, &x.inner, x.nrows, x.ncols)
}

pub fn matrix_from_bytes(sa: &SecureArithmetic, bytes: &[u8]) -> Result<SecureMatrix> {
    let (inner, nrows, ncols) = read(sa, bytes, KIND_MATRIX)?;
    Ok(SecureMatrix { inner, nrows, ncols })
}
