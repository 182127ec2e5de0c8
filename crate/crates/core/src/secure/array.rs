use crate::ckks::CkksCiphertext;

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// Plain slots (length = capacity) with a virtual level.
    Plain { data: Vec<f64>, level: usize },
    Cipher(CkksCiphertext),
}

impl Payload {
    pub fn level(&self) -> usize {
        match self {
            Payload::Plain { level, .. } => *level,
            Payload::Cipher(ct) => ct.level(),
        }
    }
}

/// Slot payload plus logical length and capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct Packed {
    pub(crate) payload: Payload,
    pub(crate) len: usize,
    pub(crate) capacity: usize,
}

impl Packed {
    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    pub fn level(&self) -> usize {
        self.payload.level()
    }

    pub(crate) fn with_payload(&self, payload: Payload) -> Packed {
        Packed {
            payload,
            len: self.len,
            capacity: self.capacity,
        }
    }
}

/// Shared surface of [`SecureVector`] and [`SecureMatrix`] for element-wise
/// operations.
pub trait SecureArray: Clone {
    fn packed(&self) -> &Packed;
    fn with_packed(&self, packed: Packed) -> Self;
    /// `(nrows, ncols)`; vectors report `(len, 1)`.
    fn shape(&self) -> (usize, usize);

    fn level(&self) -> usize {
        self.packed().level()
    }

    fn capacity(&self) -> usize {
        self.packed().capacity
    }

    fn is_encrypted(&self) -> bool {
        matches!(self.packed().payload, Payload::Cipher(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecureVector {
    pub(crate) inner: Packed,
}

impl SecureVector {
    pub fn len(&self) -> usize {
        self.inner.len
    }

    pub fn is_empty(&self) -> bool {
        self.inner.len == 0
    }
}

impl SecureArray for SecureVector {
    fn packed(&self) -> &Packed {
        &self.inner
    }

    fn with_packed(&self, packed: Packed) -> Self {
        SecureVector { inner: packed }
    }

    fn shape(&self) -> (usize, usize) {
        (self.inner.len, 1)
    }
}

/// Column-major matrix: element `(i, j)` lives in slot `j·nrows + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecureMatrix {
    pub(crate) inner: Packed,
    pub(crate) nrows: usize,
    pub(crate) ncols: usize,
}

impl SecureMatrix {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }
}

impl SecureArray for SecureMatrix {
    fn packed(&self) -> &Packed {
        &self.inner
    }

    fn with_packed(&self, packed: Packed) -> Self {
        SecureMatrix {
            inner: packed,
            nrows: self.nrows,
            ncols: self.ncols,
        }
    }

    fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }
}

/// Column-major flattening of row-major `rows`.
pub fn pack_column_major(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    let mut out = vec![0.0; n * m];
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            out[j * n + i] = v;
        }
    }
    out
}

/// Inverse of [`pack_column_major`].
pub fn unpack_column_major(data: &[f64], nrows: usize, ncols: usize) -> Vec<Vec<f64>> {
    (0..nrows)
        .map(|i| (0..ncols).map(|j| data[j * nrows + i]).collect())
        .collect()
}
