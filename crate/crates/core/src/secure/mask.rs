use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use crate::ckks::CkksContext;
use crate::Result;

/// Index pattern of a {0,1} mask: ones at `j·period + i` for
/// `i ∈ [first, last)` and `j ∈ [0, count)`, zeros elsewhere in `capacity`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MaskKey {
    pub first: usize,
    pub last: usize,
    pub period: usize,
    pub count: usize,
    pub capacity: usize,
}

impl MaskKey {
    /// Ones on `[first, last)` only.
    pub fn range(first: usize, last: usize, capacity: usize) -> Self {
        Self {
            first,
            last,
            period: last.max(1),
            count: 1,
            capacity,
        }
    }

    /// Rows `[first, last)` of every one of `ncols` columns of height `nrows`.
    pub fn rows(first: usize, last: usize, nrows: usize, ncols: usize, capacity: usize) -> Self {
        Self {
            first,
            last,
            period: nrows,
            count: ncols,
            capacity,
        }
    }

    pub fn build(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.capacity];
        for j in 0..self.count {
            for i in self.first..self.last {
                m[j * self.period + i] = 1.0;
            }
        }
        m
    }
}

#[derive(Debug)]
pub struct Mask {
    values: Vec<f64>,
    coeffs: OnceLock<Vec<f64>>,
}

impl Mask {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Canonical-embedding preimage, computed on first use and reused at
    /// every level.
    pub fn coeffs(&self, ctx: &CkksContext) -> Result<&[f64]> {
        if let Some(c) = self.coeffs.get() {
            return Ok(c);
        }
        let c = ctx.embed_values(&self.values)?;
        Ok(self.coeffs.get_or_init(|| c))
    }
}

/// Memo of masks keyed by index pattern. Read-mostly; safe to share.
#[derive(Debug, Default)]
pub struct MaskCache {
    inner: RwLock<HashMap<MaskKey, Arc<Mask>>>,
}

impl MaskCache {
    pub fn get(&self, key: MaskKey) -> Arc<Mask> {
        if let Some(m) = self.inner.read().expect("mask cache poisoned").get(&key) {
            return m.clone();
        }
        let mut w = self.inner.write().expect("mask cache poisoned");
        w.entry(key)
            .or_insert_with(|| {
                Arc::new(Mask {
                    values: key.build(),
                    coeffs: OnceLock::new(),
                })
            })
            .clone()
    }

    pub fn len(&self) -> usize {
        self.inner.read().expect("mask cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
