use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Domain, RingContext, RingPoly};

/// Gaussian samples beyond this many standard deviations are redrawn.
pub const ERROR_TAIL_CUT: f64 = 6.0;

impl RingContext {
    /// Independent uniform residues in every limb, i.e. uniform modulo `Q_level`.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, level: usize, rng: &mut R) -> RingPoly {
        let limbs = self.moduli()[..=level]
            .iter()
            .map(|m| (0..self.ring_dim()).map(|_| rng.gen_range(0..m.value())).collect())
            .collect();
        RingPoly {
            limbs,
            domain: Domain::Coefficient,
        }
    }

    /// Uniform ternary coefficients in `{-1, 0, 1}`.
    pub fn sample_ternary<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<i64> {
        (0..self.ring_dim()).map(|_| rng.gen_range(-1i64..=1)).collect()
    }

    /// Ternary coefficients with exactly `hamming_weight` nonzero entries.
    pub fn sample_sparse_ternary<R: Rng + ?Sized>(&self, hamming_weight: usize, rng: &mut R) -> Vec<i64> {
        let n = self.ring_dim();
        let mut out = vec![0i64; n];
        for i in index::sample(rng, n, hamming_weight.min(n)) {
            out[i] = if rng.gen::<bool>() { 1 } else { -1 };
        }
        out
    }

    /// Rounded centered Gaussian with standard deviation `sigma`, tail-cut at
    /// [`ERROR_TAIL_CUT`] standard deviations.
    pub fn sample_error<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> Vec<i64> {
        if sigma <= 0.0 {
            return vec![0; self.ring_dim()];
        }
        let normal = Normal::new(0.0, sigma).expect("sigma is positive and finite");
        let bound = ERROR_TAIL_CUT * sigma;
        (0..self.ring_dim())
            .map(|_| loop {
                let x: f64 = normal.sample(rng);
                if x.abs() <= bound {
                    break x.round() as i64;
                }
            })
            .collect()
    }
}
