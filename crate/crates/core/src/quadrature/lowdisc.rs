//! Randomly shifted `R_d` (generalized golden ratio) sequence in fixed point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::MAX_DIM;

const TWO_POW_64: f64 = 18_446_744_073_709_551_616.0;

/// Points `frac(shift + i·α)` in `[0,1)^d` with `α_j = φ_d^{−(j+1)}`, where
/// `φ_d` is the positive root of `x^{d+1} = x + 1`.
#[derive(Clone, Debug)]
pub struct RdSequence {
    dim: usize,
    step: [u64; MAX_DIM],
    shift: [u64; MAX_DIM],
}

impl RdSequence {
    /// Sequence whose Cranley–Patterson shift is drawn from `key`.
    pub fn new(dim: usize, key: u64) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension out of range");
        let phi = plastic_root(dim);
        let mut step = [0u64; MAX_DIM];
        let mut inv = 1.0;
        for s in step.iter_mut().take(dim) {
            inv /= phi;
            *s = (inv.fract() * TWO_POW_64) as u64;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let mut shift = [0u64; MAX_DIM];
        for s in shift.iter_mut().take(dim) {
            *s = rng.gen();
        }
        Self { dim, step, shift }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes the `i`-th point into `out[..dim]`.
    #[inline]
    pub fn point(&self, i: u64, out: &mut [f64]) {
        for ((o, &shift), &step) in out[..self.dim].iter_mut().zip(&self.shift).zip(&self.step) {
            let v = shift.wrapping_add(step.wrapping_mul(i));
            *o = (v >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        }
    }
}

fn plastic_root(d: usize) -> f64 {
    let mut x = 2.0f64;
    for _ in 0..64 {
        let f = x.powi(d as i32 + 1) - x - 1.0;
        let df = (d as f64 + 1.0) * x.powi(d as i32) - 1.0;
        x -= f / df;
    }
    x
}

/// Deterministic 64-bit key from a seed and a list of words.
pub fn mix_key(seed: u64, words: impl IntoIterator<Item = u64>) -> u64 {
    words.into_iter().fold(splitmix(seed), |h, w| splitmix(h ^ w))
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_ratio_in_one_dimension() {
        assert!((plastic_root(1) - 1.618033988749895).abs() < 1e-14);
        assert!((plastic_root(2) - 1.324717957244746).abs() < 1e-14);
    }

    #[test]
    fn points_are_in_unit_cube_and_reproducible() {
        let a = RdSequence::new(3, 42);
        let b = RdSequence::new(3, 42);
        let mut p = [0.0; 3];
        let mut q = [0.0; 3];
        for i in 0..1000 {
            a.point(i, &mut p);
            b.point(i, &mut q);
            assert_eq!(p, q);
            assert!(p.iter().all(|&v| (0.0..1.0).contains(&v)));
        }
        let c = RdSequence::new(3, 43);
        c.point(0, &mut q);
        a.point(0, &mut p);
        assert_ne!(p, q);
    }

    #[test]
    fn low_discrepancy_mean_of_smooth_integrand() {
        // ∫ x y over the unit square = 1/4
        let seq = RdSequence::new(2, 7);
        let n = 1 << 14;
        let mut p = [0.0; 2];
        let mut acc = 0.0;
        for i in 0..n {
            seq.point(i, &mut p);
            acc += p[0] * p[1];
        }
        assert!((acc / n as f64 - 0.25).abs() < 2e-4);
    }

    #[test]
    fn keys_depend_on_every_word() {
        assert_ne!(mix_key(1, [2, 3]), mix_key(1, [3, 2]));
        assert_ne!(mix_key(1, [2]), mix_key(2, [2]));
        assert_eq!(mix_key(5, [8, 9]), mix_key(5, [8, 9]));
    }
}
