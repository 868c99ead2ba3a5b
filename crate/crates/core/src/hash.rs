//! Carter–Wegman hashing of grid corners.
//!
//! A corner is identified by its integer index vector `k` on a level's grid.
//! `H(k) = (b + Σ a_i·k_i) mod p` with `p = 2^61 − 1`, truncated to the low `w`
//! bits. Coefficients for level `ℓ` are derived from a single stored seed, so
//! the hash description costs 64 bits regardless of the number of levels.

use crate::rng::{derive, tag};

pub const MERSENNE_61: u64 = (1 << 61) - 1;

/// Hash widths are capped by the field size.
pub const MAX_WIDTH: u32 = 61;

#[inline]
fn reduce(x: u128) -> u64 {
    let lo = (x as u64) & MERSENNE_61;
    let hi = (x >> 61) as u64;
    let s = lo + (hi & MERSENNE_61) + (hi >> 61);
    let s = (s & MERSENNE_61) + (s >> 61);
    if s >= MERSENNE_61 {
        s - MERSENNE_61
    } else {
        s
    }
}

#[inline]
fn add_mod(a: u64, b: u64) -> u64 {
    let s = a + b;
    if s >= MERSENNE_61 {
        s - MERSENNE_61
    } else {
        s
    }
}

#[inline]
fn mul_mod(a: u64, b: u64) -> u64 {
    reduce(a as u128 * b as u128)
}

#[inline]
fn to_field(k: i64) -> u64 {
    k.rem_euclid(MERSENNE_61 as i64) as u64
}

/// The family description: output width and one seed for all levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashSpec {
    pub width: u32,
    pub seed: u64,
}

impl HashSpec {
    pub fn new(width: u32, seed: u64) -> Self {
        assert!((1..=MAX_WIDTH).contains(&width), "hash width {width} out of range");
        HashSpec { width, seed }
    }

    /// `⌈d·log2 9 + log2(L_top + 1) + log2(q/δ)⌉`, capped at [`MAX_WIDTH`].
    pub fn default_width(d: usize, top_level: i32, q: usize, delta: f64) -> u32 {
        let bits = d as f64 * 9f64.log2()
            + ((top_level + 1) as f64).log2()
            + (q as f64 / delta).log2();
        (bits.ceil().max(1.0) as u32).min(MAX_WIDTH)
    }

    pub fn level(&self, level: i32, d: usize) -> LevelHash {
        let base = derive(self.seed, &[tag::HASH, level as u64]);
        let coeff = (0..d)
            .map(|i| derive(base, &[i as u64]) % MERSENNE_61)
            .collect();
        LevelHash {
            coeff,
            offset: derive(base, &[u64::MAX]) % MERSENNE_61,
            mask: if self.width >= 64 {
                u64::MAX
            } else {
                (1u64 << self.width) - 1
            },
        }
    }
}

/// `H_ℓ` materialized for one level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelHash {
    coeff: Vec<u64>,
    offset: u64,
    mask: u64,
}

impl LevelHash {
    pub fn hash(&self, idx: &[i64]) -> u64 {
        let acc = idx
            .iter()
            .enumerate()
            .fold(0, |acc, (axis, &k)| self.step(acc, axis, k));
        self.finish(acc)
    }

    /// Adds the contribution of `k` on `axis` to a partial sum.
    #[inline]
    pub fn step(&self, acc: u64, axis: usize, k: i64) -> u64 {
        add_mod(acc, mul_mod(self.coeff[axis], to_field(k)))
    }

    #[inline]
    pub fn finish(&self, acc: u64) -> u64 {
        add_mod(acc, self.offset) & self.mask
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduction_matches_u128_modulo() {
        let mut x = 0x1234_5678_9abc_def0u64;
        for _ in 0..10_000 {
            x = crate::rng::mix64(x);
            let y = crate::rng::mix64(x) % MERSENNE_61;
            let a = x % MERSENNE_61;
            let want = ((a as u128 * y as u128) % MERSENNE_61 as u128) as u64;
            assert_eq!(mul_mod(a, y), want);
        }
        assert_eq!(reduce(MERSENNE_61 as u128), 0);
        assert_eq!(to_field(-1), MERSENNE_61 - 1);
    }

    #[test]
    fn deterministic_and_level_dependent() {
        let spec = HashSpec::new(20, 42);
        let a = spec.level(3, 4);
        let b = spec.level(3, 4);
        let c = spec.level(4, 4);
        let k = [1, 7, 0, 13];
        assert_eq!(a.hash(&k), b.hash(&k));
        assert_ne!(a.coeff, c.coeff);
        assert!(a.hash(&k) < 1 << 20);
    }

    #[test]
    fn collision_rate_is_near_uniform() {
        // Pairs of distinct small vectors collide with probability ≈ 2^-w.
        let w = 8;
        let mut collisions = 0;
        let trials = 4000;
        for s in 0..trials {
            let h = HashSpec::new(w, s).level(0, 3);
            if h.hash(&[1, 2, 3]) == h.hash(&[2, 2, 3]) {
                collisions += 1;
            }
        }
        let rate = collisions as f64 / trials as f64;
        assert!(rate < 3.0 / 256.0, "rate {rate}");
    }

    #[test]
    fn default_width_formula() {
        // d=6, L_top=13, q=16, δ=0.1: 6·3.1699 + 3.807 + 7.322 = 30.15
        assert_eq!(HashSpec::default_width(6, 13, 16, 0.1), 31);
        assert_eq!(HashSpec::default_width(40, 20, 16, 0.1), MAX_WIDTH);
    }
}
