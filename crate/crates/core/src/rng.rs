//! Seeded randomness.
//!
//! All streams are SplitMix64 (Steele, Lea & Flood 2014): state advances by
//! `0x9E3779B97F4A7C15`, output is mixed with multipliers
//! `0xBF58476D1CE4E5B9` and `0x94D049BB133111EB` and shifts 30/27/31.
//! A uniform double is `(next_u64() >> 11) * 2^-53`.  Sub-streams for batch
//! `k` of a run seeded with `s` are seeded with the first output of a
//! SplitMix64 stream started at `s ^ (k * 0xD1B54A32D192ED03)`.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

#[derive(Debug, Clone)]
pub struct Rng(SplitMix64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(SplitMix64::seed_from_u64(seed))
    }

    /// Independent stream for batch `index` of a run seeded with `seed`.
    pub fn substream(seed: u64, index: u64) -> Self {
        let mut mixer = Rng::new(seed ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03));
        Rng::new(mixer.next_u64())
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in [0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via Box–Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform index below `n` (n > 0).
    pub fn below(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// Latin-hypercube points inside the box `domain`, strictly interior.
pub fn stratified_points(domain: &[[f64; 2]], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = Rng::new(seed);
    let mut coords: Vec<Vec<f64>> = Vec::with_capacity(domain.len());
    for &[a, b] in domain {
        let mut strata: Vec<usize> = (0..count).collect();
        rng.shuffle(&mut strata);
        let col = strata
            .into_iter()
            .map(|k| {
                let u = (k as f64 + 0.05 + 0.9 * rng.uniform()) / count as f64;
                a + (b - a) * u
            })
            .collect();
        coords.push(col);
    }
    (0..count)
        .map(|j| coords.iter().map(|c| c[j]).collect())
        .collect()
}
