//! Reproducible randomness. Every stochastic component draws from a
//! [`SeededRng`], a ChaCha20 stream keyed from a 64-bit seed, so identical
//! seeds give identical streams on every platform.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

#[derive(Clone, Debug)]
pub struct SeededRng(ChaCha20Rng);

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng(ChaCha20Rng::seed_from_u64(seed))
    }

    pub fn from_key(key: [u8; 32]) -> Self {
        SeededRng(ChaCha20Rng::from_seed(key))
    }

    /// Independent child stream, e.g. one per subject or per layer.
    pub fn fork(&mut self) -> SeededRng {
        SeededRng::new(self.next_u64())
    }

    pub fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform index in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.0.random_range(0..n)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chacha20_zero_key_reference_block() {
        // Published ChaCha20 keystream for the all-zero key and nonce:
        // 76 b8 e0 ad a0 f1 3d 90 40 5d 6a e5 53 86 bd 28 ...
        let mut rng = SeededRng::from_key([0u8; 32]);
        assert_eq!(rng.next_u32(), 0xade0_b876);
        assert_eq!(rng.next_u32(), 0x903d_f1a0);
        assert_eq!(rng.next_u32(), 0xe56a_5d40);
        assert_eq!(rng.next_u32(), 0x28bd_8653);
    }

    #[test]
    fn golden_seeded_stream() {
        let mut rng = SeededRng::new(42);
        let got: Vec<u64> = (0..3).map(|_| rng.next_u64()).collect();
        assert_eq!(got, GOLDEN_SEED_42);
    }

    // Frozen reference stream; a change here breaks every stored seed.
    const GOLDEN_SEED_42: [u64; 3] =
        [9_482_535_800_248_027_256, 7_566_832_397_956_113_305, 1_804_347_359_131_428_821];

    #[test]
    fn golden_normal_draws() {
        let mut rng = SeededRng::new(42);
        let got: Vec<u64> = (0..2).map(|_| rng.normal().to_bits()).collect();
        assert_eq!(got, GOLDEN_NORMAL_42);
    }

    const GOLDEN_NORMAL_42: [u64; 2] = [4_586_599_339_267_580_678, 13_821_389_916_875_028_419];

    #[test]
    fn same_seed_same_stream() {
        let mut a = SeededRng::new(7);
        let mut b = SeededRng::new(7);
        for _ in 0..100 {
            assert_eq!(a.normal().to_bits(), b.normal().to_bits());
        }
    }
}
