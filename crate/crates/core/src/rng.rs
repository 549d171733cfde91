//! Counter-based random streams.
//!
//! Every stream is a SplitMix64 counter keyed by a hash of
//! `(seed, pixel, frame, purpose)`, so any pass can derive its own
//! decorrelated sequence without sharing mutable generator state.

use rand_core::{impls, RngCore};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a list of words into a single 64-bit key.
pub fn hash_words(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0x6A09_E667_F3BC_C909, |h, &w| mix64(h ^ mix64(w.wrapping_add(GOLDEN))))
}

/// Purpose tags used to split streams between passes of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Camera = 1,
    LightSelect = 2,
    LightPoint = 3,
    ShadowTargets = 4,
    WorldSamples = 5,
    ScreenSamples = 6,
    Init = 7,
    Spatial = 8,
    Temporal = 9,
    Reference = 10,
    Clustering = 11,
    Test = 12,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: mix64(seed ^ 0xD1B5_4A32_D192_ED03) }
    }

    /// Independent stream for one `(pixel, frame, purpose)` triple.
    pub fn stream(seed: u64, pixel: u64, frame: u64, purpose: Purpose) -> Self {
        Rng { state: hash_words(&[seed, pixel, frame, purpose as u64]) }
    }

    /// Derives a child stream without advancing `self`.
    pub fn fork(&self, tag: u64) -> Self {
        Rng { state: hash_words(&[self.state, tag]) }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn uniform_f32(&mut self) -> f32 {
        (self.next_u64() >> 40) as f32 * (1.0 / (1u32 << 24) as f32)
    }

    /// Uniform integer in `[0, n)`; `n` must be nonzero.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Lemire's multiply-shift; bias is < 2^-32 for the sizes used here
        (((self.next_u64() >> 32) * n as u64) >> 32) as usize
    }

    #[inline]
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        (Rng::next_u64(self) >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        Rng::next_u64(self)
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        impls::fill_bytes_via_next(self, dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand_core::Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sequence() {
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn streams_differ_by_key() {
        let a = Rng::stream(1, 10, 0, Purpose::Camera).next_u64();
        let b = Rng::stream(1, 11, 0, Purpose::Camera).next_u64();
        let c = Rng::stream(1, 10, 1, Purpose::Camera).next_u64();
        let d = Rng::stream(1, 10, 0, Purpose::LightSelect).next_u64();
        assert!(a != b && a != c && a != d && b != c);
    }

    #[test]
    fn uniform_in_unit_interval_with_right_mean() {
        let mut r = Rng::new(7);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
            sum += u;
        }
        assert!((sum / n as f64 - 0.5).abs() < 0.005);
    }

    #[test]
    fn below_covers_range() {
        let mut r = Rng::new(3);
        let mut seen = [0usize; 7];
        for _ in 0..7000 {
            seen[r.below(7)] += 1;
        }
        assert!(seen.iter().all(|&c| c > 800 && c < 1200), "{seen:?}");
    }
}
