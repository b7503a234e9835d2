//! Deterministic 64-bit randomness for everything in the crate.
//!
//! All stochastic code derives its stream from explicit 64-bit seeds through
//! one finalizer, so any quantity (an edge weight, a replicate, a sweep record)
//! is addressable by a counter and reproducible bit-for-bit from the seed alone.

/// SplitMix64 finalizer (Stafford variant 13). Bijective on u64.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a base seed and a list of stream coordinates.
/// Folding left-to-right keeps distinct coordinate tuples on distinct streams.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut s = mix64(base);
    for &p in parts {
        s = mix64(s ^ mix64(p.wrapping_add(0x9e3779b97f4a7c15)));
    }
    s
}

/// SplitMix64 sequence generator.
#[derive(Debug, Clone)]
pub struct Rng64 {
    state: u64,
}

impl Rng64 {
    pub fn new(seed: u64) -> Self {
        Rng64 { state: seed }
    }

    /// Child generator for stream `index`, independent of `self`'s position.
    pub fn fork(&self, index: u64) -> Self {
        Rng64::new(derive_seed(self.state, &[index]))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform on the half-open interval (0, 1]: never 0, so ln is finite.
    #[inline]
    pub fn next_unit_open(&mut self) -> f64 {
        (((self.next_u64() >> 11) + 1) as f64) * (1.0 / 9007199254740992.0)
    }

    /// Uniform on [0, 1).
    #[inline]
    pub fn next_unit(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64) * (1.0 / 9007199254740992.0)
    }

    /// Uniform integer in [0, bound). Lemire rejection; unbiased.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        loop {
            let x = self.next_u64();
            let m = (x as u128).wrapping_mul(bound as u128);
            let lo = m as u64;
            if lo >= bound || lo >= (u64::MAX - bound + 1) % bound {
                return (m >> 64) as u64;
            }
        }
    }

    /// Exponential with the given mean, by inversion.
    #[inline]
    pub fn next_exp(&mut self, mean: f64) -> f64 {
        -mean * self.next_unit_open().ln()
    }
}

/// Exponential weight of a single stream element: the weight of counter `index`
/// under `seed` is a pure function of both, independent of draw order.
#[inline]
pub fn exp_at(seed: u64, index: u64, mean: f64) -> f64 {
    let h = mix64(seed ^ mix64(index.wrapping_add(0x9e3779b97f4a7c15)));
    let u = (((h >> 11) + 1) as f64) * (1.0 / 9007199254740992.0);
    -mean * u.ln()
}
