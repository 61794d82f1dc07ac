//! Counter-based deterministic random numbers.
//!
//! Every random draw in the library is a pure function of
//! `(seed, stream, counter)`, so ensembles parallelise without
//! synchronisation and any path can be regenerated in isolation.  The
//! generator applies the splitmix64 finalizer to a keyed counter; the
//! finalizer is a bijection on 64-bit words with good equidistribution, which
//! is sufficient statistical quality for Monte Carlo use here.

/// Golden-ratio increment used to decorrelate consecutive counters.
const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// splitmix64 finalizer: bijective avalanche mixing of a 64-bit word.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stateless keyed generator: draw `i` of stream `(seed, stream)` is
/// `mix64(key + i * GOLDEN)`.
#[derive(Debug, Clone, Copy)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    /// Create the generator for a given seed and stream index
    /// (streams with distinct indices are statistically independent).
    pub fn new(seed: u64, stream: u64) -> Self {
        // Two mixing rounds separate the seed and stream contributions.
        let key = mix64(mix64(seed ^ GOLDEN).wrapping_add(stream.wrapping_mul(GOLDEN)));
        Self { key }
    }

    /// Raw 64-bit draw for counter `i`.
    #[inline]
    pub fn word(&self, i: u64) -> u64 {
        mix64(self.key.wrapping_add(i.wrapping_mul(GOLDEN)))
    }

    /// Uniform draw in the open interval `(0, 1)` (53-bit resolution,
    /// centred on half-ulp offsets so 0 and 1 are unreachable).
    #[inline]
    pub fn uniform(&self, i: u64) -> f64 {
        ((self.word(i) >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Standard normal draw for counter `i` via Box-Muller.
    ///
    /// Each gaussian consumes the uniform pair `(2i, 2i+1)`, so mixed
    /// uniform/gaussian use of one stream must partition counters.
    #[inline]
    pub fn gaussian(&self, i: u64) -> f64 {
        let u = self.uniform(2 * i);
        let v = self.uniform(2 * i + 1);
        (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    }

    /// Fill a slice with standard normals starting at gaussian counter
    /// `start` (draw `j` of the slice uses counter `start + j`).
    pub fn gaussian_fill(&self, start: u64, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.gaussian(start + j as u64);
        }
    }
}
