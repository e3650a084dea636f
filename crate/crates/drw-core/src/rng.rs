//! Deterministic RNG with cheap derived substreams.
//!
//! The simulation must replay bit-identically from a root seed regardless of
//! platform or evaluation order, so every node gets its own stream derived
//! from `(seed, stream labels...)` and advanced only by that node. SplitMix64
//! is portable, fast, and passes BigCrush for this kind of workload. Not
//! cryptographic.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A single substream. Cloning forks an identical replay.
#[derive(Clone, Debug)]
pub struct SimRng {
    state: u64,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Derive a substream from the root seed and a list of labels
    /// (e.g. node id, color, binary-search iteration). Label order matters.
    pub fn from_parts(seed: u64, labels: &[u64]) -> Self {
        let mut state = seed;
        // one mixing round per label keeps distinct label tuples distinct
        for &l in labels {
            let mut s = state ^ l.wrapping_mul(GOLDEN);
            state = splitmix64(&mut s);
        }
        Self { state }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        splitmix64(&mut self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[0, n)`.
    #[inline]
    pub fn next_range(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    /// Exponential with mean `1/rate`.
    pub fn next_exp(&mut self, rate: f64) -> f64 {
        let u = self.next_f64();
        -(1.0 - u).ln() / rate
    }

    /// Pick an index with probability proportional to `weights[i]`.
    /// `total` must equal the sum of the weights.
    #[inline]
    pub fn pick_weighted(&mut self, weights: &[f64], total: f64) -> usize {
        let mut target = self.next_f64() * total;
        for (i, &w) in weights.iter().enumerate() {
            target -= w;
            if target < 0.0 {
                return i;
            }
        }
        weights.len() - 1
    }
}
