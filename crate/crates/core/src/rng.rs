//! Counter-based random streams.
//!
//! Every photon draws from its own stream keyed by `(seed, photon index)`.
//! Output `i` of a stream is a pure function of the key and `i`, so a
//! campaign produces the same trajectories no matter how photons are
//! scheduled across workers.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline(always)]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// SplitMix64 evaluated at an explicit counter.
#[derive(Debug, Clone)]
pub struct PhotonRng {
    key: u64,
    counter: u64,
}

impl PhotonRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        // Two rounds of mixing decorrelate adjacent stream indices.
        let key = mix64(mix64(seed ^ 0x6A09_E667_F3BC_C908) ^ mix64(stream.wrapping_add(GOLDEN_GAMMA)));
        Self { key, counter: 0 }
    }

    #[inline(always)]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    #[inline(always)]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]`; safe to feed into `ln`.
    #[inline(always)]
    pub fn uniform_open_zero(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Number of draws consumed so far.
    pub fn draws(&self) -> u64 {
        self.counter
    }
}
