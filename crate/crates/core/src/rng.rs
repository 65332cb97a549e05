//! Counter-based deterministic random streams.
//!
//! A stream is addressed by `(seed, label, index)`. Draws are produced by
//! mixing the stream id with an incrementing counter, so any stream can be
//! regenerated in isolation: sampling curve 7 of a dataset never depends on
//! whether curves 0..6 were sampled first, which keeps parallel generation
//! bit-identical to serial generation.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const WEYL: u64 = 0xD134_2543_DE82_EF95;

/// 64-bit finalizer from splitmix64.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xCBF2_9CE4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

#[derive(Clone, Debug)]
pub struct Stream {
    id: u64,
    counter: u64,
    cached_normal: Option<f64>,
}

impl Stream {
    pub fn new(seed: u64, label: &str, index: u64) -> Self {
        let mut id = mix64(seed ^ GOLDEN);
        id = mix64(id ^ fnv1a64(label.as_bytes()));
        id = mix64(id ^ index.wrapping_mul(WEYL));
        Stream {
            id,
            counter: 0,
            cached_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.id ^ self.counter.wrapping_mul(GOLDEN))
    }

    /// Uniform draw in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in [lo, hi).
    pub fn next_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal draw via Box-Muller; generates pairs and caches the
    /// second value.
    pub fn next_standard_normal(&mut self) -> f64 {
        if let Some(z) = self.cached_normal.take() {
            return z;
        }
        // First uniform is shifted into (0, 1] so the logarithm is finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.cached_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn next_normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.next_standard_normal()
    }
}
