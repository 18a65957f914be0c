//! Seeded generator used by every randomized routine.
//!
//! SplitMix64 is implemented inline so that instance generation and ascent
//! restarts reproduce bit for bit on every platform and toolchain.

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    /// Uniform integer in `[0, bound)`.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        // Rejection-free modulo is fine here: bounds are tiny next to 2^64.
        self.next_u64() % bound
    }

    /// Standard normal via Box-Muller.
    pub fn next_gaussian(&mut self) -> f64 {
        let u1 = (self.next_f64()).max(1e-300);
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// First `count` entries of a seeded shuffle of `0..n`.
    pub fn sample_distinct(&mut self, n: u64, count: usize) -> Vec<u64> {
        let mut pool: Vec<u64> = (0..n).collect();
        let mut out = Vec::with_capacity(count);
        for i in 0..count.min(pool.len()) {
            let j = i as u64 + self.next_below(n - i as u64);
            pool.swap(i, j as usize);
            out.push(pool[i]);
        }
        out
    }
}

/// FNV-1a hash of a byte string, used for witness digests.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
