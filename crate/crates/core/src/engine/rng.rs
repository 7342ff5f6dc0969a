//! SplitMix64 (Steele, Lea and Flood), the generator behind every synthetic
//! trial stream. The algorithm is fixed so that seeded runs are reproducible
//! bit for bit on any platform or in any reimplementation.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform on `[0, 1)`: the 53 high bits divided by `2^53`.
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Seed of replication `index` under `master`: the first SplitMix64 output
/// for state `master + index` (wrapping). Independent of execution order.
pub fn replication_seed(master: u64, index: u64) -> u64 {
    SplitMix64::new(master.wrapping_add(index)).next_u64()
}
