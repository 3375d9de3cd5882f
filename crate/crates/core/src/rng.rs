//! Counter-based random streams.
//!
//! Every replicate draws from its own ChaCha8 stream selected by
//! `(seed, domain, index)`. The stream depends only on those three numbers, so
//! results do not depend on how replicates are scheduled across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Stream domains. Different consumers of the same user seed never share bits.
pub mod domain {
    pub const NULL_TABLE: u64 = 0x6e75_6c6c_7462_6c31;
    /// Outer layer of tables whose statistic is itself calibrated by tables.
    pub const NESTED_TABLE: u64 = 0x6e65_7374_6564_7432;
    pub const POWER: u64 = 0x706f_7765_7273_696d;
    pub const TYPE1: u64 = 0x7479_7065_3173_696d;
    pub const SLOPE: u64 = 0x736c_6f70_6573_696d;
    pub const SYNTH: u64 = 0x7379_6e74_6864_6174;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Random stream for replicate `index` of the given seed and domain.
pub fn stream(seed: u64, domain: u64, index: u64) -> Stream {
    let key = splitmix64(seed ^ splitmix64(domain));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    Stream(rng)
}

pub struct Stream(ChaCha8Rng);

impl Stream {
    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.0.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.0)
    }

    pub fn uniforms(&mut self, k: usize) -> Vec<f64> {
        (0..k).map(|_| self.uniform()).collect()
    }
}
