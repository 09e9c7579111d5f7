//! Deterministic, splittable random streams.
//!
//! A stream is a ChaCha8 generator keyed by the master seed and positioned on
//! its own 64-bit stream id, so the draws of one stream never depend on how
//! many other streams exist or in which order they were created.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

/// Below this success probability geometric draws use the inverse transform.
const TINY_SUCCESS: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct RandomStream {
    master_seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_id);
        Self {
            master_seed,
            stream_id,
            rng,
        }
    }

    /// Stream for replicate `replicate` of experiment `experiment`.
    pub fn for_replicate(master_seed: u64, experiment: u64, replicate: u64) -> Self {
        Self::new(master_seed, stream_id(experiment, replicate))
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw on the open interval (0, 1).
    pub fn open01(&mut self) -> f64 {
        loop {
            let u = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Exponential draw with the given rate.
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -libm::log(self.open01()) / rate
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.open01() < p
    }

    /// Failures before the first success, `p` in `(0, 1]`; saturates at `u64::MAX`.
    pub fn geometric_failures(&mut self, p: f64) -> u64 {
        if p >= 1.0 {
            return 0;
        }
        if p < TINY_SUCCESS {
            // The exact sampler stalls once 1 - p rounds to 1.
            let failures = libm::floor(libm::log(self.open01()) / libm::log1p(-p));
            return if failures >= u64::MAX as f64 {
                u64::MAX
            } else {
                failures as u64
            };
        }
        Geometric::new(p)
            .expect("probability in (0, 1)")
            .sample(self)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Stable mix of an (experiment, replicate) pair into a stream id.
pub fn stream_id(experiment: u64, replicate: u64) -> u64 {
    splitmix64(splitmix64(experiment) ^ replicate)
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
