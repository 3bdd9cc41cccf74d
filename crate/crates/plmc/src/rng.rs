//! Reproducible per-chain random number streams.
//!
//! Each chain owns a [`ChainRng`] derived from a `(seed, stream_id)` pair.
//! The generator is ChaCha12, a counter-mode stream cipher: identical
//! `(seed, stream_id)` reproduces the byte stream bit-for-bit, and distinct
//! stream ids select disjoint cipher streams under the same key, which is the
//! documented independence contract.
//!
//! A chain draws from two separate lanes: one for Gaussian noise and one for
//! the Bernoulli index-set machinery. Keeping the lanes apart is what makes a
//! K = 1 Poisson batch consume Gaussians in exactly the same order as a plain
//! Euler step, so the two are bit-identical under a shared stream.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Identifier of one logical random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }
}

/// SplitMix64 step, used only to expand the 64-bit seed into a cipher key.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn keyed_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha12Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

/// Live generator state for one chain: a Gaussian lane and a Bernoulli lane.
#[derive(Clone, Debug)]
pub struct ChainRng {
    stream: RngStream,
    gauss: ChaCha12Rng,
    bern: ChaCha12Rng,
}

impl ChainRng {
    pub fn new(stream: RngStream) -> Self {
        // Two cipher streams per chain; chains are spaced two streams apart.
        let base = stream.stream_id.wrapping_mul(2);
        ChainRng {
            stream,
            gauss: keyed_rng(stream.seed, base),
            bern: keyed_rng(stream.seed, base.wrapping_add(1)),
        }
    }

    pub fn stream(&self) -> RngStream {
        self.stream
    }

    /// One standard normal from the Gaussian lane.
    pub fn normal(&mut self) -> f64 {
        self.gauss.sample(StandardNormal)
    }

    /// Fills `out` with standard normals, in order.
    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for x in out.iter_mut() {
            *x = self.normal();
        }
    }

    /// Uniform in [0, 1) from the Bernoulli lane.
    pub fn uniform_index_lane(&mut self) -> f64 {
        self.bern.gen::<f64>()
    }

    /// Uniform integer in [0, bound] from the Bernoulli lane.
    pub fn uniform_int_index_lane(&mut self, bound: usize) -> usize {
        self.bern.gen_range(0..=bound)
    }
}
