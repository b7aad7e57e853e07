//! Keyed, counter-style random streams.
//!
//! Every draw in a run is addressed by a key such as `(seed, t, purpose)`
//! or `(master, purpose, i, k)` rather than by the position of a shared
//! generator. Draws therefore do not depend on iteration order or on how
//! samples are partitioned across workers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Purpose tags keep streams for different uses disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    FilterProposal = 1,
    FilterResample = 2,
    Prior = 3,
    ParamProposal = 4,
    FilterSeed = 5,
    SamplerResample = 6,
    Simulation = 7,
    Replicate = 8,
}

/// SplitMix64 finalizer: a bijection on `u64`.
#[inline]
pub const fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a key from `(master, purpose, a, b)`.
///
/// For a fixed `(master, purpose)` the map is injective over `a, b < 2^32`,
/// so per-(sample, iteration) seeds never collide.
pub fn keyed(master: u64, purpose: Purpose, a: u64, b: u64) -> u64 {
    debug_assert!(a < 1 << 32 && b < 1 << 32);
    let base = mix64(master ^ mix64(purpose as u64));
    mix64(base.wrapping_add((a << 32) | b))
}

/// Generator for a keyed stream.
pub fn stream(master: u64, purpose: Purpose, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(keyed(master, purpose, a, b))
}

#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Uniform on `(0, 1]`.
#[inline]
pub fn unit_open_closed<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Pre-drawn noise for one particle-filter time step: proposal normals
/// (`noise_dim` per particle) and resampling uniforms (one per particle).
///
/// Both are regenerated from `(seed, t)` alone, so repeated evaluation with
/// the same seed sees bitwise identical draws.
#[derive(Debug, Clone, Default)]
pub struct NoiseBundle {
    pub proposal: alloc::vec::Vec<f64>,
    pub uniforms: alloc::vec::Vec<f64>,
}

impl NoiseBundle {
    pub fn fill_proposal(&mut self, seed: u64, t: usize, n: usize, noise_dim: usize) {
        let mut rng = stream(seed, Purpose::FilterProposal, t as u64, 0);
        self.proposal.clear();
        self.proposal.extend((0..n * noise_dim).map(|_| standard_normal(&mut rng)));
    }

    pub fn fill_uniforms(&mut self, seed: u64, t: usize, n: usize) {
        let mut rng = stream(seed, Purpose::FilterResample, t as u64, 0);
        self.uniforms.clear();
        self.uniforms.extend((0..n).map(|_| unit_open_closed(&mut rng)));
    }
}
