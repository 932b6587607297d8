//! Counter-based noise generation.
//!
//! All randomness flows through a ChaCha8 stream cipher used in counter
//! mode: the key is derived from the user seed, the stream index is the
//! path index, and the word position is a fixed-stride function of the
//! step counter. Every Gaussian increment is therefore a pure function of
//! `(seed, path_index, step)` and ensembles reproduce bit-identically
//! under any parallel schedule.
//!
//! Normals come from a fixed-consumption Box-Muller transform (two words
//! per pair), never from rejection sampling, so the counter layout cannot
//! drift.

use std::f64::consts::TAU;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Identity of one sampled path: `(seed, path_index)` fully determines
/// every increment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub seed: u64,
    pub path_index: u64,
}

impl NoiseSpec {
    pub fn new(seed: u64, path_index: u64) -> Self {
        NoiseSpec { seed, path_index }
    }
}

/// Independent sub-generators keyed into the cipher key, so per-step
/// increments and bridge-refinement draws never collide.
#[derive(Clone, Copy, Debug)]
pub enum NoiseDomain {
    /// Per-step increments of forward samplers.
    Increments,
    /// Node draws of the dyadic Brownian bridge tree.
    Bridge,
}

/// ChaCha words consumed per counter slot (supports up to 8 normals).
const WORDS_PER_STEP: u128 = 16;
/// Maximum normals that fit in one counter slot.
pub const MAX_DIM: usize = 8;

/// Counter-mode Gaussian source for a single path.
pub struct PathRng {
    rng: ChaCha8Rng,
}

impl PathRng {
    pub fn new(noise: &NoiseSpec, domain: NoiseDomain) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&noise.seed.to_le_bytes());
        let tag: &[u8; 8] = match domain {
            NoiseDomain::Increments => b"LS-STEPS",
            NoiseDomain::Bridge => b"LS-TREE\0",
        };
        key[8..16].copy_from_slice(tag);
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(noise.path_index);
        PathRng { rng }
    }

    /// Fills `out` with standard normals for counter slot `step`.
    pub fn standard_normals(&mut self, step: u64, out: &mut [f64]) {
        assert!(out.len() <= MAX_DIM, "counter slot holds at most 8 normals");
        self.rng.set_word_pos(step as u128 * WORDS_PER_STEP);
        let mut i = 0;
        while i < out.len() {
            let (a, b) = normal_pair(self.rng.next_u64(), self.rng.next_u64());
            out[i] = a;
            i += 1;
            if i < out.len() {
                out[i] = b;
                i += 1;
            }
        }
    }
}

/// Maps a u64 to (0, 1]; the offset keeps the logarithm finite.
#[inline]
fn unit_open(x: u64) -> f64 {
    ((x >> 11) as f64 + 1.0) * (1.0 / 9007199254740992.0)
}

/// Box-Muller with fixed word consumption.
#[inline]
fn normal_pair(u: u64, v: u64) -> (f64, f64) {
    let r = (-2.0 * unit_open(u).ln()).sqrt();
    let angle = TAU * unit_open(v);
    (r * angle.cos(), r * angle.sin())
}

/// Standard Brownian increments of a `dim`-dimensional motion over `[0, T]`
/// at dyadic level `level` (`2^level` increments), generated by midpoint
/// bridge splitting of a single Wiener tree.
///
/// Increments are refinement-consistent: summing adjacent pairs at level
/// `l + 1` reproduces the level-`l` increments exactly, so refinement
/// studies measure pathwise convergence on one fixed realization.
pub fn dyadic_standard_increments(
    dim: usize,
    horizon: f64,
    level: u32,
    noise: &NoiseSpec,
) -> Vec<nalgebra::DVector<f64>> {
    assert!(dim <= MAX_DIM);
    let mut rng = PathRng::new(noise, NoiseDomain::Bridge);
    let mut buf = vec![0.0; dim];

    // Root: W_T ~ N(0, T I), drawn at tree node 1.
    rng.standard_normals(1, &mut buf);
    let sqrt_t = horizon.sqrt();
    let root = nalgebra::DVector::from_fn(dim, |i, _| sqrt_t * buf[i]);
    let mut increments = vec![root];

    for depth in 0..level {
        let len = horizon / (1u64 << depth) as f64;
        let half_sd = 0.5 * len.sqrt();
        let mut refined = Vec::with_capacity(increments.len() * 2);
        for (pos, total) in increments.iter().enumerate() {
            // Heap-style node id of the interval being split.
            let node = (1u64 << (depth + 1)) + pos as u64;
            rng.standard_normals(node, &mut buf);
            let noise_term = nalgebra::DVector::from_fn(dim, |i, _| half_sd * buf[i]);
            let left = total * 0.5 + &noise_term;
            let right = total - &left;
            refined.push(left);
            refined.push(right);
        }
        increments = refined;
    }
    increments
}
