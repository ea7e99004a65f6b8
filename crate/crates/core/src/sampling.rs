//! Reproducible uniform-disc sampling.
//!
//! Every random draw in the crate flows through [`RngStream`], a thin wrapper
//! over the ChaCha8 block function used in counter mode:
//!
//! * the 256-bit key is the master seed expanded with SplitMix64,
//! * the 64-bit ChaCha stream id is the trial (or block) index,
//! * the word position is `2 * counter`, where `counter` counts 64-bit outputs.
//!
//! The output sequence is therefore a pure function of
//! `(master_seed, stream_index, counter)` and is identical on every platform
//! and under every thread arrangement. This algorithm is part of the output
//! format: changing it changes every CSV the crate has ever produced.

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use std::f64::consts::TAU;
use std::fmt;

/// 2^-52, the spacing of the open-interval uniform grid.
const INV_2_52: f64 = 1.0 / 4_503_599_627_370_496.0;

/// A point of the unit disc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscPoint {
    pub re: f64,
    pub im: f64,
}

impl DiscPoint {
    pub fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
}

impl From<DiscPoint> for Complex64 {
    fn from(p: DiscPoint) -> Self {
        p.to_complex()
    }
}

impl From<Complex64> for DiscPoint {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

/// Counter-based random stream. Cheap to create, `Clone` to fork a replay.
#[derive(Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_index: u64,
    counter: u64,
    core: ChaCha8Rng,
}

impl fmt::Debug for RngStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RngStream")
            .field("master_seed", &self.master_seed)
            .field("stream_index", &self.stream_index)
            .field("counter", &self.counter)
            .finish()
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn expand_key(master_seed: u64) -> [u8; 32] {
    let mut state = master_seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

impl RngStream {
    /// Stream positioned at an arbitrary counter.
    pub fn at(master_seed: u64, stream_index: u64, counter: u64) -> Self {
        let mut core = ChaCha8Rng::from_seed(expand_key(master_seed));
        core.set_stream(stream_index);
        core.set_word_pos(u128::from(counter) * 2);
        Self {
            master_seed,
            stream_index,
            counter,
            core,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Number of 64-bit words consumed so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        self.core.next_u64()
    }

    /// Uniform on the open interval (0, 1): `(k + 1/2) * 2^-52` for a 52-bit `k`.
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 12) as f64 + 0.5) * INV_2_52
    }
}

/// Stream for trial `trial_index` under `master_seed`.
pub fn derive_substream(master_seed: u64, trial_index: u64) -> RngStream {
    RngStream::at(master_seed, trial_index, 0)
}

/// Stream in a separate key domain, for estimators that must stay
/// independent of the plain per-trial streams under the same seed.
pub fn derive_domain_substream(master_seed: u64, domain: u64, index: u64) -> RngStream {
    let mut state = master_seed ^ domain.wrapping_mul(0xD1B5_4A32_D192_ED03);
    let key_seed = splitmix64(&mut state);
    RngStream::at(key_seed, index, 0)
}

/// Uniform point of the open unit disc by the polar map
/// `sqrt(U1) * exp(2 pi i U2)`; always consumes exactly two words.
pub fn sample_unit_disc(stream: &mut RngStream) -> DiscPoint {
    let u1 = stream.next_open01();
    let u2 = stream.next_open01();
    let radius = u1.sqrt();
    let (s, c) = (TAU * u2).sin_cos();
    let mut p = DiscPoint::new(radius * c, radius * s);
    // cos^2 + sin^2 can round a hair above 1 at radius 1 - 2^-53.
    if p.norm_sqr() >= 1.0 {
        let shrink = 1.0 - f64::EPSILON;
        p = DiscPoint::new(p.re * shrink, p.im * shrink);
    }
    p
}

pub fn sample_unit_disc_c(stream: &mut RngStream) -> Complex64 {
    sample_unit_disc(stream).to_complex()
}

pub fn sample_roots(n: usize, stream: &mut RngStream) -> Vec<Complex64> {
    (0..n).map(|_| sample_unit_disc_c(stream)).collect()
}

/// Parse a seed given as decimal or `0x`-prefixed hexadecimal.
pub fn parse_seed(text: &str) -> Result<u64, String> {
    let t = text.trim();
    let parsed = if let Some(hex) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16)
    } else {
        t.parse::<u64>()
    };
    parsed.map_err(|e| format!("invalid seed `{text}`: {e}"))
}
