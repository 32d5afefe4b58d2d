//! Counter-keyed noise.
//!
//! The draw for `(seed, row, site)` reads the four 32-bit words at word position
//! `4 * row` of ChaCha8 stream `site` under the key expanded from `seed`. Every
//! distribution consumes exactly those four words, so a draw depends on nothing
//! but its key and rows can be evaluated in any order or in parallel.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Noise;

const WORDS_PER_DRAW: u128 = 4;
const UNIT: f64 = 1.0 / (1u64 << 53) as f64;

/// Sequential reader over one noise site. Consecutive rows avoid re-seeking.
pub(crate) struct NoiseStream {
    rng: ChaCha8Rng,
    next_row: Option<u64>,
}

impl NoiseStream {
    pub(crate) fn new(seed: u64, site: u32) -> NoiseStream {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::from(site));
        NoiseStream { rng, next_row: None }
    }

    pub(crate) fn draw(&mut self, row: u64, noise: &Noise) -> f64 {
        if let Noise::Constant(v) = *noise {
            return v;
        }
        if self.next_row != Some(row) {
            self.rng.set_word_pos(u128::from(row) * WORDS_PER_DRAW);
        }
        let a = self.rng.next_u64();
        let b = self.rng.next_u64();
        self.next_row = Some(row + 1);
        match *noise {
            Noise::Normal { mu, sigma } => mu + sigma * box_muller(a, b),
            Noise::Uniform { lo, hi } => lo + (hi - lo) * unit_open_hi(a),
            Noise::Constant(v) => v,
        }
    }
}

/// One draw keyed by `(seed, row, site)`.
pub fn noise_draw(seed: u64, row: u64, site: u32, noise: &Noise) -> f64 {
    NoiseStream::new(seed, site).draw(row, noise)
}

/// [0, 1)
fn unit_open_hi(bits: u64) -> f64 {
    (bits >> 11) as f64 * UNIT
}

fn box_muller(a: u64, b: u64) -> f64 {
    // (0, 1] keeps the log finite
    let u1 = ((a >> 11) + 1) as f64 * UNIT;
    let u2 = unit_open_hi(b);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
