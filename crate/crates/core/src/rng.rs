//! Deterministic random substreams.
//!
//! Every random draw in a run comes from a ChaCha8 stream seeded with the
//! run seed and addressed by a 64-bit stream id built from a domain tag and
//! two indices. Two draws with the same address are bit-identical no matter
//! which thread produces them or in which order.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// What a substream is used for. Kept in the top byte of the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Domain {
    Channel = 1,
    Codebook = 2,
    Misc = 3,
}

pub fn substream(seed: u64, domain: Domain, a: u32, b: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // 24 bits for `a` leave the domain byte intact.
    let id = ((domain as u64) << 56) | (u64::from(a & 0x00ff_ffff) << 32) | u64::from(b);
    rng.set_stream(id);
    rng
}

/// Circularly-symmetric complex normal with unit variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}
