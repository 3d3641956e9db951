//! Counter-based random streams.
//!
//! Every random decision in a run is drawn from a stream addressed by
//! `(master seed, domain, a, b)`. The stream key is a SplitMix64 hash of the
//! address and the i-th output is `mix(key + i * GOLDEN)`, so any draw can be
//! regenerated without replaying earlier ones. This is what makes a tick's
//! agent sweep independent of evaluation order and thread count: agent `α`
//! at tick `t` always reads stream `(seed, Domain::Decision, t, α)`.
//!
//! Not cryptographically secure.

use rand::{Error as RandError, RngCore};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Finalizer from SplitMix64 (Stafford variant 13).
#[inline(always)]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent purposes a run draws randomness for. The discriminant is part
/// of the stream address, so reordering variants changes every output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Rewiring = 1,
    Utilities = 2,
    Innovators = 3,
    Decision = 4,
}

/// A single counter-based stream.
#[derive(Clone, Debug)]
pub struct RandomStream {
    key: u64,
    counter: u64,
}

impl RandomStream {
    pub fn new(seed: u64, domain: Domain, a: u64, b: u64) -> Self {
        let mut key = mix(seed.wrapping_add(GOLDEN));
        key = mix(key ^ (domain as u64).wrapping_mul(GOLDEN));
        key = mix(key ^ a.wrapping_add(1).wrapping_mul(0xD6E8_FEB8_6659_FD93));
        key = mix(key ^ b.wrapping_add(1).wrapping_mul(0xA076_1D64_78BD_642F));
        RandomStream { key, counter: 0 }
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n` (Lemire's multiply-shift with rejection).
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let threshold = n.wrapping_neg() % n;
        loop {
            let x = self.next_u64();
            let wide = (x as u128) * (n as u128);
            if (wide as u64) >= threshold {
                return (wide >> 64) as u64;
            }
        }
    }
}

impl RngCore for RandomStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), RandError> {
        self.fill_bytes(dest);
        Ok(())
    }
}
