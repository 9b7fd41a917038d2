//! Keyed random streams.
//!
//! An [`RngStream`] is a ChaCha8 generator whose 256-bit seed is a pure function
//! of a 64-bit key. Child streams are derived from the parent *key* and a child
//! index, never from the parent's consumption state, so a stream tree addressed
//! by `(replica, lineage, ...)` is reproducible regardless of the order in which
//! the branches are evaluated.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct RngStream {
    key: u64,
    inner: ChaCha8Rng,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    /// Root stream for a user-facing seed.
    pub fn new(seed: u64) -> Self {
        Self::from_key(splitmix64(seed ^ 0x5444_4D43_4641_4E00))
    }

    fn from_key(key: u64) -> Self {
        let mut seed = [0u8; 32];
        let mut state = key;
        for chunk in seed.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        Self { key, inner: ChaCha8Rng::from_seed(seed) }
    }

    /// Independent child stream number `index`.
    pub fn child(&self, index: u64) -> Self {
        let mixed = splitmix64(self.key.rotate_left(17) ^ splitmix64(index.wrapping_add(0xA076_1D64_78BD_642F)));
        Self::from_key(mixed)
    }

    /// Child addressed by a path of indices, `child(a).child(b)...`.
    pub fn descend(&self, path: &[u64]) -> Self {
        path.iter().fold(self.clone(), |s, &i| s.child(i))
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// Uniform draw on the open interval (0, 1).
    #[inline]
    pub fn open01(&mut self) -> f64 {
        loop {
            let u = self.unit();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Uniform draw on [0, 1) with 53 bits of precision.
    #[inline]
    pub fn unit(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
