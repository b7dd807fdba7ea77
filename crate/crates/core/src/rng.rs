//! Deterministic, splittable random streams.
//!
//! A stream is keyed by `(master_seed, label, index)`. The seed and the
//! FNV-1a hash of the label form a ChaCha8 key and the index selects the
//! ChaCha stream, so any stream can be derived in O(1) on any thread and
//! always yields the same sequence.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over the UTF-8 bytes of `label`.
///
/// This hash is part of the reproducibility contract: changing it changes
/// every stream.
pub fn label_hash(label: &str) -> u64 {
    label.bytes().fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A single-owner random stream. Move it between threads freely, but never
/// share one stream between concurrent consumers.
#[derive(Clone, Debug)]
pub struct RngStream {
    master_seed: u64,
    label_hash: u64,
    index: u64,
    inner: ChaCha8Rng,
}

/// Derive the stream for `(master_seed, label, index)`.
pub fn derive_stream(master_seed: u64, label: &str, index: u64) -> RngStream {
    let lh = label_hash(label);
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&lh.to_le_bytes());
    key[16..24].copy_from_slice(&splitmix64(master_seed ^ lh.rotate_left(17)).to_le_bytes());
    key[24..].copy_from_slice(&splitmix64(lh).to_le_bytes());
    let mut inner = ChaCha8Rng::from_seed(key);
    inner.set_stream(index);
    RngStream {
        master_seed,
        label_hash: lh,
        index,
        inner,
    }
}

impl RngStream {
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn label_hash(&self) -> u64 {
        self.label_hash
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    /// Number of 32-bit words consumed so far.
    pub fn position(&self) -> u128 {
        self.inner.get_word_pos()
    }

    /// Uniform on `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]`; safe to take the logarithm of.
    #[inline]
    pub fn uniform_pos(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    /// Standard exponential variate.
    #[inline]
    pub fn exponential(&mut self) -> f64 {
        -self.uniform_pos().ln()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
