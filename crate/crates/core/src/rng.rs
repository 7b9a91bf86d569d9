//! Seeded random streams.
//!
//! Every random draw in the toolkit comes from a ChaCha8 generator whose key
//! is derived from the user seed and a stream name, and whose 64-bit stream
//! id selects a substream (typically the shot id). Work can therefore be
//! split across any number of threads without changing a single draw.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive the 256-bit key for a named stream.
pub fn stream_key(seed: u64, name: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"softdec/rng/v1\0");
    hasher.update(seed.to_le_bytes());
    hasher.update(name.as_bytes());
    hasher.finalize().into()
}

/// Generator for substream `index` of the named stream.
pub fn substream(seed: u64, name: &str, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(stream_key(seed, name));
    rng.set_stream(index);
    rng
}
