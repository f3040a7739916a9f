//! Stable content digests for cache keys.

use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Cache key for one sample. Fields are length-framed before hashing so no
/// two field combinations can collide, and the temperature is rendered with
/// shortest-roundtrip formatting so the key is stable across runs.
pub fn cache_digest(model_id: &str, prompt: &str, temperature: f64, sample_index: usize) -> String {
    let mut hasher = Sha256::new();
    for field in [
        model_id,
        prompt,
        &format!("{temperature:?}"),
        &sample_index.to_string(),
    ] {
        hasher.update((field.len() as u64).to_be_bytes());
        hasher.update(field.as_bytes());
    }
    hex::encode(hasher.finalize())
}
