//! Sampling backends and the content-addressed response cache.
//!
//! Every sample is cache-keyed by (model, prompt, temperature, index), so a
//! finished run can be re-aggregated offline with zero live requests, and
//! ablations over smaller backward budgets just take a prefix of the cached
//! indices.

mod backend;
mod cache;
mod digest;
mod sampler;

pub use backend::{Backend, LiveBackend, SamplingRequest, StubBackend};
pub use cache::{CacheEntry, CacheStore, ModelStats};
pub use digest::{cache_digest, sha256_hex};
pub use sampler::Sampler;
