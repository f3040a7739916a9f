//! Cache-first sampling.
//!
//! Each sample index is looked up in the cache before anything touches the
//! network; misses are fetched one completion per call (so every sample has
//! its own stable cache key) and written back before returning. With no
//! backend configured the sampler is a pure replay reader and a miss is an
//! error rather than a network call.

use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use tokio::sync::Semaphore;

use crate::core::SampledChain;
use crate::error::{Error, Result};
use crate::llm::{cache_digest, sha256_hex, Backend, CacheEntry, CacheStore, SamplingRequest};

pub struct Sampler {
    cache: CacheStore,
    backend: Option<Arc<dyn Backend>>,
    permits: Arc<Semaphore>,
}

impl Sampler {
    /// `parallelism` bounds in-flight backend calls across all callers.
    pub fn new(cache: CacheStore, backend: Option<Arc<dyn Backend>>, parallelism: usize) -> Self {
        Sampler {
            cache,
            backend,
            permits: Arc::new(Semaphore::new(parallelism.max(1))),
        }
    }

    pub fn cache(&self) -> &CacheStore {
        &self.cache
    }

    pub fn has_backend(&self) -> bool {
        self.backend.is_some()
    }

    pub async fn preflight(&self) -> Result<()> {
        match &self.backend {
            Some(backend) => backend.preflight().await,
            None => Ok(()),
        }
    }

    /// Exactly `num_samples` chains in index order. A sample that fails
    /// permanently in live mode degrades to an empty completion so one bad
    /// sample can cost at most its own vote, never the question.
    pub async fn sample(&self, request: &SamplingRequest) -> Result<Vec<SampledChain>> {
        let prompt_digest = sha256_hex(request.prompt.as_bytes());
        let mut texts: Vec<Option<(String, String)>> = vec![None; request.num_samples];

        for (index, slot) in texts.iter_mut().enumerate() {
            let digest = cache_digest(
                &request.model_id,
                &request.prompt,
                request.temperature,
                index,
            );
            if let Some(entry) = self.cache.get(&request.model_id, &digest)? {
                *slot = Some((entry.raw_text, entry.backend_id));
            }
        }

        let missing: Vec<usize> = texts
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_none())
            .map(|(i, _)| i)
            .collect();

        if !missing.is_empty() {
            let backend = match &self.backend {
                Some(b) => Arc::clone(b),
                None => {
                    let index = missing[0];
                    return Err(Error::CacheMiss {
                        model_id: request.model_id.clone(),
                        sample_index: index,
                        digest: cache_digest(
                            &request.model_id,
                            &request.prompt,
                            request.temperature,
                            index,
                        ),
                    });
                }
            };
            let fetched = futures::future::join_all(missing.iter().map(|&index| {
                let backend = Arc::clone(&backend);
                let permits = Arc::clone(&self.permits);
                async move {
                    let _permit = permits.acquire().await.expect("semaphore never closed");
                    let result = backend.complete(request, index, 1).await;
                    (index, result)
                }
            }))
            .await;

            for (index, result) in fetched {
                let text = match result {
                    Ok(mut batch) if !batch.is_empty() => batch.remove(0),
                    Ok(_) => {
                        tracing::warn!(sample = index, "backend returned no choices");
                        String::new()
                    }
                    Err(err) => {
                        tracing::warn!(sample = index, error = %err, "sample failed permanently");
                        String::new()
                    }
                };
                // only successful completions are cached; failures stay
                // retryable on the next run
                if !text.is_empty() {
                    let digest = cache_digest(
                        &request.model_id,
                        &request.prompt,
                        request.temperature,
                        index,
                    );
                    self.cache.put(
                        &request.model_id,
                        &CacheEntry {
                            key: digest,
                            raw_text: text.clone(),
                            created_at: unix_now(),
                            backend_id: backend.id().to_string(),
                        },
                    )?;
                }
                texts[index] = Some((text, backend.id().to_string()));
            }
        }

        Ok(texts
            .into_iter()
            .enumerate()
            .map(|(index, slot)| {
                let (raw_text, backend_id) = slot.expect("every index filled above");
                SampledChain {
                    prompt_digest: prompt_digest.clone(),
                    sample_index: index,
                    raw_text,
                    prediction: None,
                    backend_id,
                    temperature: request.temperature,
                }
            })
            .collect())
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
