//! Configuration resolution and the run manifest.
//!
//! Precedence: command-line flags > config file > environment > model
//! defaults. The API token is environment-only and never appears in any
//! file this module writes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use fobar::core::HardScorer;
use fobar::llm::{sha256_hex, Backend, CacheStore, LiveBackend, Sampler};
use fobar::pipeline::{RunConfig, Runner};
use fobar::prompts::PromptPack;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    /// OpenAI-compatible HTTP endpoint; token from the environment.
    Live,
    /// Serve recorded completions from a fixture directory; no network.
    Replay,
}

/// Optional knobs from flags (strongest) or the TOML config file.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub m_f: Option<usize>,
    pub m_b: Option<usize>,
    pub temperature: Option<f64>,
    pub model: Option<String>,
    pub prompt_pack: Option<String>,
    pub packs_dir: Option<PathBuf>,
    pub max_tokens: Option<usize>,
    pub parallelism: Option<usize>,
    pub skip_backward_when_unanimous: Option<bool>,
    pub backend: Option<BackendChoice>,
    pub fixtures: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
}

impl Overrides {
    fn or(self, weaker: Overrides) -> Overrides {
        Overrides {
            alpha: self.alpha.or(weaker.alpha),
            epsilon: self.epsilon.or(weaker.epsilon),
            m_f: self.m_f.or(weaker.m_f),
            m_b: self.m_b.or(weaker.m_b),
            temperature: self.temperature.or(weaker.temperature),
            model: self.model.or(weaker.model),
            prompt_pack: self.prompt_pack.or(weaker.prompt_pack),
            packs_dir: self.packs_dir.or(weaker.packs_dir),
            max_tokens: self.max_tokens.or(weaker.max_tokens),
            parallelism: self.parallelism.or(weaker.parallelism),
            skip_backward_when_unanimous: self
                .skip_backward_when_unanimous
                .or(weaker.skip_backward_when_unanimous),
            backend: self.backend.or(weaker.backend),
            fixtures: self.fixtures.or(weaker.fixtures),
            cache_dir: self.cache_dir.or(weaker.cache_dir),
        }
    }

    fn from_env() -> Overrides {
        Overrides {
            model: std::env::var("FOBAR_MODEL").ok(),
            prompt_pack: std::env::var("FOBAR_PROMPT_PACK").ok(),
            packs_dir: std::env::var("FOBAR_PACKS_DIR").ok().map(PathBuf::from),
            ..Overrides::default()
        }
    }
}

/// Fully resolved settings for a run.
#[derive(Debug, Clone)]
pub struct Setup {
    pub run: RunConfig,
    pub backend: BackendChoice,
    pub packs_dir: PathBuf,
    pub fixtures: PathBuf,
    pub cache_dir: PathBuf,
}

pub fn resolve(flags: Overrides, config_file: Option<&Path>) -> Result<Setup> {
    let from_file: Overrides = match config_file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("bad config {}", path.display()))?
        }
        None => Overrides::default(),
    };
    let merged = flags.or(from_file).or(Overrides::from_env());

    let model = merged
        .model
        .clone()
        .unwrap_or_else(|| "gpt-3.5-turbo".to_string());
    let mut run = RunConfig::for_model(model);
    if let Some(v) = merged.alpha {
        run.alpha = v;
    }
    if let Some(v) = merged.epsilon {
        run.epsilon = v;
    }
    if let Some(v) = merged.m_f {
        run.m_f = v;
    }
    if let Some(v) = merged.m_b {
        run.m_b = v;
    }
    if let Some(v) = merged.temperature {
        run.temperature = v;
    }
    if let Some(v) = merged.prompt_pack {
        run.prompt_pack = v;
    }
    if let Some(v) = merged.max_tokens {
        run.max_tokens = v;
    }
    if let Some(v) = merged.parallelism {
        run.parallelism = v;
    }
    if let Some(v) = merged.skip_backward_when_unanimous {
        run.skip_backward_when_unanimous = v;
    }
    run.validate()?;

    Ok(Setup {
        run,
        backend: merged.backend.unwrap_or(BackendChoice::Live),
        packs_dir: merged.packs_dir.unwrap_or_else(|| PathBuf::from("prompts")),
        fixtures: merged
            .fixtures
            .unwrap_or_else(|| PathBuf::from("fixtures/replay20/cache")),
        cache_dir: merged
            .cache_dir
            .unwrap_or_else(|| PathBuf::from(".fobar-cache")),
    })
}

impl Setup {
    pub fn pack_dir(&self) -> PathBuf {
        self.packs_dir.join(&self.run.prompt_pack)
    }

    pub fn load_pack(&self) -> Result<PromptPack> {
        PromptPack::load(&self.pack_dir())
            .with_context(|| format!("loading prompt pack from {}", self.pack_dir().display()))
    }

    /// The record store this run reads (and, live, writes).
    pub fn store_dir(&self) -> &Path {
        match self.backend {
            BackendChoice::Live => &self.cache_dir,
            BackendChoice::Replay => &self.fixtures,
        }
    }

    /// Build the runner. Replay mode opens the store read-only with no
    /// backend, so it is structurally incapable of a live request.
    pub async fn build_runner(&self, preflight: bool) -> Result<Runner> {
        let pack = self.load_pack()?;
        let sampler = match self.backend {
            BackendChoice::Live => {
                let backend = LiveBackend::from_env()?;
                if preflight {
                    backend.preflight().await?;
                }
                Sampler::new(
                    CacheStore::open(&self.cache_dir)?,
                    Some(Arc::new(backend)),
                    self.run.parallelism,
                )
            }
            BackendChoice::Replay => Sampler::new(
                CacheStore::open_read_only(&self.fixtures)?,
                None,
                self.run.parallelism,
            ),
        };
        Ok(Runner::new(
            self.run.clone(),
            pack,
            sampler,
            Arc::new(HardScorer),
        )?)
    }
}

/// Reproducibility record written next to the results.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub backend: BackendChoice,
    pub dataset_path: String,
    pub dataset_digest: String,
    pub pack_dir: String,
    pub pack_digests: BTreeMap<String, String>,
    pub store_dir: String,
    pub store_digests: BTreeMap<String, String>,
    pub results_file: String,
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot digest {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Digest every record file in a store directory.
pub fn store_digests(dir: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    if !dir.is_dir() {
        return Ok(out);
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|x| x == "ndjson").unwrap_or(false))
        .collect();
    paths.sort();
    for path in paths {
        let name = path
            .file_name()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        out.insert(name, file_digest(&path)?);
    }
    Ok(out)
}

pub fn pack_digests(pack_dir: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for file in ["forward.txt", "backward.txt"] {
        out.insert(file.to_string(), file_digest(&pack_dir.join(file))?);
    }
    Ok(out)
}
