//! The `sweep` subcommand: re-aggregate a finished run's cached samples
//! over alpha and backward-budget grids, no live requests.

use std::path::Path;

use anyhow::{bail, Context, Result};
use fobar::llm::{CacheStore, Sampler};
use fobar::pipeline::{Runner, SweepCell};
use fobar::prompts::PromptPack;
use std::sync::Arc;

use crate::commands::run::MANIFEST_FILE;
use crate::config::{pack_digests, RunManifest};

pub const CSV_HEADER: &str = "dataset,alpha,m_b,accuracy";

pub async fn cmd_sweep(
    run_dir: &Path,
    alpha_grid: &[f64],
    mb_grid: &[usize],
    out: Option<&Path>,
) -> Result<()> {
    let manifest_path = run_dir.join(MANIFEST_FILE);
    let manifest: RunManifest = serde_json::from_str(
        &std::fs::read_to_string(&manifest_path)
            .with_context(|| format!("cannot read {}", manifest_path.display()))?,
    )?;

    let pack_dir = Path::new(&manifest.pack_dir);
    if pack_digests(pack_dir)? != manifest.pack_digests {
        bail!(
            "prompt pack at {} changed since the run; cached samples would not line up",
            pack_dir.display()
        );
    }
    let pack = PromptPack::load(pack_dir).map_err(|e| anyhow::anyhow!("loading pack: {e}"))?;

    let questions = crate::dataset::load_dataset(Path::new(&manifest.dataset_path), None)?;

    // read-only store, no backend: a sweep cannot issue live requests
    let store = CacheStore::open_read_only(Path::new(&manifest.store_dir))
        .map_err(|e| anyhow::anyhow!("opening store: {e}"))?;
    let sampler = Sampler::new(store, None, manifest.config.parallelism);
    let runner = Runner::new(
        manifest.config.clone(),
        pack,
        sampler,
        Arc::new(fobar::core::HardScorer),
    )
    .map_err(|e| anyhow::anyhow!("{e}"))?;

    let cells = runner
        .reaggregate(&questions, alpha_grid, mb_grid)
        .await
        .map_err(|e| anyhow::anyhow!("{e}"))?;

    let dataset_label = Path::new(&manifest.dataset_path)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| manifest.dataset_path.clone());
    let csv = render_csv(&dataset_label, &cells);
    match out {
        Some(path) => {
            std::fs::write(path, &csv)
                .with_context(|| format!("cannot write {}", path.display()))?;
            eprintln!("wrote {} rows to {}", cells.len(), path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

pub fn render_csv(dataset: &str, cells: &[SweepCell]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for cell in cells {
        out.push_str(&format!(
            "{dataset},{},{},{:.6}\n",
            cell.alpha,
            cell.m_b,
            cell.accuracy()
        ));
    }
    out
}

pub fn parse_grid_f64(raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .with_context(|| format!("bad grid value {s:?}"))
        })
        .collect()
}

pub fn parse_grid_usize(raw: &str) -> Result<Vec<usize>> {
    raw.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .with_context(|| format!("bad grid value {s:?}"))
        })
        .collect()
}
