//! The `run` subcommand: evaluate a dataset, append per-question records,
//! print the accuracy summary, and emit the reproducibility manifest.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use fobar::core::{answers_equal, Question};
use fobar::pipeline::QuestionResult;
use futures::stream::StreamExt;

use crate::config::{file_digest, pack_digests, store_digests, RunManifest, Setup};

pub const RESULTS_FILE: &str = "results.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

pub async fn cmd_run(
    setup: Setup,
    dataset_path: &Path,
    format: Option<crate::dataset::DatasetFormat>,
    out_dir: &Path,
    limit: Option<usize>,
) -> Result<()> {
    let mut questions = crate::dataset::load_dataset(dataset_path, format)?;
    if let Some(limit) = limit {
        questions.truncate(limit);
    }

    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;
    let results_path = out_dir.join(RESULTS_FILE);

    // resume: completed question ids are skipped, their records kept
    let done: HashSet<String> = if results_path.exists() {
        read_results(&results_path)?
            .into_iter()
            .map(|r| r.question_id)
            .collect()
    } else {
        HashSet::new()
    };
    let pending: Vec<&Question> = questions.iter().filter(|q| !done.contains(&q.id)).collect();
    if !done.is_empty() {
        eprintln!(
            "resuming: {} of {} questions already recorded",
            done.len(),
            questions.len()
        );
    }

    let runner = setup.build_runner(true).await?;
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&results_path)
        .with_context(|| format!("cannot open {}", results_path.display()))?;

    // bounded concurrency, completion written strictly in dataset order
    let mut results = futures::stream::iter(pending.iter().map(|q| {
        let runner = &runner;
        async move { runner.run_question(q).await }
    }))
    .buffered(setup.run.parallelism.max(1));
    while let Some(result) = results.next().await {
        let result = result?;
        serde_json::to_writer(&mut file, &result)?;
        file.write_all(b"\n")?;
        file.flush()?;
    }
    drop(results);

    let all = read_results(&results_path)?;
    let summary = summarize(&all)?;
    print_summary(&summary);

    let manifest = RunManifest {
        config: setup.run.clone(),
        backend: setup.backend,
        dataset_path: dataset_path.display().to_string(),
        dataset_digest: file_digest(dataset_path)?,
        pack_dir: setup.pack_dir().display().to_string(),
        pack_digests: pack_digests(&setup.pack_dir())?,
        store_dir: setup.store_dir().display().to_string(),
        store_digests: store_digests(setup.store_dir())?,
        results_file: RESULTS_FILE.to_string(),
    };
    let manifest_path = out_dir.join(MANIFEST_FILE);
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)
        .with_context(|| format!("cannot write {}", manifest_path.display()))?;

    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<QuestionResult>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read results {}", path.display()))?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: QuestionResult = serde_json::from_str(line)
            .with_context(|| format!("{}: bad record on line {}", path.display(), idx + 1))?;
        out.push(record);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Summary {
    pub total: usize,
    pub combined_correct: usize,
    pub forward_correct: usize,
    pub backward_correct: usize,
    pub unanswered: usize,
    pub alpha: f64,
}

/// Accuracy at the run's alpha plus both endpoint re-rankings of the same
/// stored distributions.
pub fn summarize(results: &[QuestionResult]) -> Result<Summary> {
    let mut summary = Summary {
        total: results.len(),
        combined_correct: 0,
        forward_correct: 0,
        backward_correct: 0,
        unanswered: 0,
        alpha: results.first().map(|r| r.distribution.alpha).unwrap_or(0.9),
    };
    for r in results {
        if r.unanswered {
            summary.unanswered += 1;
            continue;
        }
        if r.correct {
            summary.combined_correct += 1;
        }
        for (alpha, slot) in [
            (1.0, &mut summary.forward_correct),
            (0.0, &mut summary.backward_correct),
        ] {
            if let Some(c) = r.distribution.select_at(alpha).map_err(fobar_err)? {
                if answers_equal(&c.value, &r.gold) {
                    *slot += 1;
                }
            }
        }
    }
    Ok(summary)
}

fn fobar_err(e: fobar::Error) -> anyhow::Error {
    anyhow::anyhow!(e.to_string())
}

fn accuracy(correct: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    }
}

pub fn print_summary(s: &Summary) {
    println!("questions: {}", s.total);
    println!(
        "accuracy (combined, alpha={}): {:.4} ({}/{})",
        s.alpha,
        accuracy(s.combined_correct, s.total),
        s.combined_correct,
        s.total
    );
    println!(
        "accuracy (forward-only, alpha=1): {:.4} ({}/{})",
        accuracy(s.forward_correct, s.total),
        s.forward_correct,
        s.total
    );
    println!(
        "accuracy (backward-only, alpha=0): {:.4} ({}/{})",
        accuracy(s.backward_correct, s.total),
        s.backward_correct,
        s.total
    );
    if s.unanswered > 0 {
        println!("unanswered (scored incorrect): {}", s.unanswered);
    }
}
