//! The `rescore` subcommand: recompute accuracy from a results file alone,
//! verifying the stored selections and correctness flags on the way.

use std::path::Path;

use anyhow::{bail, Result};
use fobar::core::answers_equal;

use crate::commands::run::{print_summary, read_results, summarize};

pub fn cmd_rescore(results_path: &Path) -> Result<()> {
    let results = read_results(results_path)?;
    let mut mismatches = Vec::new();

    for r in &results {
        // re-select from the stored distribution and re-score against gold
        let reselected = r.distribution.select();
        match (&r.selected, reselected) {
            (Some(stored), Some(fresh)) => {
                if !answers_equal(&stored.value, &fresh.value) {
                    mismatches.push(format!(
                        "{}: stored selection {} but distribution selects {}",
                        r.question_id,
                        stored.value.raw(),
                        fresh.value.raw()
                    ));
                }
            }
            (None, None) => {}
            _ => mismatches.push(format!("{}: selection presence mismatch", r.question_id)),
        }
        let recomputed_correct = r
            .selected
            .as_ref()
            .map(|c| answers_equal(&c.value, &r.gold))
            .unwrap_or(false);
        if recomputed_correct != r.correct {
            mismatches.push(format!(
                "{}: stored correct={} but rescoring gives {}",
                r.question_id, r.correct, recomputed_correct
            ));
        }
        for (label, sum) in [
            (
                "forward",
                r.distribution
                    .entries
                    .iter()
                    .map(|e| e.p_forward)
                    .sum::<f64>(),
            ),
            (
                "backward",
                r.distribution
                    .entries
                    .iter()
                    .map(|e| e.p_backward)
                    .sum::<f64>(),
            ),
            (
                "combined",
                r.distribution
                    .entries
                    .iter()
                    .map(|e| e.p_combined)
                    .sum::<f64>(),
            ),
        ] {
            if !r.distribution.entries.is_empty() && (sum - 1.0).abs() > 1e-9 {
                mismatches.push(format!(
                    "{}: {label} probabilities sum to {sum}",
                    r.question_id
                ));
            }
        }
    }

    let summary = summarize(&results)?;
    print_summary(&summary);

    if mismatches.is_empty() {
        println!("rescore: all {} records verified", results.len());
        Ok(())
    } else {
        for m in &mismatches {
            eprintln!("rescore mismatch: {m}");
        }
        bail!(
            "{} of {} records failed verification",
            mismatches.len(),
            results.len()
        );
    }
}
