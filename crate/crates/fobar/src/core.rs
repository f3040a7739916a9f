//! Domain types and the aggregation mathematics.
//!
//! Everything in this module is a pure function on immutable values: vote
//! proportions for forward reasoning, correctness counts and
//! epsilon-smoothed proportions for backward reasoning, the geometric
//! combination of the two, and the final argmax selection.

use std::collections::BTreeMap;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric;

/// A parsed answer: the exact payload plus the surface form it came from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnswerValue {
    Numeric {
        raw: String,
        #[serde(with = "numeric::serde_rational")]
        value: BigRational,
    },
    Choice {
        raw: String,
        label: char,
    },
    Text {
        raw: String,
    },
}

impl AnswerValue {
    /// Parse a numeric answer from its surface form ("36", "36.0", "$1,200").
    pub fn numeric(raw: impl Into<String>) -> Result<Self> {
        let raw = raw.into();
        let value = numeric::parse_surface(&raw).ok_or_else(|| Error::BadNumber(raw.clone()))?;
        Ok(AnswerValue::Numeric { raw, value })
    }

    /// Numeric answer with a pre-parsed exact value.
    pub fn numeric_exact(raw: impl Into<String>, value: BigRational) -> Self {
        AnswerValue::Numeric {
            raw: raw.into(),
            value,
        }
    }

    /// Parse a multiple-choice label from forms like "(A)", "a", "B)".
    pub fn choice(raw: impl Into<String>) -> Result<Self> {
        let raw = raw.into();
        let label = raw
            .chars()
            .find(|c| c.is_ascii_alphabetic())
            .map(|c| c.to_ascii_uppercase())
            .ok_or_else(|| Error::BadAnswer(format!("no choice label in {raw:?}")))?;
        Ok(AnswerValue::Choice { raw, label })
    }

    pub fn text(raw: impl Into<String>) -> Result<Self> {
        let raw = raw.into();
        if raw.trim().is_empty() {
            return Err(Error::BadAnswer("empty text answer".into()));
        }
        Ok(AnswerValue::Text { raw })
    }

    /// The original surface form.
    pub fn raw(&self) -> &str {
        match self {
            AnswerValue::Numeric { raw, .. }
            | AnswerValue::Choice { raw, .. }
            | AnswerValue::Text { raw } => raw,
        }
    }

    pub fn as_numeric(&self) -> Option<&BigRational> {
        match self {
            AnswerValue::Numeric { value, .. } => Some(value),
            _ => None,
        }
    }
}

impl std::fmt::Display for AnswerValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.raw())
    }
}

/// Which kind of final answer a task expects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Numeric,
    Choice,
}

/// One answer option of a multiple-choice question.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChoiceOption {
    pub label: String,
    pub text: String,
}

/// One benchmark item.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
    pub gold_answer: AnswerValue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<ChoiceOption>>,
}

impl Question {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        gold_answer: AnswerValue,
        options: Option<Vec<ChoiceOption>>,
    ) -> Result<Self> {
        let id = id.into();
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::BadQuestion {
                id,
                reason: "empty question text".into(),
            });
        }
        if let Some(opts) = &options {
            let mut seen = std::collections::HashSet::new();
            for opt in opts {
                if !seen.insert(opt.label.to_ascii_uppercase()) {
                    return Err(Error::BadQuestion {
                        id,
                        reason: format!("duplicate option label {:?}", opt.label),
                    });
                }
            }
        }
        Ok(Question {
            id,
            text,
            gold_answer,
            options,
        })
    }

    pub fn task_kind(&self) -> TaskKind {
        if self.options.is_some() {
            TaskKind::Choice
        } else {
            TaskKind::Numeric
        }
    }
}

/// A deduplicated answer with its forward vote count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateAnswer {
    pub value: AnswerValue,
    pub forward_votes: usize,
    /// Ordinal of the first sample that produced this value; the final
    /// tie-break in selection, so results are deterministic.
    pub first_seen_index: usize,
}

/// A question with one number replaced by the mask symbol.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaskedQuestion {
    pub source_id: String,
    pub mask_index: usize,
    pub masked_text: String,
    pub ground_truth: AnswerValue,
    pub mask_span: std::ops::Range<usize>,
}

/// One model completion with its extraction result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampledChain {
    pub prompt_digest: String,
    pub sample_index: usize,
    pub raw_text: String,
    pub prediction: Option<AnswerValue>,
    pub backend_id: String,
    pub temperature: f64,
}

/// Per-candidate row of the final distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistributionEntry {
    pub candidate: CandidateAnswer,
    pub p_forward: f64,
    pub z_backward: f64,
    pub p_backward: f64,
    pub p_combined: f64,
}

/// Forward, backward, and combined probabilities over the candidate set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnswerDistribution {
    pub entries: Vec<DistributionEntry>,
    pub alpha: f64,
    pub epsilon: f64,
    /// Number of forward votes the proportions are taken over (extractable
    /// chains only; failed extractions are dropped from the denominator).
    pub m_f: usize,
    /// Backward samples per (candidate, mask) pair used for the counts.
    pub m_b: usize,
    pub n_masks: usize,
}

impl AnswerDistribution {
    /// Aggregate forward proportions and backward counts into the full
    /// distribution. `forward` pairs candidates with their vote proportion;
    /// `z` is aligned by candidate index.
    pub fn build(
        forward: Vec<(CandidateAnswer, f64)>,
        z: Vec<f64>,
        alpha: f64,
        epsilon: f64,
        m_b: usize,
        n_masks: usize,
    ) -> Result<Self> {
        if forward.len() != z.len() {
            return Err(Error::LengthMismatch {
                left: forward.len(),
                right: z.len(),
            });
        }
        let m_f: usize = forward.iter().map(|(c, _)| c.forward_votes).sum();
        let p_forward: Vec<f64> = forward.iter().map(|(_, p)| *p).collect();
        let p_backward = backward_distribution(&z, epsilon)?;
        let p_combined = combine(&p_forward, &p_backward, alpha)?;
        let entries = forward
            .into_iter()
            .zip(z)
            .zip(p_backward.iter().zip(&p_combined))
            .map(|(((candidate, p_f), z_i), (p_b, p_c))| DistributionEntry {
                candidate,
                p_forward: p_f,
                z_backward: z_i,
                p_backward: *p_b,
                p_combined: *p_c,
            })
            .collect();
        Ok(AnswerDistribution {
            entries,
            alpha,
            epsilon,
            m_f,
            m_b,
            n_masks,
        })
    }

    /// Distribution for a question with no extractable forward answers.
    pub fn empty(alpha: f64, epsilon: f64, m_b: usize, n_masks: usize) -> Self {
        AnswerDistribution {
            entries: Vec::new(),
            alpha,
            epsilon,
            m_f: 0,
            m_b,
            n_masks,
        }
    }

    /// Winner at the stored alpha.
    pub fn select(&self) -> Option<&CandidateAnswer> {
        select(self)
    }

    /// Re-rank the stored forward/backward probabilities at a different
    /// alpha. Lets summaries and sweeps reuse one run's distribution.
    pub fn select_at(&self, alpha: f64) -> Result<Option<&CandidateAnswer>> {
        if self.entries.is_empty() {
            return Ok(None);
        }
        let p_f: Vec<f64> = self.entries.iter().map(|e| e.p_forward).collect();
        let p_b: Vec<f64> = self.entries.iter().map(|e| e.p_backward).collect();
        let p_c = combine(&p_f, &p_b, alpha)?;
        let best = self
            .entries
            .iter()
            .zip(&p_c)
            .max_by(|(ea, pa), (eb, pb)| {
                pa.partial_cmp(pb)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(
                        ea.p_forward
                            .partial_cmp(&eb.p_forward)
                            .unwrap_or(std::cmp::Ordering::Equal),
                    )
                    .then(
                        eb.candidate
                            .first_seen_index
                            .cmp(&ea.candidate.first_seen_index),
                    )
            })
            .map(|(e, _)| &e.candidate);
        Ok(best)
    }
}

/// Answer equivalence: numeric values within tolerance, choice labels
/// case-insensitively, text trimmed and case-folded. Kinds never mix.
pub fn answers_equal(a: &AnswerValue, b: &AnswerValue) -> bool {
    match (a, b) {
        (AnswerValue::Numeric { value: va, .. }, AnswerValue::Numeric { value: vb, .. }) => {
            numeric::approx_eq(va, vb)
        }
        (AnswerValue::Choice { label: la, .. }, AnswerValue::Choice { label: lb, .. }) => {
            la.eq_ignore_ascii_case(lb)
        }
        (AnswerValue::Text { raw: ra }, AnswerValue::Text { raw: rb }) => {
            ra.trim().to_lowercase() == rb.trim().to_lowercase()
        }
        _ => false,
    }
}

/// Deduplicate forward samples and return each candidate with its vote
/// proportion votes/m_f. Candidates appear in first-seen order.
pub fn forward_distribution(
    samples: &[AnswerValue],
    m_f: usize,
) -> Result<Vec<(CandidateAnswer, f64)>> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if samples.len() != m_f {
        return Err(Error::LengthMismatch {
            left: samples.len(),
            right: m_f,
        });
    }
    let mut candidates: Vec<CandidateAnswer> = Vec::new();
    for (index, sample) in samples.iter().enumerate() {
        match candidates
            .iter_mut()
            .find(|c| answers_equal(&c.value, sample))
        {
            Some(c) => c.forward_votes += 1,
            None => candidates.push(CandidateAnswer {
                value: sample.clone(),
                forward_votes: 1,
                first_seen_index: index,
            }),
        }
    }
    Ok(candidates
        .into_iter()
        .map(|c| {
            let p = c.forward_votes as f64 / m_f as f64;
            (c, p)
        })
        .collect())
}

/// Backward predictions keyed by (candidate index, mask index); inner
/// vector is per-sample, `None` marking a chain whose value could not be
/// extracted (it contributes zero).
pub type BackwardPredictions = BTreeMap<(usize, usize), Vec<Option<AnswerValue>>>;

/// Sum each candidate's correctness over every mask and sample.
pub fn backward_counts(
    n_candidates: usize,
    predictions: &BackwardPredictions,
    masks: &[MaskedQuestion],
    scorer: &dyn MatchScorer,
) -> Result<Vec<f64>> {
    let mut z = vec![0.0; n_candidates];
    for (&(candidate, mask), preds) in predictions {
        if candidate >= n_candidates {
            return Err(Error::UnknownCandidate {
                index: candidate,
                count: n_candidates,
            });
        }
        let mask = masks.get(mask).ok_or(Error::UnknownMask {
            index: mask,
            count: masks.len(),
        })?;
        for pred in preds.iter().flatten() {
            z[candidate] += scorer.score(pred, &mask.ground_truth);
        }
    }
    Ok(z)
}

/// Epsilon-smoothed proportions: p_i = (z_i + eps) / (sum z + eps * k).
/// All-zero counts give the uniform distribution.
pub fn backward_distribution(z: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    if z.is_empty() {
        return Err(Error::EmptySamples);
    }
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    let total: f64 = z.iter().sum();
    let denom = total + epsilon * z.len() as f64;
    Ok(z.iter().map(|zi| (zi + epsilon) / denom).collect())
}

/// Unnormalized combined scores f_i^alpha * b_i^(1-alpha), with 0^0 := 1 so
/// the endpoints stay exact even for zero-mass candidates.
pub fn combined_scores(p_forward: &[f64], p_backward: &[f64], alpha: f64) -> Vec<f64> {
    fn pow01(base: f64, exp: f64) -> f64 {
        if exp == 0.0 {
            1.0
        } else {
            base.powf(exp)
        }
    }
    p_forward
        .iter()
        .zip(p_backward)
        .map(|(f, b)| pow01(*f, alpha) * pow01(*b, 1.0 - alpha))
        .collect()
}

/// Geometric interpolation of the two distributions, renormalized. alpha=1
/// returns the forward distribution bit-for-bit, alpha=0 the backward one.
pub fn combine(p_forward: &[f64], p_backward: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if p_forward.len() != p_backward.len() {
        return Err(Error::LengthMismatch {
            left: p_forward.len(),
            right: p_backward.len(),
        });
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if alpha == 1.0 {
        return Ok(p_forward.to_vec());
    }
    if alpha == 0.0 {
        return Ok(p_backward.to_vec());
    }
    let scores = combined_scores(p_forward, p_backward, alpha);
    let beta: f64 = scores.iter().sum();
    if beta.is_nan() || beta <= 0.0 {
        return Err(Error::DegenerateCombination);
    }
    Ok(scores.into_iter().map(|s| s / beta).collect())
}

/// Argmax of the combined probability; ties fall back to the higher forward
/// proportion, then to the earlier first-seen sample.
pub fn select(distribution: &AnswerDistribution) -> Option<&CandidateAnswer> {
    distribution
        .entries
        .iter()
        .max_by(|a, b| {
            a.p_combined
                .partial_cmp(&b.p_combined)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(
                    a.p_forward
                        .partial_cmp(&b.p_forward)
                        .unwrap_or(std::cmp::Ordering::Equal),
                )
                .then(
                    b.candidate
                        .first_seen_index
                        .cmp(&a.candidate.first_seen_index),
                )
        })
        .map(|e| &e.candidate)
}

/// Maps answer surface text to a fixed-dimension embedding.
pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Vec<f64>;
}

/// Clamped cosine similarity of the two answers' embeddings. Zero-norm or
/// dimension-mismatched embeddings score 0.
pub fn soft_score(predicted: &AnswerValue, truth: &AnswerValue, embedder: &dyn Embedder) -> f64 {
    let a = embedder.embed(predicted.raw());
    let b = embedder.embed(truth.raw());
    if a.len() != b.len() || a.is_empty() {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).max(0.0)
}

/// Scores one backward prediction against the masked ground truth.
pub trait MatchScorer: Send + Sync {
    fn score(&self, predicted: &AnswerValue, truth: &AnswerValue) -> f64;
}

/// The 0/1 indicator under [`answers_equal`]. The default.
#[derive(Debug, Clone, Copy, Default)]
pub struct HardScorer;

impl MatchScorer for HardScorer {
    fn score(&self, predicted: &AnswerValue, truth: &AnswerValue) -> f64 {
        if answers_equal(predicted, truth) {
            1.0
        } else {
            0.0
        }
    }
}

/// Relaxation of the indicator to clamped cosine similarity; fractional
/// scores accumulate into the backward counts.
pub struct SoftScorer<E: Embedder> {
    embedder: E,
}

impl<E: Embedder> SoftScorer<E> {
    pub fn new(embedder: E) -> Self {
        SoftScorer { embedder }
    }
}

impl<E: Embedder> MatchScorer for SoftScorer<E> {
    fn score(&self, predicted: &AnswerValue, truth: &AnswerValue) -> f64 {
        soft_score(predicted, truth, &self.embedder)
    }
}
