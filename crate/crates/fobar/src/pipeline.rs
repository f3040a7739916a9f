//! Per-question orchestration and offline re-aggregation.
//!
//! One question runs as: sample forward chains, extract and deduplicate
//! answers, build the masked variants, fan out backward sampling over every
//! (candidate, mask) pair, count recoveries, combine the distributions,
//! select. Because every sample is cache-keyed, the same machinery re-run
//! against a warm cache recomputes any (alpha, m_b) cell without a single
//! live request.

use std::sync::Arc;
use std::time::{Duration, Instant};

use futures::stream::{self, StreamExt, TryStreamExt};
use serde::{Deserialize, Serialize};

use crate::core::{
    answers_equal, backward_counts, forward_distribution, AnswerDistribution, AnswerValue,
    BackwardPredictions, CandidateAnswer, MaskedQuestion, MatchScorer, Question, SampledChain,
};
use crate::error::{Error, Result};
use crate::extract::{extract_backward_value, extract_forward_answer};
use crate::llm::{Sampler, SamplingRequest};
use crate::masker::{apply_answer_template, make_masked_questions};
use crate::prompts::{build_backward_prompt, build_forward_prompt, PromptPack};

/// Knobs for one evaluation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    /// Forward weight in the geometric combination; 1 is pure majority
    /// voting, 0 is pure backward verification.
    pub alpha: f64,
    /// Additive smoothing for the backward counts.
    pub epsilon: f64,
    /// Forward chains per question.
    pub m_f: usize,
    /// Backward chains per (candidate, mask) pair.
    pub m_b: usize,
    pub temperature: f64,
    pub prompt_pack: String,
    pub model_id: String,
    pub max_tokens: usize,
    pub stop_sequences: Vec<String>,
    /// Upper bound on in-flight backend calls.
    pub parallelism: usize,
    /// Skip backward sampling when forward sampling is unanimous; the
    /// selection is already determined, so this only saves samples. Turn
    /// off to force the full procedure.
    pub skip_backward_when_unanimous: bool,
}

impl RunConfig {
    /// Defaults, scaled to the model family: 40/20 chains for davinci-class
    /// completion models, 10/10 for chat-class ones.
    pub fn for_model(model_id: impl Into<String>) -> Self {
        let model_id = model_id.into();
        let (m_f, m_b) = if model_id.contains("davinci") {
            (40, 20)
        } else {
            (10, 10)
        };
        RunConfig {
            alpha: 0.9,
            epsilon: 1e-8,
            m_f,
            m_b,
            temperature: 0.7,
            prompt_pack: "cot".to_string(),
            model_id,
            max_tokens: 1024,
            stop_sequences: vec!["Question:".to_string()],
            parallelism: 4,
            skip_backward_when_unanimous: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidAlpha(self.alpha));
        }
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return Err(Error::InvalidEpsilon(self.epsilon));
        }
        if self.m_f == 0 || self.m_b == 0 {
            return Err(Error::InvalidConfig(
                "m_f and m_b must be at least 1".into(),
            ));
        }
        if self.temperature < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "temperature must be non-negative, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Provenance pointer to one backward sampling request.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackwardRef {
    pub candidate_index: usize,
    pub mask_index: usize,
    pub prompt_digest: String,
}

/// Everything recorded for one evaluated question.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuestionResult {
    pub question_id: String,
    pub gold: AnswerValue,
    pub distribution: AnswerDistribution,
    pub selected: Option<CandidateAnswer>,
    pub correct: bool,
    /// No forward chain yielded an extractable answer; scored incorrect.
    pub unanswered: bool,
    /// Backward sampling was skipped because forward voting was unanimous.
    pub short_circuit: bool,
    pub forward_prompt_digest: String,
    pub backward_refs: Vec<BackwardRef>,
    pub unextracted_forward: usize,
    /// Wall-clock time; never serialized so replay output is byte-stable.
    #[serde(skip)]
    pub elapsed: Option<Duration>,
}

/// One accuracy cell of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub alpha: f64,
    pub m_b: usize,
    pub correct: usize,
    pub total: usize,
}

impl SweepCell {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

/// Raw per-question material, gathered once and aggregated as many times as
/// needed (full run, alpha sweep, backward-budget sweep).
pub struct GatheredQuestion {
    pub question: Question,
    pub forward_chains: Vec<SampledChain>,
    pub extracted: Vec<AnswerValue>,
    pub unextracted_forward: usize,
    pub masks: Vec<MaskedQuestion>,
    /// Chains per (candidate index, mask index); inner vectors are in
    /// sample-index order and sized to the gathered m_b.
    pub backward_chains: Vec<((usize, usize), Vec<SampledChain>)>,
    pub forward_prompt_digest: String,
    pub short_circuit: bool,
}

pub struct Runner {
    pub config: RunConfig,
    pub pack: PromptPack,
    pub sampler: Sampler,
    pub scorer: Arc<dyn MatchScorer>,
}

impl Runner {
    pub fn new(
        config: RunConfig,
        pack: PromptPack,
        sampler: Sampler,
        scorer: Arc<dyn MatchScorer>,
    ) -> Result<Self> {
        config.validate()?;
        Ok(Runner {
            config,
            pack,
            sampler,
            scorer,
        })
    }

    fn request(&self, prompt: String, num_samples: usize) -> SamplingRequest {
        SamplingRequest::new(prompt, self.config.model_id.clone(), num_samples)
            .with_temperature(self.config.temperature)
            .with_max_tokens(self.config.max_tokens)
            .with_stop_sequences(self.config.stop_sequences.clone())
    }

    /// Run the full procedure for one question at the configured alpha and
    /// backward budget.
    pub async fn run_question(&self, question: &Question) -> Result<QuestionResult> {
        let started = Instant::now();
        let gathered = self.gather(question, self.config.m_b).await?;
        let mut result = aggregate(
            &gathered,
            self.config.alpha,
            self.config.epsilon,
            self.config.m_b,
            self.scorer.as_ref(),
        )?;
        result.elapsed = Some(started.elapsed());
        Ok(result)
    }

    /// Sample (or replay) everything needed to aggregate `question` at any
    /// backward budget up to `m_b`.
    pub async fn gather(&self, question: &Question, m_b: usize) -> Result<GatheredQuestion> {
        let forward_prompt = build_forward_prompt(&self.pack, question);
        let forward_request = self.request(forward_prompt, self.config.m_f);
        let mut forward_chains = self.sampler.sample(&forward_request).await?;
        let forward_prompt_digest = forward_chains
            .first()
            .map(|c| c.prompt_digest.clone())
            .unwrap_or_default();

        let kind = question.task_kind();
        for chain in &mut forward_chains {
            chain.prediction = extract_forward_answer(&chain.raw_text, kind);
        }
        let extracted: Vec<AnswerValue> = forward_chains
            .iter()
            .filter_map(|c| c.prediction.clone())
            .collect();
        let unextracted_forward = forward_chains.len() - extracted.len();

        let masks = make_masked_questions(question);

        let candidates = if extracted.is_empty() {
            Vec::new()
        } else {
            forward_distribution(&extracted, extracted.len())?
        };

        let short_circuit = candidates.len() == 1 && self.config.skip_backward_when_unanimous;
        let mut backward_chains = Vec::new();
        if !short_circuit && !candidates.is_empty() && !masks.is_empty() && m_b > 0 {
            let pairs: Vec<(usize, usize)> = (0..candidates.len())
                .flat_map(|ci| (0..masks.len()).map(move |mj| (ci, mj)))
                .collect();
            let mut fetched: Vec<((usize, usize), Vec<SampledChain>)> =
                stream::iter(pairs.into_iter().map(|(ci, mj)| {
                    let templated =
                        apply_answer_template(&masks[mj].masked_text, &candidates[ci].0.value);
                    let prompt = build_backward_prompt(&self.pack, &templated);
                    let request = self.request(prompt, m_b);
                    async move {
                        let mut chains = self.sampler.sample(&request).await?;
                        for chain in &mut chains {
                            chain.prediction = extract_backward_value(&chain.raw_text);
                        }
                        Ok::<_, Error>(((ci, mj), chains))
                    }
                }))
                .buffer_unordered(self.config.parallelism.max(1))
                .try_collect()
                .await?;
            fetched.sort_by_key(|(key, _)| *key);
            backward_chains = fetched;
        }

        Ok(GatheredQuestion {
            question: question.clone(),
            forward_chains,
            extracted,
            unextracted_forward,
            masks,
            backward_chains,
            forward_prompt_digest,
            short_circuit,
        })
    }

    /// Recompute accuracy for every (alpha, m_b) pair in the grids using
    /// cached samples only. The gathered backward budget is max(mb_grid),
    /// so a grid that exceeds what the cache holds fails with the exact
    /// shortfall rather than going to the network.
    pub async fn reaggregate(
        &self,
        questions: &[Question],
        alpha_grid: &[f64],
        mb_grid: &[usize],
    ) -> Result<Vec<SweepCell>> {
        let alphas: Vec<f64> = if alpha_grid.is_empty() {
            vec![self.config.alpha]
        } else {
            alpha_grid.to_vec()
        };
        let mbs: Vec<usize> = if mb_grid.is_empty() {
            vec![self.config.m_b]
        } else {
            mb_grid.to_vec()
        };
        let gather_mb = mbs.iter().copied().max().unwrap_or(0);

        let mut cells: Vec<SweepCell> = mbs
            .iter()
            .flat_map(|&m_b| {
                alphas.iter().map(move |&alpha| SweepCell {
                    alpha,
                    m_b,
                    correct: 0,
                    total: 0,
                })
            })
            .collect();

        for question in questions {
            let gathered = self.gather(question, gather_mb).await?;
            for cell in &mut cells {
                let result = aggregate(
                    &gathered,
                    cell.alpha,
                    self.config.epsilon,
                    cell.m_b,
                    self.scorer.as_ref(),
                )?;
                cell.total += 1;
                if result.correct {
                    cell.correct += 1;
                }
            }
        }
        Ok(cells)
    }
}

/// Aggregate gathered samples at a given alpha and backward budget
/// `m_b_used <= gathered m_b` (prefix of the cached sample indices).
pub fn aggregate(
    gathered: &GatheredQuestion,
    alpha: f64,
    epsilon: f64,
    m_b_used: usize,
    scorer: &dyn MatchScorer,
) -> Result<QuestionResult> {
    let question = &gathered.question;
    let n_masks = gathered.masks.len();

    if gathered.extracted.is_empty() {
        return Ok(QuestionResult {
            question_id: question.id.clone(),
            gold: question.gold_answer.clone(),
            distribution: AnswerDistribution::empty(alpha, epsilon, m_b_used, n_masks),
            selected: None,
            correct: false,
            unanswered: true,
            short_circuit: false,
            forward_prompt_digest: gathered.forward_prompt_digest.clone(),
            backward_refs: Vec::new(),
            unextracted_forward: gathered.unextracted_forward,
            elapsed: None,
        });
    }

    let forward = forward_distribution(&gathered.extracted, gathered.extracted.len())?;

    let mut predictions = BackwardPredictions::new();
    let mut backward_refs = Vec::new();
    for ((ci, mj), chains) in &gathered.backward_chains {
        if m_b_used > chains.len() {
            return Err(Error::MbShortfall {
                requested: m_b_used,
                available: chains.len(),
                question: question.id.clone(),
                candidate: *ci,
                mask: *mj,
            });
        }
        backward_refs.push(BackwardRef {
            candidate_index: *ci,
            mask_index: *mj,
            prompt_digest: chains
                .first()
                .map(|c| c.prompt_digest.clone())
                .unwrap_or_default(),
        });
        predictions.insert(
            (*ci, *mj),
            chains[..m_b_used]
                .iter()
                .map(|c| c.prediction.clone())
                .collect(),
        );
    }

    let z = backward_counts(forward.len(), &predictions, &gathered.masks, scorer)?;
    let distribution = AnswerDistribution::build(forward, z, alpha, epsilon, m_b_used, n_masks)?;
    let selected = distribution.select().cloned();
    let correct = selected
        .as_ref()
        .map(|c| answers_equal(&c.value, &question.gold_answer))
        .unwrap_or(false);

    Ok(QuestionResult {
        question_id: question.id.clone(),
        gold: question.gold_answer.clone(),
        distribution,
        selected,
        correct,
        unanswered: false,
        short_circuit: gathered.short_circuit,
        forward_prompt_digest: gathered.forward_prompt_digest.clone(),
        backward_refs,
        unextracted_forward: gathered.unextracted_forward,
        elapsed: None,
    })
}
