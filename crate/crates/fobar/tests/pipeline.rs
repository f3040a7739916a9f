//! End-to-end pipeline behavior against scripted and replayed backends.

use std::sync::Arc;

use fobar::core::{AnswerValue, HardScorer, Question};
use fobar::llm::{CacheStore, Sampler, StubBackend};
use fobar::pipeline::{RunConfig, Runner};
use fobar::Error;

use fobar_testkit::fixtures;

fn fixture_config() -> RunConfig {
    let mut config = RunConfig::for_model(fixtures::FIXTURE_MODEL);
    config.m_f = fixtures::FIXTURE_M_F;
    config.m_b = fixtures::FIXTURE_M_B;
    config
}

/// Runner backed by the in-memory corpus via a scripted stub.
fn stub_runner(cache_dir: &std::path::Path) -> (Runner, Arc<StubBackend>) {
    let pack = fixtures::repo_prompts_pack();
    let corpus = fixtures::build_corpus(&pack);
    let stub = Arc::new(StubBackend::new());
    for (prompt, texts) in &corpus.prompts {
        stub.script(prompt.clone(), texts.clone());
    }
    let sampler = Sampler::new(CacheStore::open(cache_dir).unwrap(), Some(stub.clone()), 8);
    let runner = Runner::new(fixture_config(), pack, sampler, Arc::new(HardScorer)).unwrap();
    (runner, stub)
}

/// Runner replaying the committed fixture directory, no backend at all.
fn replay_runner() -> Runner {
    let pack = fixtures::repo_prompts_pack();
    let store = CacheStore::open_read_only(fixtures::repo_fixture_dir().join("cache")).unwrap();
    let sampler = Sampler::new(store, None, 8);
    Runner::new(fixture_config(), pack, sampler, Arc::new(HardScorer)).unwrap()
}

fn corpus_questions() -> Vec<Question> {
    fixtures::build_corpus(&fixtures::repo_prompts_pack()).questions
}

#[tokio::test]
async fn majority_with_backward_confirmation_selects_the_majority() {
    let dir = tempfile::tempdir().unwrap();
    let (runner, _) = stub_runner(dir.path());
    let questions = corpus_questions();
    let jim = &questions[0];
    assert_eq!(jim.id, "q01");

    let result = runner.run_question(jim).await.unwrap();
    let selected = result.selected.as_ref().unwrap();
    assert_eq!(selected.value.raw(), "36");
    assert!(result.correct);
    assert!(!result.unanswered);
    assert!(!result.short_circuit);
    assert_eq!(result.distribution.n_masks, 3);
    assert_eq!(result.distribution.entries.len(), 2);
    // backward fan-out covered every (candidate, mask) pair
    assert_eq!(result.backward_refs.len(), 6);
    let z36 = result.distribution.entries[0].z_backward;
    let z12 = result.distribution.entries[1].z_backward;
    assert_eq!(z36, 24.0);
    assert_eq!(z12, 1.0);
}

#[tokio::test]
async fn numberless_question_reduces_to_forward_argmax() {
    let dir = tempfile::tempdir().unwrap();
    let (runner, _) = stub_runner(dir.path());
    let questions = corpus_questions();
    let q3 = &questions[2];
    assert_eq!(q3.id, "q03");

    let result = runner.run_question(q3).await.unwrap();
    assert_eq!(result.distribution.n_masks, 0);
    for entry in &result.distribution.entries {
        assert_eq!(entry.z_backward, 0.0);
        assert_eq!(entry.p_backward, 0.5);
    }
    assert_eq!(result.selected.unwrap().value.raw(), "3");
    assert!(result.correct);
}

#[tokio::test]
async fn unanimous_forward_short_circuits_backward_sampling() {
    let dir = tempfile::tempdir().unwrap();
    let (runner, stub) = stub_runner(dir.path());
    let questions = corpus_questions();
    let q4 = &questions[3];
    assert_eq!(q4.id, "q04");

    let result = runner.run_question(q4).await.unwrap();
    assert!(result.short_circuit);
    assert!(result.correct);
    assert!(result.backward_refs.is_empty());
    // only the m_f forward samples were ever requested
    assert_eq!(stub.request_count(), fixtures::FIXTURE_M_F);
    assert_eq!(result.distribution.entries.len(), 1);
    assert_eq!(result.distribution.entries[0].p_combined, 1.0);
}

#[tokio::test]
async fn short_circuit_can_be_disabled_for_faithful_runs() {
    let question = Question::new(
        "eggs",
        "A carton holds 6 eggs. How many eggs are in 2 cartons?",
        AnswerValue::numeric("12").unwrap(),
        None,
    )
    .unwrap();
    let pack = fixtures::repo_prompts_pack();
    let mut config = RunConfig::for_model("stub-model");
    config.m_f = 3;
    config.m_b = 2;
    config.skip_backward_when_unanimous = false;

    let stub = Arc::new(StubBackend::new());
    let forward_prompt = fobar::prompts::build_forward_prompt(&pack, &question);
    stub.script(
        forward_prompt,
        vec![
            "The answer is 12.".into(),
            "So the answer is 12.".into(),
            "Total: the answer is 12.".into(),
        ],
    );
    for mask in fobar::masker::make_masked_questions(&question) {
        let templated = fobar::masker::apply_answer_template(
            &mask.masked_text,
            &AnswerValue::numeric("12").unwrap(),
        );
        let prompt = fobar::prompts::build_backward_prompt(&pack, &templated);
        let truth = mask.ground_truth.raw().to_string();
        stub.script(
            prompt,
            vec![
                format!("The value of x is {truth}."),
                "The value of x is 999.".into(),
            ],
        );
    }

    let dir = tempfile::tempdir().unwrap();
    let sampler = Sampler::new(CacheStore::open(dir.path()).unwrap(), Some(stub.clone()), 4);
    let runner = Runner::new(config, pack, sampler, Arc::new(HardScorer)).unwrap();
    let result = runner.run_question(&question).await.unwrap();
    assert!(!result.short_circuit);
    assert_eq!(result.backward_refs.len(), 2);
    assert_eq!(result.distribution.entries[0].z_backward, 2.0);
    assert!(result.correct);
}

#[tokio::test]
async fn unextractable_forward_chains_mean_unanswered() {
    let dir = tempfile::tempdir().unwrap();
    let (runner, _) = stub_runner(dir.path());
    let questions = corpus_questions();
    let q5 = &questions[4];
    assert_eq!(q5.id, "q05");

    let result = runner.run_question(q5).await.unwrap();
    assert!(result.unanswered);
    assert!(!result.correct);
    assert!(result.selected.is_none());
    assert!(result.distribution.entries.is_empty());
    assert_eq!(result.unextracted_forward, fixtures::FIXTURE_M_F);
}

#[tokio::test]
async fn replay_is_deterministic_across_runs() {
    let runner = replay_runner();
    let questions = corpus_questions();
    let mut first = Vec::new();
    for q in &questions {
        first.push(serde_json::to_string(&runner.run_question(q).await.unwrap()).unwrap());
    }
    let runner = replay_runner();
    for (q, expected) in questions.iter().zip(&first) {
        let again = serde_json::to_string(&runner.run_question(q).await.unwrap()).unwrap();
        assert_eq!(
            &again, expected,
            "question {} drifted between replays",
            q.id
        );
    }
}

#[tokio::test]
async fn replay_accuracy_matches_the_constructed_expectation() {
    let runner = replay_runner();
    let mut correct = 0;
    for q in &corpus_questions() {
        if runner.run_question(q).await.unwrap().correct {
            correct += 1;
        }
    }
    assert_eq!(correct, fixtures::EXPECTED_CORRECT_COMBINED);
}

#[tokio::test]
async fn reaggregation_recovers_endpoint_and_budget_behavior() {
    let runner = replay_runner();
    let questions = corpus_questions();
    let cells = runner
        .reaggregate(&questions, &[0.0, 0.9, 1.0], &[0, fixtures::FIXTURE_M_B])
        .await
        .unwrap();
    assert_eq!(cells.len(), 6);

    let cell = |alpha: f64, m_b: usize| {
        cells
            .iter()
            .find(|c| c.alpha == alpha && c.m_b == m_b)
            .unwrap_or_else(|| panic!("missing cell ({alpha}, {m_b})"))
    };
    // with no backward samples every alpha reduces to majority voting
    for alpha in [0.0, 0.9, 1.0] {
        assert_eq!(
            cell(alpha, 0).correct,
            fixtures::EXPECTED_CORRECT_FORWARD_ONLY
        );
    }
    assert_eq!(
        cell(1.0, fixtures::FIXTURE_M_B).correct,
        fixtures::EXPECTED_CORRECT_FORWARD_ONLY
    );
    assert_eq!(
        cell(0.9, fixtures::FIXTURE_M_B).correct,
        fixtures::EXPECTED_CORRECT_COMBINED
    );
    assert_eq!(
        cell(0.0, fixtures::FIXTURE_M_B).correct,
        fixtures::EXPECTED_CORRECT_BACKWARD_ONLY
    );
    for c in &cells {
        assert_eq!(c.total, fixtures::QUESTION_COUNT);
    }
}

#[tokio::test]
async fn sweep_beyond_cached_budget_names_the_shortfall() {
    let runner = replay_runner();
    let questions = corpus_questions();
    let err = runner
        .reaggregate(&questions[..2], &[0.9], &[fixtures::FIXTURE_M_B + 2])
        .await
        .unwrap_err();
    match err {
        Error::CacheMiss {
            sample_index,
            model_id,
            ..
        } => {
            assert_eq!(sample_index, fixtures::FIXTURE_M_B);
            assert_eq!(model_id, fixtures::FIXTURE_MODEL);
        }
        other => panic!("expected CacheMiss, got {other}"),
    }
}

#[tokio::test]
async fn extraction_goldens_hold_for_every_fixture_chain() {
    let fixture_dir = fixtures::repo_fixture_dir();
    let store = CacheStore::open_read_only(fixture_dir.join("cache")).unwrap();
    let goldens = std::fs::read_to_string(fixture_dir.join("goldens.tsv")).unwrap();

    let mut checked = 0;
    for line in goldens.lines() {
        let mut parts = line.split('\t');
        let digest = parts.next().unwrap();
        let mode = parts.next().unwrap();
        let expected = parts.next().unwrap();
        let entry = store
            .get(fixtures::FIXTURE_MODEL, digest)
            .unwrap()
            .unwrap_or_else(|| panic!("golden references missing record {digest}"));
        let got = match mode {
            "forward-numeric" => fobar::extract::extract_forward_answer(
                &entry.raw_text,
                fobar::core::TaskKind::Numeric,
            ),
            "forward-choice" => fobar::extract::extract_forward_answer(
                &entry.raw_text,
                fobar::core::TaskKind::Choice,
            ),
            "backward" => fobar::extract::extract_backward_value(&entry.raw_text),
            other => panic!("unknown golden mode {other}"),
        };
        let rendered = match got {
            None => "absent".to_string(),
            Some(AnswerValue::Numeric { value, .. }) => fobar::numeric::to_decimal_string(&value),
            Some(AnswerValue::Choice { label, .. }) => label.to_string(),
            Some(AnswerValue::Text { raw }) => raw,
        };
        assert_eq!(
            rendered, expected,
            "digest {digest} ({mode}): {:?}",
            entry.raw_text
        );
        checked += 1;
    }
    assert_eq!(checked, 1110, "golden file covers every fixture record");
}

#[tokio::test]
async fn config_validation_rejects_bad_knobs() {
    let pack = fixtures::repo_prompts_pack();
    let dir = tempfile::tempdir().unwrap();
    let make = |mutate: fn(&mut RunConfig)| {
        let mut config = RunConfig::for_model("m");
        mutate(&mut config);
        let sampler = Sampler::new(CacheStore::open(dir.path()).unwrap(), None, 1);
        Runner::new(config, pack.clone(), sampler, Arc::new(HardScorer)).err()
    };
    assert!(make(|c| c.alpha = 1.2).is_some());
    assert!(make(|c| c.epsilon = 0.0).is_some());
    assert!(make(|c| c.m_f = 0).is_some());
    assert!(make(|c| c.temperature = -0.1).is_some());
    assert!(make(|_| {}).is_none());
}

#[test]
fn model_defaults_follow_the_model_family() {
    let davinci = RunConfig::for_model("text-davinci-003");
    assert_eq!((davinci.m_f, davinci.m_b), (40, 20));
    let turbo = RunConfig::for_model("gpt-3.5-turbo");
    assert_eq!((turbo.m_f, turbo.m_b), (10, 10));
    assert_eq!(davinci.alpha, 0.9);
    assert_eq!(davinci.epsilon, 1e-8);
    assert_eq!(davinci.temperature, 0.7);
}
