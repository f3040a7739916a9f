//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! Every tolerance and threshold is pinned in the assertions themselves.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use fobar::core::{
    answers_equal, backward_counts, backward_distribution, combine, forward_distribution,
    AnswerValue, BackwardPredictions, HardScorer, MaskedQuestion, Question,
};
use fobar::llm::{CacheStore, Sampler, StubBackend};
use fobar::masker::{apply_answer_template, make_masked_questions};
use fobar::pipeline::{RunConfig, Runner};
use fobar::prompts::{build_backward_prompt, build_forward_prompt};

use fobar_testkit::{fixtures, oracle, SplitMix64};

fn repo_root() -> PathBuf {
    fixtures::repo_root()
}

fn fixture_runner(alpha: f64) -> Runner {
    let mut config = RunConfig::for_model(fixtures::FIXTURE_MODEL);
    config.m_f = fixtures::FIXTURE_M_F;
    config.m_b = fixtures::FIXTURE_M_B;
    config.alpha = alpha;
    let store = CacheStore::open_read_only(fixtures::repo_fixture_dir().join("cache")).unwrap();
    Runner::new(
        config,
        fixtures::repo_prompts_pack(),
        Sampler::new(store, None, 8),
        Arc::new(HardScorer),
    )
    .unwrap()
}

fn fixture_questions() -> Vec<Question> {
    fixtures::build_corpus(&fixtures::repo_prompts_pack()).questions
}

// --- criterion 1: aggregation matches exact brute force on 1000 instances ---

#[test]
fn criterion_1_aggregation_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = SplitMix64::new(0xacce97);
    let num = |v: u64| AnswerValue::numeric(v.to_string()).unwrap();

    for trial in 0..1000 {
        let k = 1 + rng.below(5) as usize; // |candidates| <= 5
        let n_masks = rng.below(5) as usize; // <= 4
        let m_b = 1 + rng.below(5) as usize; // <= 5

        // vote multiset over k distinct values, m_f <= 20
        let mut sample_values = Vec::new();
        for i in 0..k {
            let votes = 1 + rng.below(((20 - k) / k).max(1) as u64 + 1) as usize;
            for _ in 0..votes {
                sample_values.push(num(500 + 31 * i as u64));
            }
        }
        let m_f = sample_values.len();
        assert!(m_f <= 20);

        // masks with distinct ground truths
        let masks: Vec<MaskedQuestion> = (0..n_masks)
            .map(|j| MaskedQuestion {
                source_id: format!("t{trial}"),
                mask_index: j,
                masked_text: "uses x bolts".into(),
                ground_truth: num(7 + j as u64),
                mask_span: 5..6,
            })
            .collect();

        // random indicator grid, plus unextractable holes
        let mut predictions = BackwardPredictions::new();
        let mut plan: Vec<oracle::BackwardRecord> = Vec::new();
        for ci in 0..k {
            for mj in 0..n_masks {
                let preds: Vec<Option<AnswerValue>> = (0..m_b)
                    .map(|_| match rng.below(4) {
                        0 => Some(num(7 + mj as u64)), // correct
                        1 => None,                     // unextractable
                        _ => Some(num(9999)),          // wrong
                    })
                    .collect();
                predictions.insert((ci, mj), preds.clone());
                plan.push(((ci, mj), preds));
            }
        }

        // implementation path
        let forward = forward_distribution(&sample_values, m_f).unwrap();
        let z = backward_counts(k, &predictions, &masks, &HardScorer).unwrap();
        let p_f: Vec<f64> = forward.iter().map(|(_, p)| *p).collect();
        let p_b = backward_distribution(&z, 1e-8).unwrap();

        // oracle path: exact rationals from the same raw records
        let oracle_candidates = oracle::forward_oracle(&sample_values);
        let truths: Vec<AnswerValue> = masks.iter().map(|m| m.ground_truth.clone()).collect();
        let oracle_z = oracle::z_oracle(k, &plan, &truths);
        let oracle_p_b = oracle::backward_oracle(&oracle_z);

        assert_eq!(forward.len(), oracle_candidates.len());
        for i in 0..k {
            assert_eq!(
                forward[i].0.forward_votes as u64,
                oracle_candidates[i].votes
            );
            let expected = oracle::rational_to_f64(&oracle_candidates[i].p_forward);
            assert!((p_f[i] - expected).abs() <= 1e-12, "forward trial {trial}");
            assert_eq!(z[i], oracle_z[i] as f64, "z trial {trial}");
            let expected_b = oracle::rational_to_f64(&oracle_p_b[i]);
            assert!(
                (p_b[i] - expected_b).abs() <= 1e-12,
                "backward trial {trial}"
            );
        }

        for alpha in [0.0, 0.1, 0.5, 0.9, 1.0] {
            let combined = combine(&p_f, &p_b, alpha).unwrap();
            let expected = oracle::combine_oracle(&p_f, &p_b, alpha);
            for i in 0..k {
                assert!(
                    (combined[i] - expected[i]).abs() <= 1e-12,
                    "combine trial {trial} alpha {alpha}: {} vs {}",
                    combined[i],
                    expected[i]
                );
            }
        }
    }

    let elapsed = started.elapsed();
    assert!(
        elapsed < Duration::from_secs(5),
        "took {elapsed:?}, budget 5s"
    );
    println!(
        "criterion 1 (aggregation oracle equivalence, 1000 instances, <=1e-12): PASS ({elapsed:?})"
    );
}

// --- criterion 2: alpha endpoints match standalone implementations ---

#[tokio::test]
async fn criterion_2_endpoint_identities() {
    let questions = fixture_questions();
    let forward_runner = fixture_runner(1.0);
    let backward_runner = fixture_runner(0.0);
    let sampler_runner = fixture_runner(0.9); // for raw chain access

    for q in &questions {
        // alpha = 1: standalone majority vote over the extracted answers
        let result = forward_runner.run_question(q).await.unwrap();
        let request = |prompt: String, n: usize| {
            fobar::llm::SamplingRequest::new(prompt, fixtures::FIXTURE_MODEL.to_string(), n)
                .with_temperature(fixtures::FIXTURE_TEMPERATURE)
        };
        let forward_prompt = build_forward_prompt(&sampler_runner.pack, q);
        let chains = sampler_runner
            .sampler
            .sample(&request(forward_prompt, fixtures::FIXTURE_M_F))
            .await
            .unwrap();
        let extracted: Vec<AnswerValue> = chains
            .iter()
            .filter_map(|c| fobar::extract::extract_forward_answer(&c.raw_text, q.task_kind()))
            .collect();
        let majority = oracle::majority_vote(&extracted);
        match (&result.selected, &majority) {
            (Some(sel), Some(sc)) => assert!(
                answers_equal(&sel.value, sc),
                "{}: alpha=1 selection {} != standalone majority {}",
                q.id,
                sel.value.raw(),
                sc.raw()
            ),
            (None, None) => {}
            other => panic!("{}: alpha=1 presence mismatch {other:?}", q.id),
        }

        // alpha = 0: standalone backward argmax over independently
        // recounted recoveries
        let result = backward_runner.run_question(q).await.unwrap();
        let candidates = oracle::forward_oracle(&extracted);
        let masks = make_masked_questions(q);
        let skip = candidates.len() <= 1 || masks.is_empty();
        let mut z = vec![0u64; candidates.len()];
        if !skip {
            for (ci, cand) in candidates.iter().enumerate() {
                for mask in &masks {
                    let templated = apply_answer_template(&mask.masked_text, &cand.value);
                    let prompt = build_backward_prompt(&sampler_runner.pack, &templated);
                    let chains = sampler_runner
                        .sampler
                        .sample(&request(prompt, fixtures::FIXTURE_M_B))
                        .await
                        .unwrap();
                    for chain in &chains {
                        if let Some(v) = fobar::extract::extract_backward_value(&chain.raw_text) {
                            if oracle::oracle_equal(&v, &mask.ground_truth) {
                                z[ci] += 1;
                            }
                        }
                    }
                }
            }
        }
        let backward_pick = oracle::backward_argmax(&candidates, &z);
        match (&result.selected, &backward_pick) {
            (Some(sel), Some(bw)) => assert!(
                answers_equal(&sel.value, bw),
                "{}: alpha=0 selection {} != standalone backward argmax {}",
                q.id,
                sel.value.raw(),
                bw.raw()
            ),
            (None, None) => {}
            other => panic!("{}: alpha=0 presence mismatch {other:?}", q.id),
        }
    }
    println!("criterion 2 (alpha endpoints match standalone selectors, exact): PASS");
}

// --- criterion 3: masking fidelity on the worked example ---

#[test]
fn criterion_3_masking_fidelity() {
    let q = Question::new(
        "jim",
        fixtures::JIM_QUESTION,
        AnswerValue::numeric("36").unwrap(),
        None,
    )
    .unwrap();
    let masked = make_masked_questions(&q);
    assert_eq!(masked.len(), 3, "exactly three masked variants");

    let truths: Vec<&str> = masked.iter().map(|m| m.ground_truth.raw()).collect();
    assert_eq!(truths, vec!["2", "3", "4"]);

    let expect = [
        "Jim spends x hours watching TV and then decides to go to bed and reads for half as \
         long.  He does this 3 times a week.  How many hours does he spend on TV and reading \
         in 4 weeks?",
        "Jim spends 2 hours watching TV and then decides to go to bed and reads for half as \
         long.  He does this x times a week.  How many hours does he spend on TV and reading \
         in 4 weeks?",
        "Jim spends 2 hours watching TV and then decides to go to bed and reads for half as \
         long.  He does this 3 times a week.  How many hours does he spend on TV and reading \
         in x weeks?",
    ];
    for (m, want) in masked.iter().zip(expect) {
        assert_eq!(m.masked_text, want, "byte-exact modulo the mask symbol");
        // and substituting the truth back reproduces the original
        let restored = m.masked_text.replacen('x', m.ground_truth.raw(), 1);
        assert_eq!(restored, fixtures::JIM_QUESTION);
    }
    println!("criterion 3 (masking fidelity, 3 variants with truths 2/3/4, byte-exact): PASS");
}

// --- criterion 4: the answer-conditioning template is verbatim ---

#[test]
fn criterion_4_template_fidelity() {
    let masked = "He does this x times a week.";
    for candidate in ["36", "12"] {
        let templated = apply_answer_template(masked, &AnswerValue::numeric(candidate).unwrap());
        assert!(
            templated.contains("If we know the answer of the above question is"),
            "verbatim template prefix"
        );
        assert!(
            templated.ends_with("what is the value of unknown variable x?"),
            "verbatim template suffix"
        );
        assert!(templated.contains(&format!("question is {candidate},")));
    }
    println!("criterion 4 (answer template verbatim): PASS");
}

// --- criterion 5: end-to-end replay determinism through the binary ---

fn run_cli(args: &[&str], cwd: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_fobar"))
        .args(args)
        .current_dir(cwd)
        .env_remove("FOBAR_API_KEY")
        .env_remove("OPENAI_API_KEY")
        .env_remove("FOBAR_API_BASE")
        .output()
        .expect("binary runs")
}

fn replay_run_args(out: &str) -> Vec<&str> {
    vec![
        "run",
        "--dataset",
        "fixtures/replay20/dataset.jsonl",
        "--out",
        out,
        "--backend",
        "replay",
        "--fixtures",
        "fixtures/replay20/cache",
        "--model",
        fixtures::FIXTURE_MODEL,
        "--mf",
        "10",
        "--mb",
        "10",
    ]
}

#[test]
fn criterion_5_replay_determinism_and_golden_accuracy() {
    let started = Instant::now();
    let root = repo_root();
    let tmp = tempfile::tempdir().unwrap();
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");

    for out in [&out_a, &out_b] {
        let out_str = out.display().to_string();
        let output = run_cli(&replay_run_args(&out_str), &root);
        assert!(
            output.status.success(),
            "run failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
        let stdout = String::from_utf8_lossy(&output.stdout);
        assert!(
            stdout.contains("accuracy (combined, alpha=0.9): 0.8500 (17/20)"),
            "golden accuracy line missing from:\n{stdout}"
        );
    }

    let bytes_a = std::fs::read(out_a.join("results.jsonl")).unwrap();
    let bytes_b = std::fs::read(out_b.join("results.jsonl")).unwrap();
    assert_eq!(bytes_a, bytes_b, "results files are byte-identical");
    let manifest_a = std::fs::read(out_a.join("manifest.json")).unwrap();
    let manifest_b = std::fs::read(out_b.join("manifest.json")).unwrap();
    assert_eq!(manifest_a, manifest_b, "manifests are byte-identical");

    let elapsed = started.elapsed();
    assert!(
        elapsed < Duration::from_secs(10),
        "took {elapsed:?}, budget 10s"
    );
    println!(
        "criterion 5 (replay determinism, golden accuracy 17/20, no network, <10s): PASS ({elapsed:?})"
    );
}

// --- criterion 6: epsilon smoothing of all-zero counts is exactly uniform ---

#[test]
fn criterion_6_epsilon_smoothing_uniform() {
    for k in 1..=10usize {
        let p = backward_distribution(&vec![0.0; k], 1e-8).unwrap();
        for (i, v) in p.iter().enumerate() {
            assert!(
                (v - 1.0 / k as f64).abs() <= 1e-12,
                "k={k} entry {i}: {v} vs {}",
                1.0 / k as f64
            );
        }
    }
    println!("criterion 6 (all-zero counts smooth to uniform 1/k, k=1..10, <=1e-12): PASS");
}

// --- criterion 7: sweeps reproduce the endpoints from cache alone ---

#[tokio::test]
async fn criterion_7_sweep_consistency() {
    let root = repo_root();
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let out_str = out.display().to_string();

    let fixture_records = root.join("fixtures/replay20/cache/replay-model.ndjson");
    let before = std::fs::metadata(&fixture_records).unwrap().len();

    let output = run_cli(&replay_run_args(&out_str), &root);
    assert!(output.status.success());

    // m_b = 0 reduces to pure majority voting
    let run_dir = out.display().to_string();
    let sweep = run_cli(&["sweep", "--run", &run_dir, "--mb-grid", "0"], &root);
    assert!(
        sweep.status.success(),
        "{}",
        String::from_utf8_lossy(&sweep.stderr)
    );
    let csv = String::from_utf8_lossy(&sweep.stdout);
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("dataset,alpha,m_b,accuracy"),
        "pinned CSV header"
    );
    let row = lines.next().expect("one sweep row");
    assert!(row.ends_with(",0,0.800000"), "m_b=0 row {row:?}");

    // the same number computed by a standalone majority-vote scorer
    let questions = fixture_questions();
    let runner = fixture_runner(0.9);
    let mut sc_correct = 0;
    for q in &questions {
        let prompt = build_forward_prompt(&runner.pack, q);
        let req = fobar::llm::SamplingRequest::new(
            prompt,
            fixtures::FIXTURE_MODEL.to_string(),
            fixtures::FIXTURE_M_F,
        )
        .with_temperature(fixtures::FIXTURE_TEMPERATURE);
        let chains = runner.sampler.sample(&req).await.unwrap();
        let extracted: Vec<AnswerValue> = chains
            .iter()
            .filter_map(|c| fobar::extract::extract_forward_answer(&c.raw_text, q.task_kind()))
            .collect();
        if let Some(pick) = oracle::majority_vote(&extracted) {
            if answers_equal(&pick, &q.gold_answer) {
                sc_correct += 1;
            }
        }
    }
    assert_eq!(sc_correct, fixtures::EXPECTED_CORRECT_FORWARD_ONLY);
    assert!(row.contains(&format!(
        ",0,{:.6}",
        sc_correct as f64 / questions.len() as f64
    )));

    // an 11-point alpha grid produces 11 rows, still without any backend
    let sweep = run_cli(
        &[
            "sweep",
            "--run",
            &run_dir,
            "--alpha-grid",
            "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0",
        ],
        &root,
    );
    assert!(sweep.status.success());
    let csv = String::from_utf8_lossy(&sweep.stdout);
    assert_eq!(csv.lines().count(), 12, "header + 11 rows");
    let alpha1_row = csv.lines().last().unwrap();
    assert!(
        alpha1_row.ends_with("1,10,0.800000"),
        "alpha=1 row equals majority voting"
    );
    let alpha0_row = csv.lines().nth(1).unwrap();
    let backward_accuracy =
        fixtures::EXPECTED_CORRECT_BACKWARD_ONLY as f64 / fixtures::QUESTION_COUNT as f64;
    assert!(
        alpha0_row.ends_with(&format!("0,10,{backward_accuracy:.6}")),
        "alpha=0 row equals the backward-only accuracy: {alpha0_row:?}"
    );

    // fixtures untouched: a replay sweep cannot write or fetch
    let after = std::fs::metadata(&fixture_records).unwrap().len();
    assert_eq!(before, after, "fixture records unchanged by sweeps");
    println!("criterion 7 (sweep m_b=0 reproduces majority voting; zero live requests): PASS");
}

// --- criterion 8: small live smoke test against a configured endpoint ---

mod smoke_server {
    use axum::extract::State;
    use axum::http::StatusCode;
    use axum::routing::{get, post};
    use axum::{Json, Router};
    use serde_json::{json, Value};
    use std::net::SocketAddr;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    #[derive(Clone, Default)]
    pub struct Served(pub Arc<AtomicUsize>);

    async fn completions(
        State(served): State<Served>,
        Json(body): Json<Value>,
    ) -> (StatusCode, Json<Value>) {
        let n = body["n"].as_u64().unwrap_or(1);
        let prompt = body["messages"][0]["content"].as_str().unwrap_or_default();
        let backward = prompt.contains("value of unknown variable x");
        let choices: Vec<Value> = (0..n)
            .map(|i| {
                let text = if backward {
                    format!(
                        "Reversing the relation step by step. The value of x is {}.",
                        i + 2
                    )
                } else {
                    format!(
                        "Adding everything step by step. The answer is {}.",
                        30 + (i % 3)
                    )
                };
                served.0.fetch_add(1, Ordering::SeqCst);
                json!({"index": i, "message": {"role": "assistant", "content": text}})
            })
            .collect();
        (StatusCode::OK, Json(json!({"choices": choices})))
    }

    pub async fn spawn() -> (SocketAddr, Served) {
        let served = Served::default();
        let app = Router::new()
            .route("/v1/chat/completions", post(completions))
            .route("/v1/models", get(|| async { Json(json!({"data": []})) }))
            .with_state(served.clone());
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(async move {
            axum::serve(listener, app).await.unwrap();
        });
        (addr, served)
    }
}

#[tokio::test]
async fn criterion_8_live_smoke() {
    // full-scale accuracy reproduction needs large-volume access to
    // proprietary models; the substitute is a 10-question smoke run with
    // m_f = m_b = 5 against whatever chat-completion endpoint is
    // configured. With FOBAR_SMOKE_LIVE=1 and credentials in the
    // environment it exercises that endpoint; otherwise a local
    // OpenAI-compatible server keeps the full live path covered.
    let external = std::env::var("FOBAR_SMOKE_LIVE").is_ok_and(|v| v == "1");
    let backend = if external {
        fobar::llm::LiveBackend::from_env().expect("FOBAR_SMOKE_LIVE=1 needs FOBAR_API_KEY")
    } else {
        let (addr, _served) = smoke_server::spawn().await;
        fobar::llm::LiveBackend::new(format!("http://{addr}"), "smoke-key")
    };

    let mut config =
        RunConfig::for_model(std::env::var("FOBAR_MODEL").unwrap_or_else(|_| "smoke-model".into()));
    config.m_f = 5;
    config.m_b = 5;
    let tmp = tempfile::tempdir().unwrap();
    let sampler = Sampler::new(
        CacheStore::open(tmp.path().join("cache")).unwrap(),
        Some(Arc::new(backend)),
        4,
    );
    let runner = Runner::new(
        config,
        fixtures::repo_prompts_pack(),
        sampler,
        Arc::new(HardScorer),
    )
    .unwrap();

    let questions: Vec<Question> = fixture_questions().into_iter().take(10).collect();
    let mut selected = 0;
    for q in &questions {
        let result = runner.run_question(q).await.unwrap_or_else(|e| {
            panic!("smoke run errored on {}: {e}", q.id);
        });
        if !result.distribution.entries.is_empty() {
            for (label, sum) in [
                (
                    "forward",
                    result
                        .distribution
                        .entries
                        .iter()
                        .map(|e| e.p_forward)
                        .sum::<f64>(),
                ),
                (
                    "backward",
                    result
                        .distribution
                        .entries
                        .iter()
                        .map(|e| e.p_backward)
                        .sum::<f64>(),
                ),
                (
                    "combined",
                    result
                        .distribution
                        .entries
                        .iter()
                        .map(|e| e.p_combined)
                        .sum::<f64>(),
                ),
            ] {
                assert!((sum - 1.0).abs() <= 1e-9, "{}: {label} sums to {sum}", q.id);
            }
        }
        if result.selected.is_some() {
            selected += 1;
        }
    }
    assert!(
        selected >= 8,
        "selected answers for only {selected}/10 questions"
    );
    println!(
        "criterion 8 (live smoke, 10 questions, m_f=m_b=5, {}): PASS ({selected}/10 selected)",
        if external {
            "configured endpoint"
        } else {
            "bundled local endpoint"
        }
    );
}

// sanity check for the stub-backed path used throughout the suite
#[tokio::test]
async fn stub_backend_counts_requests() {
    let stub = Arc::new(StubBackend::new());
    stub.script("p", vec!["The answer is 1.".into(); 3]);
    let dir = tempfile::tempdir().unwrap();
    let sampler = Sampler::new(CacheStore::open(dir.path()).unwrap(), Some(stub.clone()), 2);
    let req = fobar::llm::SamplingRequest::new("p", "m", 3);
    sampler.sample(&req).await.unwrap();
    assert_eq!(stub.request_count(), 3);
}
