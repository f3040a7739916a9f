//! The bundled 20-question replay fixture set.
//!
//! Every chain text is synthesized deterministically from a hand-written
//! plan, so the expected selection of every question — and therefore the
//! golden accuracy of the whole set — is known by construction, not by
//! running the pipeline. The plan is self-checked against the exact-math
//! oracle before anything is written.

use std::collections::BTreeMap;
use std::path::Path;

use fobar::core::{AnswerValue, ChoiceOption, Question, TaskKind};
use fobar::llm::{cache_digest, CacheEntry, CacheStore};
use fobar::masker::{apply_answer_template, make_masked_questions};
use fobar::numeric;
use fobar::prompts::{build_backward_prompt, build_forward_prompt, PromptPack};

use crate::oracle;

pub const FIXTURE_MODEL: &str = "replay-model";
pub const FIXTURE_TEMPERATURE: f64 = 0.7;
pub const FIXTURE_M_F: usize = 10;
pub const FIXTURE_M_B: usize = 10;
const FIXTURE_CREATED_AT: u64 = 1_700_000_000;

/// Expected correct counts over the 20 questions, by construction.
pub const EXPECTED_CORRECT_COMBINED: usize = 17;
pub const EXPECTED_CORRECT_FORWARD_ONLY: usize = 16;
pub const EXPECTED_CORRECT_BACKWARD_ONLY: usize = 17;
pub const QUESTION_COUNT: usize = 20;

/// The worked TV-and-reading example: three plain numbers, so exactly three
/// masked variants.
pub const JIM_QUESTION: &str = "Jim spends 2 hours watching TV and then decides to go to bed \
and reads for half as long.  He does this 3 times a week.  How many hours does he spend on TV \
and reading in 4 weeks?";

#[derive(Debug, Clone)]
pub struct PlannedQuestion {
    pub id: &'static str,
    pub text: &'static str,
    /// Numeric surface form, or a bare choice label for option questions.
    pub gold: &'static str,
    pub options: Option<&'static [(&'static str, &'static str)]>,
    /// Blocks of identical forward answers in sample order; `None` answers
    /// are chains that defeat extraction.
    pub forward_votes: &'static [(Option<&'static str>, usize)],
    /// Per distinct candidate (first-seen order), per mask: how many of the
    /// m_b backward chains recover the masked value. `None` means no
    /// backward sampling happens (unanimous, unanswered, or numberless).
    pub backward_correct: Option<&'static [&'static [usize]]>,
    /// Expected selections; `None` marks an unanswered question.
    pub expect_combined: Option<&'static str>,
    pub expect_forward_only: Option<&'static str>,
    pub expect_backward_only: Option<&'static str>,
}

pub fn plan() -> Vec<PlannedQuestion> {
    vec![
        // majority right, backward confirms; the canonical worked example
        PlannedQuestion {
            id: "q01",
            text: JIM_QUESTION,
            gold: "36",
            options: None,
            forward_votes: &[(Some("36"), 6), (Some("12"), 4)],
            backward_correct: Some(&[&[8, 9, 7], &[1, 0, 0]]),
            expect_combined: Some("36"),
            expect_forward_only: Some("36"),
            expect_backward_only: Some("36"),
        },
        // forward majority wrong; strong backward evidence flips it right
        PlannedQuestion {
            id: "q02",
            text: "A crate holds 18 melons and a stand sells 5 crates every morning. How many \
                   melons does the stand sell in 2 mornings?",
            gold: "180",
            options: None,
            forward_votes: &[(Some("120"), 5), (Some("180"), 4), (None, 1)],
            backward_correct: Some(&[&[1, 1, 0], &[9, 9, 9]]),
            expect_combined: Some("180"),
            expect_forward_only: Some("120"),
            expect_backward_only: Some("180"),
        },
        // numberless question: no masks, backward stays uniform
        PlannedQuestion {
            id: "q03",
            text: "How many sides does a triangle have when you count each side exactly once?",
            gold: "3",
            options: None,
            forward_votes: &[(Some("3"), 7), (Some("4"), 3)],
            backward_correct: None,
            expect_combined: Some("3"),
            expect_forward_only: Some("3"),
            expect_backward_only: Some("3"),
        },
        // unanimous forward: backward sampling is skipped entirely
        PlannedQuestion {
            id: "q04",
            text: "A box holds 6 eggs. How many eggs are in 7 boxes?",
            gold: "42",
            options: None,
            forward_votes: &[(Some("42"), 10)],
            backward_correct: None,
            expect_combined: Some("42"),
            expect_forward_only: Some("42"),
            expect_backward_only: Some("42"),
        },
        // every chain defeats extraction: unanswered, counted wrong
        PlannedQuestion {
            id: "q05",
            text: "If a recipe needs butter and flour in equal amounts by feel, how many grams \
                   of butter go with the flour?",
            gold: "200",
            options: None,
            forward_votes: &[(None, 10)],
            backward_correct: None,
            expect_combined: None,
            expect_forward_only: None,
            expect_backward_only: None,
        },
        // multiple choice: masks come from the stem, votes are labels
        PlannedQuestion {
            id: "q06",
            text: "A library doubles its collection every 10 years. If it holds 4000 books now, \
                   how many books will it hold in 20 years?",
            gold: "B",
            options: Some(&[
                ("A", "8000"),
                ("B", "16000"),
                ("C", "12000"),
                ("D", "20000"),
                ("E", "None of these"),
            ]),
            forward_votes: &[(Some("B"), 6), (Some("C"), 4)],
            backward_correct: Some(&[&[8, 8, 8], &[1, 1, 0]]),
            expect_combined: Some("B"),
            expect_forward_only: Some("B"),
            expect_backward_only: Some("B"),
        },
        // every candidate is wrong: selection happens, correctness doesn't
        PlannedQuestion {
            id: "q07",
            text: "A tank drains 9 liters per minute for 12 minutes. How many liters does it \
                   drain?",
            gold: "108",
            options: None,
            forward_votes: &[(Some("96"), 6), (Some("86"), 4)],
            backward_correct: Some(&[&[2, 1], &[1, 1]]),
            expect_combined: Some("96"),
            expect_forward_only: Some("96"),
            expect_backward_only: Some("96"),
        },
        // close vote, misleading backward evidence flips it wrong
        PlannedQuestion {
            id: "q08",
            text: "A painter uses 3 cans per room and paints 14 rooms. How many cans are used?",
            gold: "42",
            options: None,
            forward_votes: &[(Some("42"), 5), (Some("41"), 4), (None, 1)],
            backward_correct: Some(&[&[1, 0], &[9, 9]]),
            expect_combined: Some("41"),
            expect_forward_only: Some("42"),
            expect_backward_only: Some("41"),
        },
        // second beneficial flip
        PlannedQuestion {
            id: "q09",
            text: "A bakery sells 24 rolls per tray and 7 trays each day. How many rolls does \
                   it sell in a day?",
            gold: "168",
            options: None,
            forward_votes: &[(Some("170"), 5), (Some("168"), 4), (None, 1)],
            backward_correct: Some(&[&[1, 0], &[9, 9]]),
            expect_combined: Some("168"),
            expect_forward_only: Some("170"),
            expect_backward_only: Some("168"),
        },
        // currency formatting dedupes with the plain form
        PlannedQuestion {
            id: "q10",
            text: "A sandwich costs $4.50 and a juice costs $2.25. How much do one sandwich \
                   and two juices cost together?",
            gold: "9",
            options: None,
            forward_votes: &[(Some("$9.00"), 7), (Some("9"), 2), (Some("8.75"), 1)],
            backward_correct: Some(&[&[9, 8], &[0, 0]]),
            expect_combined: Some("9"),
            expect_forward_only: Some("9"),
            expect_backward_only: Some("9"),
        },
        // comma-grouped numbers in the stem and the answers
        PlannedQuestion {
            id: "q11",
            text: "A festival sold 78,000 tickets and a stadium sold 5,250 more tickets than \
                   the festival. How many tickets were sold in all?",
            gold: "161250",
            options: None,
            forward_votes: &[(Some("161,250"), 8), (Some("161,000"), 2)],
            backward_correct: Some(&[&[10, 9], &[0, 1]]),
            expect_combined: Some("161250"),
            expect_forward_only: Some("161250"),
            expect_backward_only: Some("161250"),
        },
        // percent sign stays outside the masked span
        PlannedQuestion {
            id: "q12",
            text: "A town of 600 people grows by 5% each year. How many people live there \
                   after one year?",
            gold: "630",
            options: None,
            forward_votes: &[(Some("630"), 7), (Some("605"), 3)],
            backward_correct: Some(&[&[8, 9], &[1, 1]]),
            expect_combined: Some("630"),
            expect_forward_only: Some("630"),
            expect_backward_only: Some("630"),
        },
        // the stem already contains a standalone "x"
        PlannedQuestion {
            id: "q13",
            text: "A machine labels each crate with the letter x and packs 16 jars per crate. \
                   How many jars fill 3 crates?",
            gold: "48",
            options: None,
            forward_votes: &[(Some("48"), 8), (Some("19"), 2)],
            backward_correct: Some(&[&[9, 9], &[0, 0]]),
            expect_combined: Some("48"),
            expect_forward_only: Some("48"),
            expect_backward_only: Some("48"),
        },
        // three-way split (3, 3, 4)
        PlannedQuestion {
            id: "q14",
            text: "A club has 45 members and 15 join while 6 leave. How many members remain?",
            gold: "54",
            options: None,
            forward_votes: &[(Some("50"), 3), (Some("56"), 3), (Some("54"), 4)],
            backward_correct: Some(&[&[1, 1, 0], &[0, 1, 0], &[8, 9, 9]]),
            expect_combined: Some("54"),
            expect_forward_only: Some("54"),
            expect_backward_only: Some("54"),
        },
        // exact forward tie resolved by backward evidence
        PlannedQuestion {
            id: "q15",
            text: "A garden bed takes 8 seedlings per row in 5 rows. How many seedlings are \
                   planted?",
            gold: "40",
            options: None,
            forward_votes: &[(Some("40"), 5), (Some("45"), 5)],
            backward_correct: Some(&[&[9, 8], &[1, 1]]),
            expect_combined: Some("40"),
            expect_forward_only: Some("40"),
            expect_backward_only: Some("40"),
        },
        PlannedQuestion {
            id: "q16",
            text: "Ana reads 12 pages on each of 6 days. How many pages does she read?",
            gold: "72",
            options: None,
            forward_votes: &[(Some("72"), 9), (Some("66"), 1)],
            backward_correct: Some(&[&[10, 9], &[0, 0]]),
            expect_combined: Some("72"),
            expect_forward_only: Some("72"),
            expect_backward_only: Some("72"),
        },
        PlannedQuestion {
            id: "q17",
            text: "A school orders 240 pencils and distributes them equally among 8 classes. \
                   How many pencils does each class get?",
            gold: "30",
            options: None,
            forward_votes: &[(Some("30"), 7), (Some("32"), 3)],
            backward_correct: Some(&[&[9, 8], &[0, 1]]),
            expect_combined: Some("30"),
            expect_forward_only: Some("30"),
            expect_backward_only: Some("30"),
        },
        PlannedQuestion {
            id: "q18",
            text: "A train travels 60 miles per hour for 3 hours, then 40 miles per hour for \
                   2 hours. How many miles does it travel?",
            gold: "260",
            options: None,
            forward_votes: &[(Some("260"), 6), (Some("220"), 3), (Some("180"), 1)],
            backward_correct: Some(&[&[9, 8, 9, 7], &[1, 1, 0, 0], &[0, 0, 0, 0]]),
            expect_combined: Some("260"),
            expect_forward_only: Some("260"),
            expect_backward_only: Some("260"),
        },
        PlannedQuestion {
            id: "q19",
            text: "Marta saves $15 each week for 4 weeks, then spends $20. How many dollars \
                   does she have left?",
            gold: "40",
            options: None,
            forward_votes: &[(Some("$40"), 8), (Some("35"), 2)],
            backward_correct: Some(&[&[9, 8, 8], &[1, 0, 0]]),
            expect_combined: Some("40"),
            expect_forward_only: Some("40"),
            expect_backward_only: Some("40"),
        },
        PlannedQuestion {
            id: "q20",
            text: "A pond has 14 ducks, and 9 more arrive in the morning while 4 fly away at \
                   noon. How many ducks are on the pond in the afternoon?",
            gold: "19",
            options: None,
            forward_votes: &[(Some("19"), 7), (Some("23"), 3)],
            backward_correct: Some(&[&[8, 8, 8], &[1, 1, 1]]),
            expect_combined: Some("19"),
            expect_forward_only: Some("19"),
            expect_backward_only: Some("19"),
        },
    ]
}

pub fn gold_value(p: &PlannedQuestion) -> AnswerValue {
    planned_answer(p, p.gold)
}

fn planned_answer(p: &PlannedQuestion, surface: &str) -> AnswerValue {
    if p.options.is_some() {
        AnswerValue::choice(surface).expect("planned label parses")
    } else {
        AnswerValue::numeric(surface).expect("planned number parses")
    }
}

pub fn to_question(p: &PlannedQuestion) -> Question {
    let options = p.options.map(|opts| {
        opts.iter()
            .map(|(label, text)| ChoiceOption {
                label: label.to_string(),
                text: text.to_string(),
            })
            .collect()
    });
    Question::new(p.id, p.text, gold_value(p), options).expect("planned question is valid")
}

/// Flattened forward answers in sample order.
fn forward_answers(p: &PlannedQuestion) -> Vec<Option<AnswerValue>> {
    p.forward_votes
        .iter()
        .flat_map(|(surface, count)| {
            std::iter::repeat_with(move || surface.map(|s| planned_answer(p, s))).take(*count)
        })
        .collect()
}

/// Distinct candidate surfaces in first-seen order.
fn candidate_surfaces(p: &PlannedQuestion) -> Vec<&'static str> {
    let mut seen: Vec<&'static str> = Vec::new();
    for (surface, _) in p.forward_votes {
        if let Some(s) = surface {
            let value = planned_answer(p, s);
            if !seen
                .iter()
                .any(|t| oracle::oracle_equal(&planned_answer(p, t), &value))
            {
                seen.push(s);
            }
        }
    }
    seen
}

const UNEXTRACTABLE_FORWARD: &[&str] = &[
    "I cannot solve this problem from the information given.",
    "The problem statement is ambiguous, so no single value can be determined.",
];

const UNEXTRACTABLE_BACKWARD: &str =
    "The relation cannot be inverted with the information available.";

fn forward_chain_text(kind: TaskKind, style: usize, answer: Option<&str>) -> String {
    let Some(a) = answer else {
        return UNEXTRACTABLE_FORWARD[style % UNEXTRACTABLE_FORWARD.len()].to_string();
    };
    match kind {
        TaskKind::Numeric => match style % 4 {
            0 => format!(
                "Let's think step by step. Combining the quantities stated in the problem \
                 gives the total directly. The answer is {a}."
            ),
            1 => format!(
                "Step by step: first set up the relation, then evaluate it. So the final \
                 amount is {a}. The answer is {a}."
            ),
            2 => format!(
                "Working through the arithmetic carefully, the computation settles on a \
                 single value, so the answer is {a}."
            ),
            _ => format!(
                "After setting up the equation and simplifying both sides, the remaining \
                 quantity evaluates to exactly {a}"
            ),
        },
        TaskKind::Choice => match style % 3 {
            0 => format!("Evaluating each option against the computed value. The answer is ({a})."),
            1 => format!("The computed quantity matches option ({a}). The answer is ({a})."),
            _ => format!("Comparing the options, the computation points to {a}."),
        },
    }
}

fn wrong_value(truth: &AnswerValue) -> String {
    let value = truth.as_numeric().expect("masked truths are numeric");
    let off = value + num_rational::BigRational::from_integer(13.into());
    numeric::to_decimal_string(&off)
}

fn backward_chain_text(
    style: usize,
    truth: &AnswerValue,
    correct: bool,
    extractable: bool,
) -> String {
    if !extractable {
        return UNEXTRACTABLE_BACKWARD.to_string();
    }
    let v = if correct {
        truth.raw().to_string()
    } else {
        wrong_value(truth)
    };
    match style % 3 {
        0 => format!(
            "Let's think step by step. Substituting the given answer into the relation and \
             working backward isolates the unknown. Solving for x, we get: x = {v}. The value \
             of x is {v}."
        ),
        1 => format!(
            "Let's think step by step. The given answer pins down the total, so the unknown \
             follows by reversing the computation. The value of x is {v}."
        ),
        _ => format!(
            "Let's think step by step. Balancing both sides with the provided answer leaves \
             one equation in the unknown, giving x = {v}."
        ),
    }
}

/// One golden extraction label.
#[derive(Debug, Clone)]
pub struct GoldenRow {
    pub digest: String,
    pub mode: &'static str,
    /// Canonical expected extraction: decimal string, choice label, or
    /// "absent".
    pub expected: String,
}

/// Everything the fixture set consists of, built in memory.
pub struct FixtureCorpus {
    pub questions: Vec<Question>,
    /// prompt -> completions by sample index
    pub prompts: BTreeMap<String, Vec<String>>,
    pub goldens: Vec<GoldenRow>,
}

fn canonical_expected(p: &PlannedQuestion, surface: &str) -> String {
    if p.options.is_some() {
        surface
            .chars()
            .find(|c| c.is_ascii_alphabetic())
            .map(|c| c.to_ascii_uppercase().to_string())
            .unwrap_or_default()
    } else {
        numeric::to_decimal_string(&numeric::parse_surface(surface).expect("planned number"))
    }
}

/// Synthesize every prompt and completion for the plan under `pack`.
pub fn build_corpus(pack: &PromptPack) -> FixtureCorpus {
    let planned = plan();
    validate_plan(&planned);

    let mut prompts = BTreeMap::new();
    let mut goldens = Vec::new();
    let mut questions = Vec::new();

    for p in &planned {
        let question = to_question(p);
        let kind = question.task_kind();
        let forward_prompt = build_forward_prompt(pack, &question);

        let mut forward_texts = Vec::with_capacity(FIXTURE_M_F);
        let surfaces: Vec<Option<&'static str>> = p
            .forward_votes
            .iter()
            .flat_map(|(s, c)| std::iter::repeat_n(*s, *c))
            .collect();
        assert_eq!(
            surfaces.len(),
            FIXTURE_M_F,
            "{}: forward plan must cover m_f",
            p.id
        );
        for (k, surface) in surfaces.iter().enumerate() {
            let text = forward_chain_text(kind, k, *surface);
            let expected = match surface {
                Some(s) => canonical_expected(p, s),
                None => "absent".to_string(),
            };
            goldens.push(GoldenRow {
                digest: cache_digest(FIXTURE_MODEL, &forward_prompt, FIXTURE_TEMPERATURE, k),
                mode: if kind == TaskKind::Choice {
                    "forward-choice"
                } else {
                    "forward-numeric"
                },
                expected,
            });
            forward_texts.push(text);
        }
        if let Some(per_candidate) = p.backward_correct {
            let masks = make_masked_questions(&question);
            // candidate values exactly as the pipeline will see them: the
            // extraction of the first chain that voted for each distinct
            // value (its raw surface feeds the answer template)
            let mut candidate_values: Vec<AnswerValue> = Vec::new();
            for text in &forward_texts {
                if let Some(v) = fobar::extract::extract_forward_answer(text, kind) {
                    if !candidate_values.iter().any(|c| oracle::oracle_equal(c, &v)) {
                        candidate_values.push(v);
                    }
                }
            }
            let planned_candidates = candidate_surfaces(p);
            assert_eq!(
                per_candidate.len(),
                candidate_values.len(),
                "{}: backward plan rows must match candidates",
                p.id
            );
            for (extracted, planned) in candidate_values.iter().zip(&planned_candidates) {
                assert!(
                    oracle::oracle_equal(extracted, &planned_answer(p, planned)),
                    "{}: extraction drifted from the plan ({extracted:?} vs {planned})",
                    p.id
                );
            }
            for (ci, per_mask) in per_candidate.iter().enumerate() {
                assert_eq!(
                    per_mask.len(),
                    masks.len(),
                    "{}: backward plan columns must match masks",
                    p.id
                );
                let candidate_value = candidate_values[ci].clone();
                for (mj, correct_count) in per_mask.iter().enumerate() {
                    assert!(*correct_count <= FIXTURE_M_B);
                    let templated = apply_answer_template(&masks[mj].masked_text, &candidate_value);
                    let prompt = build_backward_prompt(pack, &templated);
                    let mut texts = Vec::with_capacity(FIXTURE_M_B);
                    for k in 0..FIXTURE_M_B {
                        let correct = k < *correct_count;
                        let extractable = correct || k % 5 != 4;
                        let text =
                            backward_chain_text(k, &masks[mj].ground_truth, correct, extractable);
                        let expected = if !extractable {
                            "absent".to_string()
                        } else if correct {
                            numeric::to_decimal_string(
                                masks[mj].ground_truth.as_numeric().expect("numeric truth"),
                            )
                        } else {
                            wrong_value(&masks[mj].ground_truth)
                        };
                        goldens.push(GoldenRow {
                            digest: cache_digest(FIXTURE_MODEL, &prompt, FIXTURE_TEMPERATURE, k),
                            mode: "backward",
                            expected,
                        });
                        texts.push(text);
                    }
                    prompts.insert(prompt, texts);
                }
            }
        }
        prompts.insert(forward_prompt, forward_texts);

        questions.push(question);
    }

    FixtureCorpus {
        questions,
        prompts,
        goldens,
    }
}

/// Check every planned expectation against the exact-math oracle.
pub fn validate_plan(planned: &[PlannedQuestion]) {
    let mut combined_correct = 0;
    let mut forward_correct = 0;
    let mut backward_correct = 0;

    for p in planned {
        let extracted: Vec<AnswerValue> = forward_answers(p).into_iter().flatten().collect();
        let expect = |surface: Option<&str>| surface.map(|s| planned_answer(p, s));

        if extracted.is_empty() {
            assert!(
                p.expect_combined.is_none(),
                "{}: unanswered cannot select",
                p.id
            );
            continue;
        }

        let candidates = oracle::forward_oracle(&extracted);
        let z: Vec<u64> = match p.backward_correct {
            None => vec![0; candidates.len()],
            Some(rows) => rows
                .iter()
                .map(|r| r.iter().map(|c| *c as u64).sum())
                .collect(),
        };
        assert_eq!(z.len(), candidates.len(), "{}: z rows", p.id);

        let p_f: Vec<f64> = candidates
            .iter()
            .map(|c| oracle::rational_to_f64(&c.p_forward))
            .collect();
        let p_b: Vec<f64> = oracle::backward_oracle(&z)
            .iter()
            .map(oracle::rational_to_f64)
            .collect();
        let first_seen: Vec<usize> = candidates.iter().map(|c| c.first_seen).collect();

        let combined = oracle::combine_oracle(&p_f, &p_b, 0.9);
        let picked = &candidates[oracle::select_oracle(&combined, &p_f, &first_seen)].value;
        let want = expect(p.expect_combined).expect("answered question has expectation");
        assert!(
            oracle::oracle_equal(picked, &want),
            "{}: combined pick {picked:?} != planned {want:?}",
            p.id
        );

        let sc = oracle::majority_vote(&extracted).unwrap();
        let want_sc = expect(p.expect_forward_only).unwrap();
        assert!(
            oracle::oracle_equal(&sc, &want_sc),
            "{}: majority pick",
            p.id
        );

        let bw = oracle::backward_argmax(&candidates, &z).unwrap();
        let want_bw = expect(p.expect_backward_only).unwrap();
        assert!(
            oracle::oracle_equal(&bw, &want_bw),
            "{}: backward pick",
            p.id
        );

        let gold = gold_value(p);
        if oracle::oracle_equal(picked, &gold) {
            combined_correct += 1;
        }
        if oracle::oracle_equal(&sc, &gold) {
            forward_correct += 1;
        }
        if oracle::oracle_equal(&bw, &gold) {
            backward_correct += 1;
        }
    }

    assert_eq!(
        combined_correct, EXPECTED_CORRECT_COMBINED,
        "combined accuracy drifted"
    );
    assert_eq!(
        forward_correct, EXPECTED_CORRECT_FORWARD_ONLY,
        "forward accuracy drifted"
    );
    assert_eq!(
        backward_correct, EXPECTED_CORRECT_BACKWARD_ONLY,
        "backward accuracy drifted"
    );
    assert_eq!(planned.len(), QUESTION_COUNT);
}

/// Write dataset.jsonl, the cache records, and goldens.tsv under `root`.
/// Regeneration is byte-stable: timestamps are fixed and ordering is
/// deterministic.
pub fn write_fixtures(root: &Path, pack: &PromptPack) -> std::io::Result<()> {
    let corpus = build_corpus(pack);

    let mut dataset = String::new();
    for (p, q) in plan().iter().zip(&corpus.questions) {
        let mut record = serde_json::json!({
            "id": q.id,
            "question": q.text,
            "answer": p.gold,
        });
        if let Some(opts) = &q.options {
            record["options"] = serde_json::Value::Array(
                opts.iter()
                    .map(|o| serde_json::Value::String(format!("({}) {}", o.label, o.text)))
                    .collect(),
            );
        }
        dataset.push_str(&serde_json::to_string(&record).expect("json"));
        dataset.push('\n');
    }
    std::fs::create_dir_all(root)?;
    std::fs::write(root.join("dataset.jsonl"), dataset)?;

    let cache_dir = root.join("cache");
    if cache_dir.exists() {
        std::fs::remove_dir_all(&cache_dir)?;
    }
    let store = CacheStore::open(&cache_dir).map_err(io_err)?;
    for (prompt, texts) in &corpus.prompts {
        for (k, text) in texts.iter().enumerate() {
            store
                .put(
                    FIXTURE_MODEL,
                    &CacheEntry {
                        key: cache_digest(FIXTURE_MODEL, prompt, FIXTURE_TEMPERATURE, k),
                        raw_text: text.clone(),
                        created_at: FIXTURE_CREATED_AT,
                        backend_id: "fixture".to_string(),
                    },
                )
                .map_err(io_err)?;
        }
    }

    let mut goldens = String::new();
    for row in &corpus.goldens {
        goldens.push_str(&format!("{}\t{}\t{}\n", row.digest, row.mode, row.expected));
    }
    std::fs::write(root.join("goldens.tsv"), goldens)?;
    Ok(())
}

fn io_err(e: fobar::Error) -> std::io::Error {
    std::io::Error::other(e.to_string())
}

/// Repo-relative fixture and prompt locations, for tests and the generator.
pub fn repo_root() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .expect("repo root")
}

pub fn repo_prompts_pack() -> PromptPack {
    PromptPack::load(&repo_root().join("prompts/cot")).expect("repo prompt pack")
}

pub fn repo_fixture_dir() -> std::path::PathBuf {
    repo_root().join("fixtures/replay20")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_is_oracle_consistent() {
        validate_plan(&plan());
    }

    #[test]
    fn repo_pack_keeps_the_reference_demonstrations() {
        let pack = repo_prompts_pack();
        assert_eq!(pack.forward_examples.len(), 8, "standard demonstration set");
        assert!(pack
            .forward_examples
            .iter()
            .all(|b| b.contains("The answer is")));
        assert!(pack.system_preamble.starts_with("You are an AI assistant"));
        assert!(pack
            .system_preamble
            .contains("You help me determine the value of x"));
        let randy = &pack.backward_examples[0];
        assert!(randy.contains("Randy has 60 mango trees"));
        assert!(randy.ends_with("The value of x is 5."));
        assert!(pack
            .backward_examples
            .iter()
            .all(|b| b.contains("If we know the answer of the above question is")));
    }

    #[test]
    fn corpus_covers_every_planned_sample() {
        let pack = repo_prompts_pack();
        let corpus = build_corpus(&pack);
        assert_eq!(corpus.questions.len(), QUESTION_COUNT);
        // every prompt has exactly m_f or m_b completions
        for (prompt, texts) in &corpus.prompts {
            assert!(
                texts.len() == FIXTURE_M_F || texts.len() == FIXTURE_M_B,
                "odd completion count {} for {prompt:.60?}",
                texts.len()
            );
        }
        // goldens reference unique digests
        let mut seen = std::collections::HashSet::new();
        for row in &corpus.goldens {
            assert!(seen.insert(row.digest.clone()), "duplicate golden digest");
        }
    }
}
