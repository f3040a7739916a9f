//! Number detection and masked-question construction.
//!
//! For a question containing n maskable numbers, n variants are produced,
//! each with one number replaced by the mask symbol. Appending the
//! answer-conditioning template to a variant turns it into a question whose
//! expected output is the masked value.

use std::sync::LazyLock;

use num_rational::BigRational;
use regex::Regex;

use crate::core::{AnswerValue, MaskedQuestion, Question};
use crate::numeric;

/// The mask symbol substituted for a number.
pub const MASK_SYMBOL: &str = "x";

const TEMPLATE_PREFIX: &str = "If we know the answer of the above question is ";
const TEMPLATE_SUFFIX: &str = ", what is the value of unknown variable x?";

/// One numeric literal found in question text.
#[derive(Debug, Clone, PartialEq)]
pub struct NumberSpan {
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub value: BigRational,
}

// Comma-grouped integers first so "78,000" wins over "78"; then plain
// integers/decimals. No exponents, no sign: word problems state magnitudes.
static NUMBER_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\d{1,3}(?:,\d{3})+(?:\.\d+)?|\d+(?:\.\d+)?").unwrap());

static MASK_COLLISION_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\bx\b").unwrap());

static CHOICE_BLOCK_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)answer choices").unwrap());

/// Every maskable numeric literal in the text: integers, decimals, and
/// comma-grouped integers, each occurrence its own span. Digits glued to
/// letters ("1st", "4pm") or touching a fraction slash ("2/2") are skipped.
pub fn find_numbers(text: &str) -> Vec<NumberSpan> {
    NUMBER_RE
        .find_iter(text)
        .filter(|m| {
            let before = text[..m.start()].chars().next_back();
            let after = text[m.end()..].chars().next();
            if matches!(before, Some(c) if c.is_ascii_alphanumeric() || c == '/') {
                return false;
            }
            if matches!(after, Some(c) if c.is_ascii_alphabetic() || c == '/') {
                return false;
            }
            true
        })
        .map(|m| {
            let surface = m.as_str().to_string();
            let cleaned: String = surface.chars().filter(|c| *c != ',').collect();
            let value =
                numeric::parse_decimal(&cleaned).expect("regex-matched literal always parses");
            NumberSpan {
                start: m.start(),
                end: m.end(),
                surface,
                value,
            }
        })
        .collect()
}

/// One masked variant per number in the question stem. For multiple-choice
/// items only the stem is masked; anything from an "Answer Choices" marker
/// onward is left alone.
pub fn make_masked_questions(q: &Question) -> Vec<MaskedQuestion> {
    let maskable_end = CHOICE_BLOCK_RE
        .find(&q.text)
        .map(|m| m.start())
        .unwrap_or(q.text.len());
    let spans = find_numbers(&q.text[..maskable_end]);
    if !spans.is_empty() && MASK_COLLISION_RE.is_match(&q.text[..maskable_end]) {
        tracing::warn!(
            question = %q.id,
            "question already contains a standalone '{MASK_SYMBOL}' token; \
             masked variants will contain more than one"
        );
    }
    spans
        .into_iter()
        .enumerate()
        .map(|(j, span)| {
            let mut masked_text =
                String::with_capacity(q.text.len() - (span.end - span.start) + MASK_SYMBOL.len());
            masked_text.push_str(&q.text[..span.start]);
            masked_text.push_str(MASK_SYMBOL);
            masked_text.push_str(&q.text[span.end..]);
            MaskedQuestion {
                source_id: q.id.clone(),
                mask_index: j,
                masked_text,
                ground_truth: AnswerValue::numeric_exact(span.surface, span.value),
                mask_span: span.start..span.end,
            }
        })
        .collect()
}

/// Append the answer-conditioning template: the candidate's surface form is
/// spliced into the fixed sentence, nothing in the question is rewritten.
pub fn apply_answer_template(masked_text: &str, candidate: &AnswerValue) -> String {
    format!(
        "{masked_text} {TEMPLATE_PREFIX}{}{TEMPLATE_SUFFIX}",
        candidate.raw()
    )
}
