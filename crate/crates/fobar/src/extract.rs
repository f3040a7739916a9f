//! Answer extraction from model completions.
//!
//! Chains restate question numbers freely, so extraction always keys off
//! the final occurrence of the answer cue; the last stated value is the
//! model's commitment. Nothing here ever fails on weird input: an
//! unparseable chain simply yields no prediction.

use std::sync::LazyLock;

use num_rational::BigRational;
use regex::{Match, Regex};

use crate::core::{AnswerValue, TaskKind};
use crate::error::{Error, Result};
use crate::numeric;

static FORWARD_CUE_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)he answer is").unwrap());

static BACKWARD_CUE_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)value of x is").unwrap());

static X_EQUALS_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\bx\s*=").unwrap());

// Numbers as models print them: optional sign and currency mark, comma
// groups, decimals, an optional percent. Trailing punctuation is left to
// the normalizer.
static LOOSE_NUMBER_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"-?\$?\d(?:[\d,]*\d)?(?:\.\d+)?%?").unwrap());

// Parenthesized labels in any case; bare labels only in upper case so the
// article "a" never reads as an answer.
static CHOICE_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\(([A-Ea-e])\)|\b([A-E])\b").unwrap());

fn last_match<'t>(re: &Regex, text: &'t str) -> Option<Match<'t>> {
    re.find_iter(text).last()
}

fn last_number(text: &str) -> Option<AnswerValue> {
    for m in LOOSE_NUMBER_RE
        .find_iter(text)
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
    {
        if let Some(value) = numeric::parse_surface(m.as_str()) {
            return Some(AnswerValue::numeric_exact(m.as_str(), value));
        }
    }
    None
}

/// Final answer of a forward chain, or `None` when nothing parseable exists.
///
/// Numeric tasks: the last number after the final answer cue; without a cue,
/// the last number anywhere. A cue followed by no number at all means the
/// model committed to a non-numeric answer, which stays unextractable.
/// Choice tasks: the last standalone letter A-E, parenthesized or not.
pub fn extract_forward_answer(raw_text: &str, task_kind: TaskKind) -> Option<AnswerValue> {
    match task_kind {
        TaskKind::Numeric => match last_match(&FORWARD_CUE_RE, raw_text) {
            Some(cue) => last_number(&raw_text[cue.end()..]),
            None => last_number(raw_text),
        },
        TaskKind::Choice => {
            let caps = CHOICE_RE.captures_iter(raw_text).last()?;
            let m = caps.get(1).or_else(|| caps.get(2))?;
            let label = m.as_str().chars().next()?.to_ascii_uppercase();
            Some(AnswerValue::Choice {
                raw: caps.get(0)?.as_str().to_string(),
                label,
            })
        }
    }
}

/// Value of the masked variable from a backward chain: the last number after
/// the final "value of x is", falling back to the last number after the
/// final "x =".
pub fn extract_backward_value(raw_text: &str) -> Option<AnswerValue> {
    if let Some(cue) = last_match(&BACKWARD_CUE_RE, raw_text) {
        return last_number(&raw_text[cue.end()..]);
    }
    if let Some(cue) = last_match(&X_EQUALS_RE, raw_text) {
        return last_number(&raw_text[cue.end()..]);
    }
    None
}

/// Canonical exact value of a numeric surface form: comma grouping removed,
/// leading "$" and trailing "%" stripped, magnitude kept.
pub fn normalize_number(surface: &str) -> Result<BigRational> {
    numeric::parse_surface(surface).ok_or_else(|| Error::BadNumber(surface.to_string()))
}
