//! Dataset ingestion: newline-delimited JSON records or CSV rows with
//! fields (id, question, answer[, options]).

use std::collections::HashSet;
use std::path::Path;

use anyhow::{bail, Context, Result};
use fobar::core::{AnswerValue, ChoiceOption, Question};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DatasetFormat {
    Jsonl,
    Csv,
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    id: serde_json::Value,
    question: String,
    answer: serde_json::Value,
    #[serde(default)]
    options: Option<Vec<String>>,
}

fn scalar_to_string(v: &serde_json::Value, field: &str) -> Result<String> {
    match v {
        serde_json::Value::String(s) => Ok(s.clone()),
        serde_json::Value::Number(n) => Ok(n.to_string()),
        other => bail!("{field} must be a string or number, got {other}"),
    }
}

/// "(A) 8000" / "A) 8000" / "A 8000" -> labeled option.
fn parse_option(raw: &str) -> Result<ChoiceOption> {
    let trimmed = raw.trim().trim_start_matches('(');
    let mut chars = trimmed.chars();
    let label = chars
        .next()
        .filter(|c| c.is_ascii_alphabetic())
        .with_context(|| format!("option {raw:?} has no leading label"))?;
    let rest = chars.as_str().trim_start_matches([')', '.', ':']).trim();
    Ok(ChoiceOption {
        label: label.to_ascii_uppercase().to_string(),
        text: rest.to_string(),
    })
}

fn build_question(
    id: String,
    text: String,
    answer: String,
    options: Option<Vec<String>>,
    line: usize,
) -> Result<Question> {
    let options: Option<Vec<ChoiceOption>> = options
        .filter(|opts| !opts.is_empty())
        .map(|opts| opts.iter().map(|o| parse_option(o)).collect::<Result<_>>())
        .transpose()
        .with_context(|| format!("line {line}: bad options"))?;
    let gold = if options.is_some() {
        AnswerValue::choice(&answer)
            .with_context(|| format!("line {line}: gold answer {answer:?} is not a choice label"))?
    } else {
        AnswerValue::numeric(&answer)
            .with_context(|| format!("line {line}: gold answer {answer:?} is not numeric"))?
    };
    Question::new(id, text, gold, options).with_context(|| format!("line {line}: invalid question"))
}

pub fn infer_format(path: &Path, explicit: Option<DatasetFormat>) -> DatasetFormat {
    explicit.unwrap_or_else(|| {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or_default()
        {
            "csv" => DatasetFormat::Csv,
            _ => DatasetFormat::Jsonl,
        }
    })
}

/// Streaming load with per-record validation; duplicate ids and malformed
/// records fail with their line number.
pub fn load_dataset(path: &Path, format: Option<DatasetFormat>) -> Result<Vec<Question>> {
    let format = infer_format(path, format);
    let questions = match format {
        DatasetFormat::Jsonl => load_jsonl(path)?,
        DatasetFormat::Csv => load_csv(path)?,
    };
    let mut seen = HashSet::new();
    for q in &questions {
        if !seen.insert(q.id.clone()) {
            bail!("duplicate question id {:?}", q.id);
        }
    }
    if questions.is_empty() {
        tracing::warn!(path = %path.display(), "dataset is empty");
    }
    Ok(questions)
}

fn load_jsonl(path: &Path) -> Result<Vec<Question>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read dataset {}", path.display()))?;
    let mut questions = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(line)
            .with_context(|| format!("line {line_no}: malformed record"))?;
        let id =
            scalar_to_string(&raw.id, "id").with_context(|| format!("line {line_no}: bad id"))?;
        let answer = scalar_to_string(&raw.answer, "answer")
            .with_context(|| format!("line {line_no}: bad answer"))?;
        questions.push(build_question(
            id,
            raw.question,
            answer,
            raw.options,
            line_no,
        )?);
    }
    Ok(questions)
}

fn load_csv(path: &Path) -> Result<Vec<Question>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .with_context(|| format!("cannot read dataset {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (id_col, q_col, a_col) = match (col("id"), col("question"), col("answer")) {
        (Some(i), Some(q), Some(a)) => (i, q, a),
        _ => bail!("csv needs id, question, answer columns (optional: options)"),
    };
    let opt_col = col("options");

    let mut questions = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line_no = idx + 2; // headers occupy line 1
        let record = record.with_context(|| format!("line {line_no}: malformed csv row"))?;
        let field = |i: usize| record.get(i).unwrap_or_default().to_string();
        let options = opt_col
            .map(&field)
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                s.split('|')
                    .map(|o| o.trim().to_string())
                    .collect::<Vec<_>>()
            });
        questions.push(build_question(
            field(id_col),
            field(q_col),
            field(a_col),
            options,
            line_no,
        )?);
    }
    Ok(questions)
}
