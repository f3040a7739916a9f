//! The `validate-dataset` subcommand.

use std::path::Path;

use anyhow::Result;
use fobar::core::TaskKind;
use fobar::masker::find_numbers;

use crate::dataset::{load_dataset, DatasetFormat};

pub fn cmd_validate(path: &Path, format: Option<DatasetFormat>) -> Result<()> {
    let questions = load_dataset(path, format)?;
    if questions.is_empty() {
        eprintln!("warning: {} contains no records", path.display());
        println!("records: 0");
        return Ok(());
    }

    let choice = questions
        .iter()
        .filter(|q| q.task_kind() == TaskKind::Choice)
        .count();
    let numberless: Vec<&str> = questions
        .iter()
        .filter(|q| find_numbers(&q.text).is_empty())
        .map(|q| q.id.as_str())
        .collect();

    println!("records: {}", questions.len());
    println!("numeric: {}", questions.len() - choice);
    println!("choice: {choice}");
    if !numberless.is_empty() {
        println!(
            "numberless stems (backward reasoning will stay uniform): {} [{}]",
            numberless.len(),
            numberless.join(", ")
        );
    }
    println!("ok: every record parsed and ids are unique");
    Ok(())
}
