//! Prompt assembly from editable prompt-pack files.
//!
//! A pack is a pair of plain-text files, `forward.txt` and `backward.txt`,
//! holding demonstration blocks separated by lines consisting of `===`.
//! The first block of the backward file is the system preamble. Blocks are
//! verbatim data: assembly only concatenates, never rewrites, and the byte
//! output is frozen by golden tests because cache keys hash prompt bytes.

use std::path::Path;

use crate::core::Question;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct PromptPack {
    pub name: String,
    pub forward_examples: Vec<String>,
    pub backward_examples: Vec<String>,
    pub system_preamble: String,
}

impl PromptPack {
    /// Load `<dir>/forward.txt` and `<dir>/backward.txt`; the pack name is
    /// the directory name.
    pub fn load(dir: &Path) -> Result<Self> {
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "unnamed".to_string());
        let read = |file: &str| -> Result<String> {
            std::fs::read_to_string(dir.join(file)).map_err(|e| Error::BadPromptPack {
                name: name.clone(),
                reason: format!("cannot read {file}: {e}"),
            })
        };
        Self::from_parts(name.clone(), &read("forward.txt")?, &read("backward.txt")?)
    }

    /// Assemble a pack from the raw file contents.
    pub fn from_parts(
        name: impl Into<String>,
        forward_text: &str,
        backward_text: &str,
    ) -> Result<Self> {
        let name = name.into();
        let forward_examples = split_blocks(forward_text);
        let mut backward_blocks = split_blocks(backward_text);
        if forward_examples.is_empty() {
            return Err(Error::BadPromptPack {
                name,
                reason: "no forward demonstration blocks".into(),
            });
        }
        if backward_blocks.len() < 2 {
            return Err(Error::BadPromptPack {
                name,
                reason: "backward file needs a preamble block plus at least one demonstration"
                    .into(),
            });
        }
        let system_preamble = backward_blocks.remove(0);
        Ok(PromptPack {
            name,
            forward_examples,
            backward_examples: backward_blocks,
            system_preamble,
        })
    }
}

/// Split pack text on delimiter lines (`===`), trimming each block's outer
/// blank lines and dropping empties. Line endings are normalized to `\n`.
fn split_blocks(text: &str) -> Vec<String> {
    let normalized = text.replace("\r\n", "\n");
    let mut blocks = Vec::new();
    let mut current = String::new();
    for line in normalized.split('\n') {
        if line.trim() == "===" {
            push_block(&mut blocks, &mut current);
        } else {
            current.push_str(line);
            current.push('\n');
        }
    }
    push_block(&mut blocks, &mut current);
    blocks
}

fn push_block(blocks: &mut Vec<String>, current: &mut String) {
    let trimmed = current.trim_matches('\n');
    if !trimmed.is_empty() {
        blocks.push(trimmed.to_string());
    }
    current.clear();
}

/// The question stem as prompted: multiple-choice options are rendered on
/// their own "Answer Choices:" line after the text.
pub fn render_stem(q: &Question) -> String {
    match &q.options {
        None => q.text.clone(),
        Some(opts) => {
            let rendered: Vec<String> = opts
                .iter()
                .map(|o| format!("({}) {}", o.label, o.text))
                .collect();
            format!("{}\nAnswer Choices: {}", q.text, rendered.join(" "))
        }
    }
}

/// Demonstrations, then the question, ending with the bare completion cue.
pub fn build_forward_prompt(pack: &PromptPack, q: &Question) -> String {
    let mut prompt = String::new();
    for example in &pack.forward_examples {
        prompt.push_str(example);
        prompt.push_str("\n\n");
    }
    prompt.push_str("Question: ");
    prompt.push_str(&render_stem(q));
    prompt.push_str("\nAnswer:");
    prompt
}

/// Preamble, demonstrations, then the masked-and-templated question.
pub fn build_backward_prompt(pack: &PromptPack, masked_templated_question: &str) -> String {
    let mut prompt = String::new();
    prompt.push_str(&pack.system_preamble);
    prompt.push_str("\n\n");
    for example in &pack.backward_examples {
        prompt.push_str(example);
        prompt.push_str("\n\n");
    }
    prompt.push_str("Question: ");
    prompt.push_str(masked_templated_question);
    prompt.push_str("\nAnswer:");
    prompt
}
