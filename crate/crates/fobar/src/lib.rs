//! Verify sampled chain-of-thought answers by reasoning backward.
//!
//! Forward reasoning samples many chains for a question and takes each
//! distinct answer's vote proportion. Backward reasoning masks one number
//! in the question at a time, tells the model a candidate answer, and asks
//! it to recover the masked value; candidates that let the model recover
//! the mask are likely correct. The two vote distributions are combined
//! geometrically and the argmax is the final answer.
//!
//! - [`core`]: domain types and all aggregation math
//! - [`masker`]: number detection, masked variants, the answer template
//! - [`prompts`]: prompt packs and prompt assembly
//! - [`llm`]: backends, content-addressed response cache, sampling
//! - [`extract`]: pulling answers and masked values out of completions
//! - [`pipeline`]: the per-question orchestration and offline re-aggregation

pub mod core;
mod error;
pub mod extract;
pub mod llm;
pub mod masker;
pub mod numeric;
pub mod pipeline;
pub mod prompts;

pub use error::{Error, Result};
