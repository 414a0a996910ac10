//! Building blocks for driving LLMs through dependency parsing over
//! Universal Dependencies treebanks: CoNLL-U subset IO, step-by-step
//! instruction prompts, completion decoding with ID/FORM recovery, and
//! token-alignment based scoring.

pub mod decoder;
pub mod llm;
pub mod metrics;
pub mod pipeline;
pub mod prompts;
pub mod treebank;

mod seeding;

pub use treebank::{Sentence, Split, Token, Treebank};
