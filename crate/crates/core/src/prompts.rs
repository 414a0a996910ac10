//! Step-by-step parsing instruction prompts and SFT dataset export.
//!
//! A prompt asks the model to annotate one sentence as a TSV table, either
//! in a single task (all five fields at once) or as a chain of two or three
//! cumulative tasks. Templates live under `assets/prompt_templates/v1/`.

use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::treebank::{Sentence, Token, Treebank, TreebankError};

const SYSTEM: &str = include_str!("../assets/prompt_templates/v1/system.txt");
const USER_ONE_STEP: &str = include_str!("../assets/prompt_templates/v1/user_one_step.txt");
const USER_MULTI_STEP: &str = include_str!("../assets/prompt_templates/v1/user_multi_step.txt");
const TASK_UPOS: &str = include_str!("../assets/prompt_templates/v1/task_upos.txt");
const TASK_HEAD: &str = include_str!("../assets/prompt_templates/v1/task_head.txt");
const TASK_DEPREL: &str = include_str!("../assets/prompt_templates/v1/task_deprel.txt");
const TASK_HEAD_DEPREL: &str =
    include_str!("../assets/prompt_templates/v1/task_head_deprel.txt");

/// How the annotation work is split into tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StepPlan {
    /// One task: the full five-field table.
    OneStep,
    /// Part of speech first, then heads and relations together.
    TwoStep,
    /// Part of speech, then heads, then relations.
    ThreeStep,
}

impl StepPlan {
    pub fn from_steps(steps: u8) -> Option<StepPlan> {
        match steps {
            1 => Some(StepPlan::OneStep),
            2 => Some(StepPlan::TwoStep),
            3 => Some(StepPlan::ThreeStep),
            _ => None,
        }
    }

    pub fn steps(self) -> usize {
        match self {
            StepPlan::OneStep => 1,
            StepPlan::TwoStep => 2,
            StepPlan::ThreeStep => 3,
        }
    }

    /// Table column count produced by each task, cumulative and ending at 5.
    pub fn task_widths(self) -> &'static [usize] {
        match self {
            StepPlan::OneStep => &[5],
            StepPlan::TwoStep => &[3, 5],
            StepPlan::ThreeStep => &[3, 4, 5],
        }
    }
}

/// Language metadata used to phrase prompts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguageProfile {
    pub language_code: String,
    pub language_name: String,
}

/// Treebanks whose prompts this crate can phrase out of the box.
const LANGUAGE_NAMES: &[(&str, &str)] = &[
    ("ar_padt", "Arabic"),
    ("bg_btb", "Bulgarian"),
    ("ca_ancora", "Catalan"),
    ("cs_pdt", "Czech"),
    ("de_gsd", "German"),
    ("en_ewt", "English"),
    ("es_ancora", "Spanish"),
    ("fr_gsd", "French"),
    ("it_isdt", "Italian"),
    ("ja_gsd", "Japanese"),
    ("ko_gsd", "Korean"),
    ("nl_alpino", "Dutch"),
    ("no_bokmaal", "Norwegian"),
    ("ro_rrt", "Romanian"),
    ("ru_syntagrus", "Russian"),
    ("sl_ssj", "Slovenian"),
    ("zh_gsdsimp", "Simplified Chinese"),
];

const LANGUAGE_PREFIXES: &[(&str, &str)] = &[
    ("ar", "Arabic"),
    ("bg", "Bulgarian"),
    ("ca", "Catalan"),
    ("cs", "Czech"),
    ("de", "German"),
    ("en", "English"),
    ("es", "Spanish"),
    ("fr", "French"),
    ("it", "Italian"),
    ("ja", "Japanese"),
    ("ko", "Korean"),
    ("nl", "Dutch"),
    ("no", "Norwegian"),
    ("ro", "Romanian"),
    ("ru", "Russian"),
    ("sl", "Slovenian"),
    ("zh", "Chinese"),
];

impl LanguageProfile {
    pub fn new(
        language_code: impl Into<String>,
        language_name: impl Into<String>,
    ) -> Result<LanguageProfile, PromptError> {
        let language_code = language_code.into();
        let language_name = language_name.into();
        if language_name.trim().is_empty() {
            return Err(PromptError::UnknownLanguage(language_code));
        }
        Ok(LanguageProfile { language_code, language_name })
    }

    /// Looks a treebank code up in the built-in registry, falling back to
    /// the bare language prefix (`en_gum` -> English).
    pub fn for_code(code: &str) -> Option<LanguageProfile> {
        let name = LANGUAGE_NAMES
            .iter()
            .find(|(c, _)| *c == code)
            .or_else(|| {
                let prefix = code.split('_').next().unwrap_or(code);
                LANGUAGE_PREFIXES.iter().find(|(c, _)| *c == prefix)
            })
            .map(|(_, name)| *name)?;
        Some(LanguageProfile { language_code: code.to_string(), language_name: name.to_string() })
    }
}

/// A fully rendered prompt for one sentence, plus the gold reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub sent_id: String,
    pub plan: StepPlan,
    pub n_words: usize,
    pub system: String,
    pub user: String,
    pub gold_assistant: String,
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("sentence {0} has no tokens")]
    EmptySentence(String),
    #[error("no language name known for {0}; supply one explicitly")]
    UnknownLanguage(String),
    #[error(transparent)]
    Treebank(#[from] TreebankError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("could not serialize record: {0}")]
    Serialize(#[from] serde_json::Error),
}

/// Substitutes `{name}` placeholders. Substituted text is never rescanned,
/// so braces inside values pass through verbatim.
fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 64);
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let after = &rest[start..];
        match after.find('}') {
            Some(end) => {
                let name = &after[1..end];
                match vars.iter().find(|(k, _)| *k == name) {
                    Some((_, value)) => out.push_str(value),
                    None => out.push_str(&after[..=end]),
                }
                rest = &after[end + 1..];
            }
            None => {
                out.push_str(after);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

fn article_for(language_name: &str) -> &'static str {
    match language_name.chars().next() {
        Some(c) if "AEIOUaeiou".contains(c) => "an",
        _ => "a",
    }
}

fn spelled_count(n: usize) -> &'static str {
    match n {
        2 => "two",
        3 => "three",
        _ => unreachable!("task chains are two or three steps long"),
    }
}

/// Tab-joins the first `width` of ID, FORM, UPOS, HEAD, DEPREL per token.
fn gold_table(tokens: &[Token], width: usize) -> String {
    let rows: Vec<String> = tokens
        .iter()
        .map(|t| {
            let mut fields = vec![t.id.to_string(), t.form.clone()];
            if width >= 3 {
                fields.push(t.upos.clone());
            }
            if width >= 4 {
                fields.push(t.head.to_string());
            }
            if width >= 5 {
                fields.push(t.deprel.clone());
            }
            fields.join("\t")
        })
        .collect();
    rows.join("\n")
}

fn task_descriptions(plan: StepPlan, n: &str) -> Vec<String> {
    match plan {
        StepPlan::OneStep => vec![],
        StepPlan::TwoStep => vec![
            render(TASK_UPOS, &[("n", n)]),
            render(TASK_HEAD_DEPREL, &[("prev", "1")]),
        ],
        StepPlan::ThreeStep => vec![
            render(TASK_UPOS, &[("n", n)]),
            render(TASK_HEAD, &[("prev", "1")]),
            render(TASK_DEPREL, &[("prev", "2")]),
        ],
    }
}

/// Renders the system/user pair and the gold assistant reply for one
/// sentence. The word list is the gold FORM column verbatim, one per line.
pub fn build_prompt(
    sentence: &Sentence,
    plan: StepPlan,
    language: &LanguageProfile,
) -> Result<PromptBundle, PromptError> {
    if sentence.tokens.is_empty() {
        return Err(PromptError::EmptySentence(sentence.sent_id.clone()));
    }
    let n = sentence.tokens.len().to_string();
    let words = sentence.forms().join("\n");
    let surface = sentence.surface_text();
    let name = language.language_name.as_str();

    let system = render(SYSTEM, &[("article", article_for(name)), ("language", name)]);
    let user = match plan {
        StepPlan::OneStep => render(USER_ONE_STEP, &[
            ("language", name),
            ("n", &n),
            ("sentence", &surface),
            ("words", &words),
        ]),
        StepPlan::TwoStep | StepPlan::ThreeStep => {
            let tasks: Vec<String> = task_descriptions(plan, &n)
                .iter()
                .enumerate()
                .map(|(i, desc)| format!("- Task {}\n{desc}", i + 1))
                .collect();
            render(USER_MULTI_STEP, &[
                ("language", name),
                ("step_count", spelled_count(plan.steps())),
                ("tasks", &tasks.join("\n\n")),
                ("sentence", &surface),
                ("words", &words),
            ])
        }
    };

    let gold_assistant = match plan {
        StepPlan::OneStep => gold_table(&sentence.tokens, 5),
        _ => {
            let blocks: Vec<String> = plan
                .task_widths()
                .iter()
                .enumerate()
                .map(|(i, &width)| {
                    format!("- Task {}\n{}", i + 1, gold_table(&sentence.tokens, width))
                })
                .collect();
            blocks.join("\n\n")
        }
    };

    Ok(PromptBundle {
        sent_id: sentence.sent_id.clone(),
        plan,
        n_words: sentence.tokens.len(),
        system,
        user,
        gold_assistant,
    })
}

#[derive(Serialize)]
struct MessageOut<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct SftRecordOut<'a> {
    messages: [MessageOut<'a>; 3],
}

fn write_record<W: Write>(out: &mut W, bundle: &PromptBundle) -> Result<(), PromptError> {
    let record = SftRecordOut {
        messages: [
            MessageOut { role: "system", content: &bundle.system },
            MessageOut { role: "user", content: &bundle.user },
            MessageOut { role: "assistant", content: &bundle.gold_assistant },
        ],
    };
    serde_json::to_writer(&mut *out, &record)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Writes one chat-format JSONL record per sentence, in corpus order;
/// `held_out` sentences (if any) are appended after the main corpus.
/// Returns the number of records written.
pub fn export_sft<W: Write>(
    tb: &Treebank,
    held_out: Option<&Treebank>,
    plan: StepPlan,
    language: &LanguageProfile,
    out: &mut W,
) -> Result<usize, PromptError> {
    let extra = held_out.map(|t| t.sentences.iter()).into_iter().flatten();
    let mut n = 0;
    for sentence in tb.sentences.iter().chain(extra) {
        write_record(out, &build_prompt(sentence, plan, language)?)?;
        n += 1;
    }
    Ok(n)
}

/// One rung of a learning-curve ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LadderRung {
    pub size: usize,
    pub n_records: usize,
}

/// Exports one SFT file per requested size, where every smaller sample is
/// a subset of every larger one. `make_writer` is called once per size.
pub fn export_curve_ladder<W: Write, F: FnMut(usize) -> io::Result<W>>(
    tb: &Treebank,
    sizes: &[usize],
    seed: u64,
    plan: StepPlan,
    language: &LanguageProfile,
    mut make_writer: F,
) -> Result<Vec<LadderRung>, PromptError> {
    let samples = crate::treebank::nested_subsamples(tb, sizes, seed)?;
    let mut rungs = Vec::with_capacity(samples.len());
    for sample in &samples {
        let size = sample.len();
        let mut out = make_writer(size)?;
        let n_records = export_sft(sample, None, plan, language, &mut out)?;
        rungs.push(LadderRung { size, n_records });
    }
    Ok(rungs)
}
