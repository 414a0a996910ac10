//! Reading, writing, and sampling the CoNLL-U subset used throughout this
//! crate: ID, FORM, UPOS, HEAD, and DEPREL.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeding;

/// Head value the decoder assigns to a system-output row whose HEAD field
/// is non-integer or out of range. Never produced by [`parse_conllu`];
/// rows carrying it can never win an attachment match.
pub const INVALID_HEAD: i32 = -1;

/// One syntactic word. Multiword-token range lines and empty nodes are
/// dropped at parse time, so `id` is always a plain 1-based index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Token {
    pub id: u32,
    pub form: String,
    pub upos: String,
    /// 1-based index of the head word; 0 marks the sentence root and
    /// [`INVALID_HEAD`] an unusable value in decoded system output.
    pub head: i32,
    pub deprel: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Sentence {
    pub sent_id: String,
    /// Raw `# text` comment when present.
    pub text: Option<String>,
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn forms(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.form.as_str()).collect()
    }

    /// `# text` when present, otherwise the forms joined with single spaces.
    pub fn surface_text(&self) -> String {
        match &self.text {
            Some(t) => t.clone(),
            None => self.forms().join(" "),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Treebank {
    /// UD-style identifier such as `en_ewt`; empty when unknown.
    pub language_code: String,
    pub split: Split,
    pub sentences: Vec<Sentence>,
}

impl Treebank {
    pub fn new(language_code: impl Into<String>, split: Split, sentences: Vec<Sentence>) -> Self {
        Treebank { language_code: language_code.into(), split, sentences }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

/// Sentence and token counts for one corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub n_sentences: usize,
    pub n_tokens: usize,
}

impl CorpusStats {
    pub fn to_tsv(&self) -> String {
        format!("sentences\t{}\ntokens\t{}\n", self.n_sentences, self.n_tokens)
    }
}

/// Per-language bookkeeping produced by [`mix`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MixPart {
    pub language_code: String,
    pub available: usize,
    pub kept: usize,
}

#[derive(Debug, Error)]
pub enum TreebankError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("sentence {sent_id}: head {head} out of range for {n_tokens} tokens")]
    HeadOutOfRange { sent_id: String, head: i64, n_tokens: usize },
    #[error("sentence {sent_id}: token {id} is its own head")]
    SelfHead { sent_id: String, id: u32 },
    #[error("duplicate sentence id {0}")]
    DuplicateSentId(String),
    #[error("sentence {0} has no tokens")]
    EmptySentence(String),
    #[error("requested sample of {requested} sentences but only {available} available")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("sizes must be strictly ascending, got {0} after {1}")]
    SizesNotAscending(usize, usize),
    #[error("duplicate language code {0}")]
    DuplicateLanguage(String),
    #[error("downsample fraction for {code} must be in (0, 1], got {fraction}")]
    InvalidFraction { code: String, fraction: f64 },
    #[error("downsample target {0} is not among the mixed treebanks")]
    UnknownDownsampleTarget(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// True for `1-2` style multiword-token range IDs.
pub(crate) fn is_range_id(id: &str) -> bool {
    match id.split_once('-') {
        Some((a, b)) => {
            !a.is_empty()
                && !b.is_empty()
                && a.bytes().all(|c| c.is_ascii_digit())
                && b.bytes().all(|c| c.is_ascii_digit())
        }
        None => false,
    }
}

/// True for `5.1` style empty-node IDs.
pub(crate) fn is_empty_node_id(id: &str) -> bool {
    match id.split_once('.') {
        Some((a, b)) => {
            !a.is_empty()
                && !b.is_empty()
                && a.bytes().all(|c| c.is_ascii_digit())
                && b.bytes().all(|c| c.is_ascii_digit())
        }
        None => false,
    }
}

#[derive(Default)]
struct PendingSentence {
    sent_id: Option<String>,
    text: Option<String>,
    tokens: Vec<Token>,
    saw_content: bool,
}

impl PendingSentence {
    /// Validates head references and emits the sentence, or `None` for a
    /// blank block.
    fn finish(self, ordinal: usize) -> Result<Option<Sentence>, TreebankError> {
        if !self.saw_content {
            return Ok(None);
        }
        let sent_id = self.sent_id.unwrap_or_else(|| format!("sent-{ordinal}"));
        if self.tokens.is_empty() {
            return Err(TreebankError::EmptySentence(sent_id));
        }
        let n = self.tokens.len();
        for tok in &self.tokens {
            if tok.head < 0 || tok.head as usize > n {
                return Err(TreebankError::HeadOutOfRange {
                    sent_id,
                    head: i64::from(tok.head),
                    n_tokens: n,
                });
            }
            if tok.head == tok.id as i32 {
                return Err(TreebankError::SelfHead { sent_id, id: tok.id });
            }
        }
        Ok(Some(Sentence { sent_id, text: self.text, tokens: self.tokens }))
    }
}

/// Parses CoNLL-U text into sentences, keeping only the ID, FORM, UPOS,
/// HEAD, and DEPREL columns. Range lines and empty nodes are skipped;
/// `# sent_id` and `# text` comments are captured; sentences without a
/// `sent_id` get a synthesized `sent-{n}` one.
pub fn parse_conllu<R: BufRead>(reader: R) -> Result<Vec<Sentence>, TreebankError> {
    let mut sentences: Vec<Sentence> = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    let mut pending = PendingSentence::default();

    let flush =
        |pending: &mut PendingSentence, sentences: &mut Vec<Sentence>, seen: &mut HashSet<String>| {
            let done = std::mem::take(pending);
            if let Some(sentence) = done.finish(sentences.len() + 1)? {
                if !seen.insert(sentence.sent_id.clone()) {
                    return Err(TreebankError::DuplicateSentId(sentence.sent_id));
                }
                sentences.push(sentence);
            }
            Ok(())
        };

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let mut line = line?;
        if line.ends_with('\r') {
            line.pop();
        }
        let line = if line_no == 1 { line.trim_start_matches('\u{feff}') } else { line.as_str() };

        if line.is_empty() {
            flush(&mut pending, &mut sentences, &mut seen_ids)?;
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            pending.saw_content = true;
            if let Some((key, value)) = comment.split_once('=') {
                match key.trim() {
                    "sent_id" => pending.sent_id = Some(value.trim().to_string()),
                    "text" => pending.text = Some(value.trim().to_string()),
                    _ => {}
                }
            }
            continue;
        }

        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(TreebankError::Malformed {
                line: line_no,
                msg: format!("expected 10 tab-separated columns, found {}", cols.len()),
            });
        }
        if cols.iter().any(|c| c.is_empty()) {
            return Err(TreebankError::Malformed {
                line: line_no,
                msg: "empty column".to_string(),
            });
        }
        pending.saw_content = true;
        if is_range_id(cols[0]) || is_empty_node_id(cols[0]) {
            continue;
        }
        let id: u32 = cols[0].parse().map_err(|_| TreebankError::Malformed {
            line: line_no,
            msg: format!("word index {:?} is not an integer", cols[0]),
        })?;
        let expected = pending.tokens.len() as u32 + 1;
        if id != expected {
            return Err(TreebankError::Malformed {
                line: line_no,
                msg: format!("word index {id} out of sequence, expected {expected}"),
            });
        }
        let head: i32 = cols[6].parse().map_err(|_| TreebankError::Malformed {
            line: line_no,
            msg: format!("head {:?} is not an integer", cols[6]),
        })?;
        pending.tokens.push(Token {
            id,
            form: cols[1].to_string(),
            upos: cols[3].to_string(),
            head,
            deprel: cols[7].to_string(),
        });
    }
    flush(&mut pending, &mut sentences, &mut seen_ids)?;
    Ok(sentences)
}

pub fn parse_conllu_str(text: &str) -> Result<Vec<Sentence>, TreebankError> {
    parse_conllu(text.as_bytes())
}

/// Reads a treebank file; `language_code` and `split` are caller-supplied
/// metadata (the format does not carry them).
pub fn read_file(
    path: impl AsRef<Path>,
    language_code: impl Into<String>,
    split: Split,
) -> Result<Treebank, TreebankError> {
    let reader = BufReader::new(File::open(path)?);
    Ok(Treebank::new(language_code, split, parse_conllu(reader)?))
}

/// Writes sentences back out in 10-column CoNLL-U, with `_` in the columns
/// this crate does not model. An empty treebank writes nothing.
pub fn write_conllu<W: Write>(out: &mut W, sentences: &[Sentence]) -> io::Result<()> {
    for sentence in sentences {
        writeln!(out, "# sent_id = {}", sentence.sent_id)?;
        if let Some(text) = &sentence.text {
            writeln!(out, "# text = {text}")?;
        }
        for t in &sentence.tokens {
            writeln!(out, "{}\t{}\t_\t{}\t_\t_\t{}\t{}\t_\t_", t.id, t.form, t.upos, t.head, t.deprel)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_conllu_string(sentences: &[Sentence]) -> String {
    let mut buf = Vec::new();
    write_conllu(&mut buf, sentences).expect("writes to Vec cannot fail");
    String::from_utf8(buf).expect("serialized sentences are UTF-8")
}

pub fn stats(tb: &Treebank) -> CorpusStats {
    CorpusStats {
        n_sentences: tb.sentences.len(),
        n_tokens: tb.sentences.iter().map(|s| s.tokens.len()).sum(),
    }
}

/// Draws `n` sentences uniformly without replacement, preserving corpus
/// order. Deterministic in `(n, seed)`.
pub fn subsample(tb: &Treebank, n: usize, seed: u64) -> Result<Treebank, TreebankError> {
    if n > tb.sentences.len() {
        return Err(TreebankError::SampleTooLarge { requested: n, available: tb.sentences.len() });
    }
    let mut rng = seeding::rng(seed, "subsample");
    let mut keep = rand::seq::index::sample(&mut rng, tb.sentences.len(), n).into_vec();
    keep.sort_unstable();
    Ok(Treebank::new(
        tb.language_code.clone(),
        tb.split,
        keep.into_iter().map(|i| tb.sentences[i].clone()).collect(),
    ))
}

/// Draws a ladder of samples where each size is a subset of every larger
/// one: one random permutation is taken and each sample is a prefix of it,
/// re-sorted to corpus order.
pub fn nested_subsamples(
    tb: &Treebank,
    sizes: &[usize],
    seed: u64,
) -> Result<Vec<Treebank>, TreebankError> {
    for pair in sizes.windows(2) {
        if pair[1] <= pair[0] {
            return Err(TreebankError::SizesNotAscending(pair[1], pair[0]));
        }
    }
    if let Some(&max) = sizes.last()
        && max > tb.sentences.len()
    {
        return Err(TreebankError::SampleTooLarge {
            requested: max,
            available: tb.sentences.len(),
        });
    }
    let mut order: Vec<usize> = (0..tb.sentences.len()).collect();
    let mut rng = seeding::rng(seed, "curve-ladder");
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    Ok(sizes
        .iter()
        .map(|&size| {
            let mut keep = order[..size].to_vec();
            keep.sort_unstable();
            Treebank::new(
                tb.language_code.clone(),
                tb.split,
                keep.into_iter().map(|i| tb.sentences[i].clone()).collect(),
            )
        })
        .collect())
}

/// Concatenates treebanks in the order given, optionally keeping only a
/// random `ceil(fraction * n)` sentences of named parts. Per-language
/// draws are seeded independently, so adding or removing one part never
/// changes what another part keeps. A sent_id already taken by an earlier
/// part is qualified as `language_code:sent_id` to keep ids unique.
pub fn mix(
    parts: &[Treebank],
    downsample: &BTreeMap<String, f64>,
    seed: u64,
) -> Result<(Treebank, Vec<MixPart>), TreebankError> {
    let mut codes: HashSet<&str> = HashSet::new();
    for part in parts {
        if !codes.insert(part.language_code.as_str()) {
            return Err(TreebankError::DuplicateLanguage(part.language_code.clone()));
        }
    }
    for (code, &fraction) in downsample {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(TreebankError::InvalidFraction { code: code.clone(), fraction });
        }
        if !codes.contains(code.as_str()) {
            return Err(TreebankError::UnknownDownsampleTarget(code.clone()));
        }
    }

    let mut sentences: Vec<Sentence> = Vec::new();
    let mut report: Vec<MixPart> = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    for part in parts {
        let available = part.sentences.len();
        let kept_sentences: Vec<Sentence> = match downsample.get(&part.language_code) {
            Some(&fraction) => {
                let n = (fraction * available as f64).ceil() as usize;
                let tag = format!("mix:{}", part.language_code);
                let mut rng = seeding::rng(seed, &tag);
                let mut keep = rand::seq::index::sample(&mut rng, available, n).into_vec();
                keep.sort_unstable();
                keep.into_iter().map(|i| part.sentences[i].clone()).collect()
            }
            None => part.sentences.clone(),
        };
        report.push(MixPart {
            language_code: part.language_code.clone(),
            available,
            kept: kept_sentences.len(),
        });
        let mut part_ids: HashSet<String> = HashSet::new();
        for mut sentence in kept_sentences {
            // A repeated id inside one part is a genuine duplicate. Across
            // parts, corpora routinely reuse ids like "train-s1", so those
            // clashes get qualified by language instead of aborting; a
            // clash that survives qualification means the inputs
            // themselves are ambiguous.
            if !part_ids.insert(sentence.sent_id.clone()) {
                return Err(TreebankError::DuplicateSentId(sentence.sent_id));
            }
            if seen_ids.contains(&sentence.sent_id) {
                sentence.sent_id = format!("{}:{}", part.language_code, sentence.sent_id);
            }
            if !seen_ids.insert(sentence.sent_id.clone()) {
                return Err(TreebankError::DuplicateSentId(sentence.sent_id));
            }
            sentences.push(sentence);
        }
    }
    let split = parts.first().map(|p| p.split).unwrap_or(Split::Train);
    Ok((Treebank::new("multi", split, sentences), report))
}
