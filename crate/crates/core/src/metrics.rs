//! Character-anchored token alignment and micro-averaged scoring.
//!
//! Tokens are compared through their character spans over the
//! whitespace-stripped concatenation of forms, so differing tokenizations
//! still get credit wherever their boundaries agree. Attachment scores
//! (UPOS, UAS, LAS) follow the usual shared-task convention: precision
//! over system tokens, recall over gold tokens, reported as F1.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::decoder::ValidityReport;
use crate::treebank::Sentence;

/// Upper bound on LCS table cells (gold chars x system chars). Pairs over
/// the bound - possible only for pathological completions - score as
/// unalignable rather than stalling the run.
const LCS_CELL_LIMIT: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignMethod {
    /// Both sides spell the same character string; spans match directly.
    ExactSpan,
    /// Character strings differ; matched via longest common subsequence.
    LcsFallback,
}

/// Pairs of (gold token index, system token index), strictly increasing on
/// both sides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub pairs: Vec<(usize, usize)>,
    pub method: AlignMethod,
}

fn char_layout(s: &Sentence) -> (Vec<char>, Vec<(usize, usize)>) {
    let mut chars = Vec::new();
    let mut spans = Vec::with_capacity(s.tokens.len());
    for t in &s.tokens {
        let start = chars.len();
        chars.extend(t.form.chars().filter(|c| !c.is_whitespace()));
        spans.push((start, chars.len()));
    }
    (chars, spans)
}

/// Value of the best matching of two suffixes: matched characters
/// (maximized), then contiguous matched segments (minimized).
type MatchValue = (u32, u32);

fn value_better(x: MatchValue, y: MatchValue) -> bool {
    x.0 > y.0 || (x.0 == y.0 && x.1 < y.1)
}

/// Canonical LCS character matching, gold side to system side.
///
/// Among all longest common subsequences the one splitting into the
/// fewest contiguous segments is chosen, so a dropped token's characters
/// cannot steal isolated matches out of a neighbouring token. Remaining
/// ties are resolved by a forward walk that prefers taking an optimal
/// match, and otherwise skips the side whose remaining characters compare
/// lexicographically smaller - a rule that depends only on the strings,
/// never on which side is which, which keeps scoring swap-symmetric.
fn lcs_char_matching(a: &[char], b: &[char]) -> Vec<Option<usize>> {
    let (n, m) = (a.len(), b.len());
    let width = m + 1;
    // value[i * width + j][run] holds the best MatchValue for a[i..] vs
    // b[j..]; `run` = 1 when (i-1, j-1) was matched, so a match at (i, j)
    // continues the current segment instead of opening a new one.
    let mut value = vec![[(0u32, 0u32); 2]; (n + 1) * width];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            let skip_gold = value[(i + 1) * width + j][0];
            let skip_sys = value[i * width + j + 1][0];
            let skips = if value_better(skip_sys, skip_gold) { skip_sys } else { skip_gold };
            for run in 0..2usize {
                let mut best = skips;
                if a[i] == b[j] {
                    let next = value[(i + 1) * width + j + 1][1];
                    let matched = (next.0 + 1, next.1 + (1 - run as u32));
                    if !value_better(best, matched) {
                        best = matched;
                    }
                }
                value[i * width + j][run] = best;
            }
        }
    }

    let mut matched = vec![None; n];
    let (mut i, mut j, mut run) = (0, 0, 0usize);
    while i < n && j < m {
        let here = value[i * width + j][run];
        if a[i] == b[j] {
            let next = value[(i + 1) * width + j + 1][1];
            if (next.0 + 1, next.1 + (1 - run as u32)) == here {
                matched[i] = Some(j);
                i += 1;
                j += 1;
                run = 1;
                continue;
            }
        }
        let skip_gold = value[(i + 1) * width + j][0];
        let skip_sys = value[i * width + j + 1][0];
        if here == skip_gold && (here != skip_sys || a[i..] < b[j..]) {
            i += 1;
        } else {
            j += 1;
        }
        run = 0;
    }
    matched
}

/// Token pairs implied by a character matching: a gold token aligns to the
/// system token whose span it maps onto exactly (same start, same width,
/// contiguous). Zero-width tokens (whitespace-only forms) never align.
fn pair_tokens(
    gold_spans: &[(usize, usize)],
    sys_spans: &[(usize, usize)],
    char_match: &[Option<usize>],
) -> Vec<(usize, usize)> {
    let sys_by_start: HashMap<usize, usize> = sys_spans
        .iter()
        .enumerate()
        .filter(|(_, (a, b))| b > a)
        .map(|(tok, (a, _))| (*a, tok))
        .collect();
    let mut pairs = Vec::new();
    for (g, &(a, b)) in gold_spans.iter().enumerate() {
        if a == b {
            continue;
        }
        let Some(start) = char_match[a] else { continue };
        let Some(&s) = sys_by_start.get(&start) else { continue };
        let (sa, sb) = sys_spans[s];
        if sb - sa == b - a && (a..b).all(|k| char_match[k] == Some(sa + (k - a))) {
            pairs.push((g, s));
        }
    }
    pairs
}

/// Aligns system tokens to gold tokens through character spans.
pub fn align(gold: &Sentence, system: &Sentence) -> Alignment {
    let (gold_chars, gold_spans) = char_layout(gold);
    let (sys_chars, sys_spans) = char_layout(system);
    if gold_chars == sys_chars {
        let identity: Vec<Option<usize>> = (0..gold_chars.len()).map(Some).collect();
        let pairs = pair_tokens(&gold_spans, &sys_spans, &identity);
        return Alignment { pairs, method: AlignMethod::ExactSpan };
    }
    if gold_chars.len().saturating_mul(sys_chars.len()) > LCS_CELL_LIMIT {
        log::warn!(
            "skipping alignment of {}x{} chars (over the {} cell limit)",
            gold_chars.len(),
            sys_chars.len(),
            LCS_CELL_LIMIT
        );
        return Alignment { pairs: Vec::new(), method: AlignMethod::LcsFallback };
    }
    let char_match = lcs_char_matching(&gold_chars, &sys_chars);
    let pairs = pair_tokens(&gold_spans, &sys_spans, &char_match);
    Alignment { pairs, method: AlignMethod::LcsFallback }
}

/// Raw match counts for one sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct SentenceCounts {
    pub n_gold: usize,
    pub n_sys: usize,
    pub aligned: usize,
    pub upos_matches: usize,
    pub uas_matches: usize,
    pub las_matches: usize,
}

/// Scores one aligned sentence pair. Heads match when both tokens are
/// roots or when the two head tokens (looked up by ID on each side) are
/// themselves aligned to each other; a relation match on top of that
/// makes an LAS match.
pub fn score_sentence(gold: &Sentence, system: &Sentence, alignment: &Alignment) -> SentenceCounts {
    let mut gold_pos: HashMap<u32, usize> = HashMap::new();
    for (pos, t) in gold.tokens.iter().enumerate() {
        gold_pos.entry(t.id).or_insert(pos);
    }
    let mut sys_pos: HashMap<u32, usize> = HashMap::new();
    for (pos, t) in system.tokens.iter().enumerate() {
        sys_pos.entry(t.id).or_insert(pos);
    }
    let aligned_to: HashMap<usize, usize> = alignment.pairs.iter().copied().collect();

    let mut counts = SentenceCounts {
        n_gold: gold.tokens.len(),
        n_sys: system.tokens.len(),
        aligned: alignment.pairs.len(),
        ..Default::default()
    };
    for &(g, s) in &alignment.pairs {
        let gt = &gold.tokens[g];
        let st = &system.tokens[s];
        if gt.upos == st.upos {
            counts.upos_matches += 1;
        }
        let heads_match = match (gt.head, st.head) {
            (0, 0) => true,
            (gh, sh) if gh > 0 && sh > 0 => {
                match (gold_pos.get(&(gh as u32)), sys_pos.get(&(sh as u32))) {
                    (Some(pg), Some(ps)) => aligned_to.get(pg) == Some(ps),
                    _ => false,
                }
            }
            _ => false,
        };
        if heads_match {
            counts.uas_matches += 1;
            if gt.deprel == st.deprel {
                counts.las_matches += 1;
            }
        }
    }
    counts
}

/// Everything recorded about one evaluated sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SentenceScore {
    pub sent_id: String,
    pub n_gold: usize,
    /// Token counts before ID/FORM recovery.
    pub n_sys_raw: usize,
    pub aligned_raw: usize,
    /// Counts after recovery; attachment matches are measured here.
    pub counts: SentenceCounts,
    pub validity: ValidityReport,
}

/// Micro-averaged matches with their two denominators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct PrfScore {
    pub matches: usize,
    pub n_sys: usize,
    pub n_gold: usize,
}

impl PrfScore {
    fn pct(num: usize, den: usize) -> f64 {
        if den == 0 { 0.0 } else { 100.0 * num as f64 / den as f64 }
    }

    /// Percent of system tokens, 0.0 when there are none.
    pub fn precision(&self) -> f64 {
        Self::pct(self.matches, self.n_sys)
    }

    /// Percent of gold tokens, 0.0 when there are none.
    pub fn recall(&self) -> f64 {
        Self::pct(self.matches, self.n_gold)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) }
    }

    fn add(&mut self, matches: usize, n_sys: usize, n_gold: usize) {
        self.matches += matches;
        self.n_sys += n_sys;
        self.n_gold += n_gold;
    }
}

/// Corpus-level structural findings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ValiditySummary {
    pub clean_sentences: usize,
    pub cyclic_sentences: usize,
    pub multi_root_sentences: usize,
    pub rootless_sentences: usize,
    pub out_of_range_heads: usize,
    pub self_loops: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub n_sentences: usize,
    /// Alignment before ID/FORM recovery.
    pub token: PrfScore,
    /// Alignment after recovery; also the basis of UPOS/UAS/LAS.
    pub token_recovered: PrfScore,
    pub upos: PrfScore,
    pub uas: PrfScore,
    pub las: PrfScore,
    pub validity: ValiditySummary,
}

/// Micro-averages per-sentence scores. Pure aggregation: the result does
/// not depend on the order of the inputs.
pub fn aggregate<'a>(scores: impl IntoIterator<Item = &'a SentenceScore>) -> EvalReport {
    let mut report = EvalReport {
        n_sentences: 0,
        token: PrfScore::default(),
        token_recovered: PrfScore::default(),
        upos: PrfScore::default(),
        uas: PrfScore::default(),
        las: PrfScore::default(),
        validity: ValiditySummary::default(),
    };
    for s in scores {
        report.n_sentences += 1;
        report.token.add(s.aligned_raw, s.n_sys_raw, s.n_gold);
        let c = &s.counts;
        report.token_recovered.add(c.aligned, c.n_sys, c.n_gold);
        report.upos.add(c.upos_matches, c.n_sys, c.n_gold);
        report.uas.add(c.uas_matches, c.n_sys, c.n_gold);
        report.las.add(c.las_matches, c.n_sys, c.n_gold);
        let v = &s.validity;
        report.validity.clean_sentences += usize::from(v.is_clean());
        report.validity.cyclic_sentences += usize::from(v.has_cycle);
        report.validity.multi_root_sentences += usize::from(v.multiple_roots > 1);
        report.validity.rootless_sentences += usize::from(v.multiple_roots == 0);
        report.validity.out_of_range_heads += v.out_of_range_heads;
        report.validity.self_loops += v.self_loops;
    }
    report
}

impl EvalReport {
    /// `token_recall<TAB>upos_f1<TAB>uas_f1<TAB>las_f1`, one decimal each.
    /// Token recall is measured after recovery, like the other columns.
    pub fn summary_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}",
            format_score(self.token_recovered.recall()),
            format_score(self.upos.f1()),
            format_score(self.uas.f1()),
            format_score(self.las.f1()),
        )
    }
}

/// Rounds to one decimal, half away from zero (83.25 -> 83.3). The small
/// epsilon keeps values that are exact halves in decimal, but a hair under
/// in binary, from rounding down.
pub fn round1(x: f64) -> f64 {
    (x * 10.0 + 0.5 + 1e-9).floor() / 10.0
}

/// One-decimal percent string using [`round1`].
pub fn format_score(x: f64) -> String {
    format!("{:.1}", round1(x))
}

/// One learning-curve row: scores of a model trained on `size` sentences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub size: usize,
    pub token_recall: f64,
    pub token_recall_after_recovery: f64,
    pub upos_r: f64,
    pub upos_p: f64,
    pub head_r: f64,
    pub head_deprel_r: f64,
}

impl CurvePoint {
    pub fn from_report(size: usize, report: &EvalReport) -> CurvePoint {
        CurvePoint {
            size,
            token_recall: report.token.recall(),
            token_recall_after_recovery: report.token_recovered.recall(),
            upos_r: report.upos.recall(),
            upos_p: report.upos.precision(),
            head_r: report.uas.recall(),
            head_deprel_r: report.las.recall(),
        }
    }
}

pub const CURVE_HEADER: &str =
    "size\ttoken_recall\ttoken_recall_after_recovery\tupos_r\tupos_p\thead_r\thead_deprel_r";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("duplicate curve size {0}")]
    DuplicateCurveSize(usize),
}

/// Renders curve points as a TSV table, sorted by ascending size.
pub fn curve_table(points: &[CurvePoint]) -> Result<String, MetricsError> {
    let mut points = points.to_vec();
    points.sort_by_key(|p| p.size);
    for pair in points.windows(2) {
        if pair[0].size == pair[1].size {
            return Err(MetricsError::DuplicateCurveSize(pair[0].size));
        }
    }
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for p in &points {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            p.size,
            format_score(p.token_recall),
            format_score(p.token_recall_after_recovery),
            format_score(p.upos_r),
            format_score(p.upos_p),
            format_score(p.head_r),
            format_score(p.head_deprel_r),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::{Token, parse_conllu_str};
    use proptest::prelude::*;

    const SPECULATING: &str = "\
# sent_id = example-001
# text = I'm just speculating now.
1\tI\t_\tPRON\t_\t_\t4\tnsubj\t_\t_
2\t'm\t_\tAUX\t_\t_\t4\taux\t_\t_
3\tjust\t_\tADV\t_\t_\t4\tadvmod\t_\t_
4\tspeculating\t_\tVERB\t_\t_\t0\troot\t_\t_
5\tnow\t_\tADV\t_\t_\t4\tadvmod\t_\t_
6\t.\t_\tPUNCT\t_\t_\t4\tpunct\t_\t_
";

    fn speculating() -> Sentence {
        parse_conllu_str(SPECULATING).unwrap().remove(0)
    }

    fn token(id: u32, form: &str, upos: &str, head: i32, deprel: &str) -> Token {
        Token { id, form: form.into(), upos: upos.into(), head, deprel: deprel.into() }
    }

    fn sentence(tokens: Vec<Token>) -> Sentence {
        Sentence { sent_id: "t".into(), text: None, tokens }
    }

    #[test]
    fn identical_sentences_align_exactly() {
        let gold = speculating();
        let a = align(&gold, &gold);
        assert_eq!(a.method, AlignMethod::ExactSpan);
        assert_eq!(a.pairs, (0..6).map(|i| (i, i)).collect::<Vec<_>>());
        let counts = score_sentence(&gold, &gold, &a);
        assert_eq!(counts, SentenceCounts {
            n_gold: 6,
            n_sys: 6,
            aligned: 6,
            upos_matches: 6,
            uas_matches: 6,
            las_matches: 6,
        });
    }

    #[test]
    fn same_characters_different_boundaries_align_where_spans_agree() {
        let gold = speculating();
        // system glues "I" and "'m" into one token
        let mut sys = gold.clone();
        sys.tokens[0] = token(1, "I'm", "PRON", 3, "nsubj");
        sys.tokens.remove(1);
        for (i, t) in sys.tokens.iter_mut().enumerate() {
            t.id = i as u32 + 1;
        }
        let a = align(&gold, &sys);
        assert_eq!(a.method, AlignMethod::ExactSpan);
        // gold "I" and "'m" have no counterpart; the other four pair up
        assert_eq!(a.pairs, vec![(2, 1), (3, 2), (4, 3), (5, 4)]);
    }

    #[test]
    fn dropped_token_still_aligns_the_rest() {
        let gold = speculating();
        let mut sys = gold.clone();
        sys.tokens.remove(2); // drop "just"
        for (i, t) in sys.tokens.iter_mut().enumerate() {
            t.id = i as u32 + 1;
        }
        let a = align(&gold, &sys);
        assert_eq!(a.method, AlignMethod::LcsFallback);
        assert_eq!(a.pairs, vec![(0, 0), (1, 1), (3, 2), (4, 3), (5, 4)]);
    }

    #[test]
    fn internal_whitespace_is_invisible_to_alignment() {
        let gold = sentence(vec![token(1, "Hà Nội", "PROPN", 0, "root")]);
        let sys = sentence(vec![token(1, "HàNội", "PROPN", 0, "root")]);
        let a = align(&gold, &sys);
        assert_eq!(a.method, AlignMethod::ExactSpan);
        assert_eq!(a.pairs, vec![(0, 0)]);
    }

    #[test]
    fn whitespace_only_tokens_never_align() {
        let gold = sentence(vec![token(1, "a", "X", 0, "root"), token(2, " ", "X", 1, "dep")]);
        let sys = gold.clone();
        let a = align(&gold, &sys);
        assert_eq!(a.pairs, vec![(0, 0)]);
    }

    #[test]
    fn misspelled_token_is_not_aligned() {
        let gold = sentence(vec![token(1, "cat", "NOUN", 0, "root"), token(2, "naps", "VERB", 1, "dep")]);
        let sys = sentence(vec![token(1, "cut", "NOUN", 0, "root"), token(2, "naps", "VERB", 1, "dep")]);
        let a = align(&gold, &sys);
        assert_eq!(a.method, AlignMethod::LcsFallback);
        assert_eq!(a.pairs, vec![(1, 1)]);
    }

    #[test]
    fn head_errors_cost_uas_and_las_only() {
        let gold = speculating();
        let mut sys = gold.clone();
        sys.tokens[2].head = 1;
        let counts = score_sentence(&gold, &sys, &align(&gold, &sys));
        assert_eq!((counts.upos_matches, counts.uas_matches, counts.las_matches), (6, 5, 5));

        let mut sys = gold.clone();
        sys.tokens[4].deprel = "obl".into();
        let counts = score_sentence(&gold, &sys, &align(&gold, &sys));
        assert_eq!((counts.upos_matches, counts.uas_matches, counts.las_matches), (6, 6, 5));

        let mut sys = gold.clone();
        sys.tokens[0].upos = "NOUN".into();
        let counts = score_sentence(&gold, &sys, &align(&gold, &sys));
        assert_eq!((counts.upos_matches, counts.uas_matches, counts.las_matches), (5, 6, 6));
    }

    #[test]
    fn heads_match_through_alignment_not_raw_ids() {
        // system dropped "just" (gold id 3) and renumbered, so surviving
        // heads point at different numbers but the same words
        let gold = speculating();
        let sys = sentence(vec![
            token(1, "I", "PRON", 3, "nsubj"),
            token(2, "'m", "AUX", 3, "aux"),
            token(3, "speculating", "VERB", 0, "root"),
            token(4, "now", "ADV", 3, "advmod"),
            token(5, ".", "PUNCT", 3, "punct"),
        ]);
        let counts = score_sentence(&gold, &sys, &align(&gold, &sys));
        assert_eq!(counts.aligned, 5);
        assert_eq!(counts.uas_matches, 5);
        assert_eq!(counts.las_matches, 5);
    }

    #[test]
    fn invalid_heads_never_match() {
        let gold = sentence(vec![token(1, "a", "X", 2, "dep"), token(2, "b", "X", 0, "root")]);
        let sys = sentence(vec![
            token(1, "a", "X", crate::treebank::INVALID_HEAD, "dep"),
            token(2, "b", "X", 0, "root"),
        ]);
        let counts = score_sentence(&gold, &sys, &align(&gold, &sys));
        assert_eq!(counts.uas_matches, 1);
    }

    fn score_of(gold: &Sentence, sys: &Sentence) -> SentenceScore {
        let a_raw = align(gold, sys);
        let counts = score_sentence(gold, sys, &a_raw);
        SentenceScore {
            sent_id: gold.sent_id.clone(),
            n_gold: gold.tokens.len(),
            n_sys_raw: sys.tokens.len(),
            aligned_raw: a_raw.pairs.len(),
            counts,
            validity: ValidityReport {
                n_rows: sys.tokens.len(),
                multiple_roots: sys.tokens.iter().filter(|t| t.head == 0).count(),
                out_of_range_heads: 0,
                self_loops: 0,
                has_cycle: false,
            },
        }
    }

    #[test]
    fn aggregate_micro_averages_to_known_fraction() {
        // two six-token sentences, one head error total: 11/12 = 91.666..
        let gold = speculating();
        let mut wrong = gold.clone();
        wrong.tokens[2].head = 1;
        let mut second = gold.clone();
        second.sent_id = "example-002".into();
        let scores = vec![score_of(&gold, &wrong), score_of(&second, &second)];
        let report = aggregate(&scores);
        assert_eq!(report.n_sentences, 2);
        assert_eq!(report.uas.matches, 11);
        assert_eq!(report.uas.n_gold, 12);
        assert_eq!(format_score(report.uas.f1()), "91.7");
        assert_eq!(report.summary_line(), "100.0\t100.0\t91.7\t91.7");

        let reversed: Vec<_> = scores.iter().rev().collect();
        let flipped = aggregate(reversed);
        assert_eq!(flipped, report, "aggregation must not depend on order");
    }

    #[test]
    fn aggregate_handles_empty_inputs() {
        let report = aggregate([]);
        assert_eq!(report.n_sentences, 0);
        assert_eq!(report.summary_line(), "0.0\t0.0\t0.0\t0.0");

        let gold = speculating();
        let empty = sentence(vec![]);
        let scores = vec![score_of(&gold, &empty)];
        let report = aggregate(&scores);
        assert_eq!(report.token_recovered.recall(), 0.0);
        assert_eq!(report.token_recovered.precision(), 0.0, "no system tokens");
        assert_eq!(report.upos.f1(), 0.0);
    }

    #[test]
    fn score_formatting_rounds_half_up() {
        assert_eq!(format_score(250.0 / 3.0), "83.3");
        assert_eq!(format_score(1100.0 / 12.0), "91.7");
        assert_eq!(format_score(100.0), "100.0");
        assert_eq!(format_score(87.65), "87.7");
        assert_eq!(format_score(87.64999), "87.6");
        assert_eq!(format_score(0.0), "0.0");
        assert_eq!(round1(83.333333), 83.3);
    }

    #[test]
    fn curve_table_sorts_and_rejects_duplicates() {
        let gold = speculating();
        let report = aggregate(&[score_of(&gold, &gold)]);
        let big = CurvePoint::from_report(250, &report);
        let small = CurvePoint { size: 125, upos_r: 50.0, ..big };
        let text = curve_table(&[big, small]).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CURVE_HEADER);
        assert_eq!(lines[1], "125\t100.0\t100.0\t50.0\t100.0\t100.0\t100.0");
        assert_eq!(lines[2], "250\t100.0\t100.0\t100.0\t100.0\t100.0\t100.0");
        assert_eq!(
            curve_table(&[big, big]),
            Err(MetricsError::DuplicateCurveSize(250))
        );
    }

    prop_compose! {
        fn arb_tokens()(
            specs in proptest::collection::vec(("[ab ]{0,3}", 0usize..4, prop_oneof!["NOUN", "VERB"], prop_oneof!["dep", "obl"]), 1..6),
        ) -> Vec<Token> {
            let n = specs.len();
            specs
                .into_iter()
                .enumerate()
                .map(|(i, (form, head, upos, deprel))| Token {
                    id: i as u32 + 1,
                    form,
                    upos,
                    head: (head % (n + 1)) as i32,
                    deprel,
                })
                .collect()
        }
    }

    proptest! {
        /// Swapping gold and system mirrors the counts exactly.
        #[test]
        fn scoring_is_swap_symmetric(a in arb_tokens(), b in arb_tokens()) {
            let left = sentence(a);
            let right = sentence(b);
            let fwd = score_sentence(&left, &right, &align(&left, &right));
            let rev = score_sentence(&right, &left, &align(&right, &left));
            prop_assert_eq!(fwd.aligned, rev.aligned);
            prop_assert_eq!(fwd.upos_matches, rev.upos_matches);
            prop_assert_eq!(fwd.uas_matches, rev.uas_matches);
            prop_assert_eq!(fwd.las_matches, rev.las_matches);
            prop_assert_eq!(fwd.n_gold, rev.n_sys);
        }

        /// Matches can only shrink going from alignment to UAS to LAS.
        #[test]
        fn match_counts_nest(a in arb_tokens(), b in arb_tokens()) {
            let gold = sentence(a);
            let sys = sentence(b);
            let c = score_sentence(&gold, &sys, &align(&gold, &sys));
            prop_assert!(c.las_matches <= c.uas_matches);
            prop_assert!(c.uas_matches <= c.aligned);
            prop_assert!(c.upos_matches <= c.aligned);
            prop_assert!(c.aligned <= c.n_gold.min(c.n_sys));
        }
    }
}
