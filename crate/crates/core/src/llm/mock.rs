//! Deterministic stand-in for a fine-tuned parser model.
//!
//! The mock replays the gold annotation, optionally pushed through a
//! documented noise model. Every draw comes from a stream keyed by
//! `(seed, sentence id)`, so a corpus run is reproducible sentence by
//! sentence regardless of batching or order.

use rand::Rng;
use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use crate::llm::client::LlmError;
use crate::prompts::{PromptBundle, StepPlan};
use crate::seeding;
use crate::treebank::Sentence;

const UPOS_TAGS: &[&str] = &[
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM", "PART", "PRON", "PROPN",
    "PUNCT", "SCONJ", "SYM", "VERB", "X",
];

const DEPRELS: &[&str] = &[
    "acl", "advcl", "advmod", "amod", "appos", "aux", "case", "cc", "ccomp", "clf", "compound",
    "conj", "cop", "csubj", "dep", "det", "discourse", "dislocated", "expl", "fixed", "flat",
    "goeswith", "iobj", "list", "mark", "nmod", "nsubj", "nummod", "obj", "obl", "orphan",
    "parataxis", "punct", "reparandum", "root", "vocative", "xcomp",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MockMode {
    /// Replay the gold table verbatim.
    Oracle,
    /// Apply the error probabilities below.
    Noisy,
}

/// Error model for the mock. Probabilities are independent per row (or per
/// sentence for the structural ones) and must sit in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockPolicy {
    pub mode: MockMode,
    pub seed: u64,
    /// Drop a row entirely, as if the model skipped a word.
    #[serde(default)]
    pub p_drop_row: f64,
    /// Emit only the first four fields of a final-table row.
    #[serde(default)]
    pub p_truncate_fields: f64,
    /// Rewrite a non-root HEAD to a different in-range value.
    #[serde(default)]
    pub p_head_error: f64,
    /// Replace UPOS with a different tag from the usual inventory.
    #[serde(default)]
    pub p_upos_error: f64,
    /// Replace DEPREL with a different relation from the usual inventory.
    #[serde(default)]
    pub p_deprel_error: f64,
    /// Point one extra row at the root (per sentence).
    #[serde(default)]
    pub p_extra_root: f64,
    /// Rewire two rows into a two-cycle (per sentence).
    #[serde(default)]
    pub p_cycle: f64,
}

impl MockPolicy {
    pub fn oracle(seed: u64) -> MockPolicy {
        MockPolicy {
            mode: MockMode::Oracle,
            seed,
            p_drop_row: 0.0,
            p_truncate_fields: 0.0,
            p_head_error: 0.0,
            p_upos_error: 0.0,
            p_deprel_error: 0.0,
            p_extra_root: 0.0,
            p_cycle: 0.0,
        }
    }

    /// A plausibly sloppy model: mostly right, wrong in every way we know
    /// how to detect.
    pub fn noisy(seed: u64) -> MockPolicy {
        MockPolicy {
            mode: MockMode::Noisy,
            p_drop_row: 0.02,
            p_truncate_fields: 0.02,
            p_head_error: 0.10,
            p_upos_error: 0.05,
            p_deprel_error: 0.08,
            p_extra_root: 0.05,
            p_cycle: 0.03,
            ..MockPolicy::oracle(seed)
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        let ps = [
            ("p_drop_row", self.p_drop_row),
            ("p_truncate_fields", self.p_truncate_fields),
            ("p_head_error", self.p_head_error),
            ("p_upos_error", self.p_upos_error),
            ("p_deprel_error", self.p_deprel_error),
            ("p_extra_root", self.p_extra_root),
            ("p_cycle", self.p_cycle),
        ];
        for (name, p) in ps {
            if !(0.0..=1.0).contains(&p) {
                return Err(LlmError::InvalidPolicy(format!("{name} = {p} is outside [0, 1]")));
            }
            if self.mode == MockMode::Oracle && p != 0.0 {
                return Err(LlmError::InvalidPolicy(format!(
                    "oracle mode cannot carry noise ({name} = {p})"
                )));
            }
        }
        Ok(())
    }
}

struct MockRow {
    id: u32,
    form: String,
    upos: String,
    head: i32,
    deprel: String,
    /// How many of the five final-table fields the row gets.
    n_fields: usize,
}

/// A different in-range head: anything in `0..=n` except the current value
/// and the row's own id.
fn wrong_head<R: Rng>(rng: &mut R, n: i32, current: i32, id: u32) -> i32 {
    loop {
        let candidate = rng.random_range(0..=n);
        if candidate != current && candidate != id as i32 {
            return candidate;
        }
    }
}

fn different_choice<R: Rng>(rng: &mut R, pool: &[&str], current: &str) -> String {
    loop {
        let pick = pool.choose(rng).expect("inventories are non-empty");
        if *pick != current {
            return (*pick).to_string();
        }
    }
}

fn table(rows: &[MockRow], width: usize) -> String {
    let lines: Vec<String> = rows
        .iter()
        .map(|r| {
            let effective = width.min(r.n_fields);
            let mut fields = vec![r.id.to_string(), r.form.clone()];
            if effective >= 3 {
                fields.push(r.upos.clone());
            }
            if effective >= 4 {
                fields.push(r.head.to_string());
            }
            if effective >= 5 {
                fields.push(r.deprel.clone());
            }
            fields.join("\t")
        })
        .collect();
    lines.join("\n")
}

/// Produces the completion text a model would send back for this prompt.
/// Deterministic in `(policy.seed, bundle.sent_id)`.
pub fn mock_complete(bundle: &PromptBundle, gold: &Sentence, policy: &MockPolicy) -> String {
    if policy.mode == MockMode::Oracle {
        return bundle.gold_assistant.clone();
    }
    let tag = format!("mock:{}", bundle.sent_id);
    let mut rng = seeding::rng(policy.seed, &tag);
    let n = gold.tokens.len() as i32;

    let mut rows: Vec<MockRow> = gold
        .tokens
        .iter()
        .filter(|_| !rng.random_bool(policy.p_drop_row))
        .map(|t| MockRow {
            id: t.id,
            form: t.form.clone(),
            upos: t.upos.clone(),
            head: t.head,
            deprel: t.deprel.clone(),
            n_fields: 5,
        })
        .collect();

    for row in &mut rows {
        if rng.random_bool(policy.p_truncate_fields) {
            row.n_fields = 4;
        }
        if row.head > 0 && rng.random_bool(policy.p_head_error) {
            row.head = wrong_head(&mut rng, n, row.head, row.id);
        }
        if rng.random_bool(policy.p_upos_error) {
            row.upos = different_choice(&mut rng, UPOS_TAGS, &row.upos);
        }
        if rng.random_bool(policy.p_deprel_error) {
            row.deprel = different_choice(&mut rng, DEPRELS, &row.deprel);
        }
    }

    if rng.random_bool(policy.p_extra_root) {
        let non_roots: Vec<usize> =
            (0..rows.len()).filter(|&i| rows[i].head != 0).collect();
        if let Some(&pick) = non_roots.as_slice().choose(&mut rng) {
            rows[pick].head = 0;
        }
    }
    if rng.random_bool(policy.p_cycle) && rows.len() >= 2 {
        let a = rng.random_range(0..rows.len());
        let b = loop {
            let b = rng.random_range(0..rows.len());
            if b != a {
                break b;
            }
        };
        rows[a].head = rows[b].id as i32;
        rows[b].head = rows[a].id as i32;
    }

    match bundle.plan {
        StepPlan::OneStep => table(&rows, 5),
        StepPlan::TwoStep => {
            format!("- Task 1\n{}\n\n- Task 2\n{}", table(&rows, 3), table(&rows, 5))
        }
        StepPlan::ThreeStep => format!(
            "- Task 1\n{}\n\n- Task 2\n{}\n\n- Task 3\n{}",
            table(&rows, 3),
            table(&rows, 4),
            table(&rows, 5)
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::{extract_final_table, to_sentence};
    use crate::prompts::{LanguageProfile, build_prompt};
    use crate::treebank::parse_conllu_str;

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

    fn gold() -> Sentence {
        parse_conllu_str(SPECULATING).unwrap().remove(0)
    }

    fn bundle_for(plan: StepPlan) -> PromptBundle {
        build_prompt(&gold(), plan, &LanguageProfile::for_code("en_ewt").unwrap()).unwrap()
    }

    fn only(field: &str, p: f64, seed: u64) -> MockPolicy {
        let mut policy = MockPolicy::oracle(seed);
        policy.mode = MockMode::Noisy;
        match field {
            "drop" => policy.p_drop_row = p,
            "truncate" => policy.p_truncate_fields = p,
            "head" => policy.p_head_error = p,
            "upos" => policy.p_upos_error = p,
            "deprel" => policy.p_deprel_error = p,
            "extra_root" => policy.p_extra_root = p,
            "cycle" => policy.p_cycle = p,
            _ => unreachable!(),
        }
        policy
    }

    #[test]
    fn oracle_mode_replays_gold_verbatim() {
        for plan in [StepPlan::OneStep, StepPlan::TwoStep, StepPlan::ThreeStep] {
            let b = bundle_for(plan);
            assert_eq!(mock_complete(&b, &gold(), &MockPolicy::oracle(1)), b.gold_assistant);
        }
    }

    #[test]
    fn noisy_mode_is_deterministic_per_seed_and_sentence() {
        let b = bundle_for(StepPlan::ThreeStep);
        let policy = MockPolicy::noisy(42);
        assert_eq!(mock_complete(&b, &gold(), &policy), mock_complete(&b, &gold(), &policy));
        let outputs: Vec<String> = (0..4)
            .map(|i| {
                let mut policy = MockPolicy::noisy(42 + i);
                policy.p_head_error = 1.0;
                mock_complete(&b, &gold(), &policy)
            })
            .collect();
        assert!(
            outputs.windows(2).any(|w| w[0] != w[1]),
            "different seeds should eventually differ: {outputs:?}"
        );
    }

    #[test]
    fn distinct_sentences_draw_distinct_noise() {
        let policy = only("head", 1.0, 7);
        let a = bundle_for(StepPlan::OneStep);
        let mut other = gold();
        other.sent_id = "example-002".into();
        let b = build_prompt(&other, StepPlan::OneStep, &LanguageProfile::for_code("en_ewt").unwrap()).unwrap();
        assert_ne!(mock_complete(&a, &gold(), &policy), mock_complete(&b, &other, &policy));
    }

    #[test]
    fn full_drop_probability_empties_the_reply() {
        for plan in [StepPlan::OneStep, StepPlan::ThreeStep] {
            let b = bundle_for(plan);
            let text = mock_complete(&b, &gold(), &only("drop", 1.0, 3));
            let t = extract_final_table(&text, plan);
            assert!(t.is_empty(), "{text:?}");
        }
    }

    #[test]
    fn truncation_drops_the_final_field_only() {
        let b = bundle_for(StepPlan::ThreeStep);
        let text = mock_complete(&b, &gold(), &only("truncate", 1.0, 3));
        let t = extract_final_table(&text, StepPlan::ThreeStep);
        assert_eq!(t.rows.len(), 6);
        assert!(t.well_formed_rows().iter().all(|ok| !ok));
        assert!(t.rows.iter().all(|r| r.fields.len() == 4));
        // earlier task blocks keep their own widths
        assert!(text.contains("- Task 1\n1\tI\tPRON\n"));
    }

    #[test]
    fn head_noise_changes_every_non_root_head() {
        let b = bundle_for(StepPlan::OneStep);
        let text = mock_complete(&b, &gold(), &only("head", 1.0, 11));
        let (sys, _) = to_sentence(&extract_final_table(&text, StepPlan::OneStep));
        assert_eq!(sys.tokens.len(), 6);
        for (t, g) in sys.tokens.iter().zip(gold().tokens.iter()) {
            if g.head == 0 {
                assert_eq!(t.head, 0, "root row must keep head 0");
            } else {
                assert_ne!(t.head, g.head, "non-root head must move");
                assert_ne!(t.head, t.id as i32, "head noise never makes a self-loop");
                assert!((0..=6).contains(&t.head));
            }
        }
    }

    #[test]
    fn tag_noise_stays_inside_inventories() {
        let b = bundle_for(StepPlan::OneStep);
        let policy = {
            let mut p = only("upos", 1.0, 5);
            p.p_deprel_error = 1.0;
            p
        };
        let text = mock_complete(&b, &gold(), &policy);
        let (sys, _) = to_sentence(&extract_final_table(&text, StepPlan::OneStep));
        for (t, g) in sys.tokens.iter().zip(gold().tokens.iter()) {
            assert_ne!(t.upos, g.upos);
            assert!(UPOS_TAGS.contains(&t.upos.as_str()));
            assert_ne!(t.deprel, g.deprel);
            assert!(DEPRELS.contains(&t.deprel.as_str()));
        }
    }

    #[test]
    fn extra_root_makes_multiple_roots() {
        let b = bundle_for(StepPlan::OneStep);
        let text = mock_complete(&b, &gold(), &only("extra_root", 1.0, 9));
        let (_, report) = to_sentence(&extract_final_table(&text, StepPlan::OneStep));
        assert_eq!(report.multiple_roots, 2);
    }

    #[test]
    fn cycle_noise_is_detectable() {
        let b = bundle_for(StepPlan::OneStep);
        let text = mock_complete(&b, &gold(), &only("cycle", 1.0, 13));
        let (_, report) = to_sentence(&extract_final_table(&text, StepPlan::OneStep));
        assert!(report.has_cycle, "{text}");
    }

    #[test]
    fn policy_validation_rejects_misconfiguration() {
        assert!(MockPolicy::oracle(1).validate().is_ok());
        assert!(MockPolicy::noisy(1).validate().is_ok());
        assert!(only("head", 1.5, 1).validate().is_err());
        assert!(only("drop", -0.1, 1).validate().is_err());
        let mut oracle_with_noise = MockPolicy::oracle(1);
        oracle_with_noise.p_cycle = 0.5;
        assert!(oracle_with_noise.validate().is_err());
    }

    #[test]
    fn policy_round_trips_through_serde() {
        let policy = MockPolicy::noisy(17);
        let json = serde_json::to_string(&policy).unwrap();
        let back: MockPolicy = serde_json::from_str(&json).unwrap();
        assert_eq!(back, policy);
        let partial: MockPolicy =
            serde_json::from_str(r#"{"mode":"noisy","seed":3,"p_head_error":0.25}"#).unwrap();
        assert_eq!(partial.p_head_error, 0.25);
        assert_eq!(partial.p_drop_row, 0.0);
    }
}
