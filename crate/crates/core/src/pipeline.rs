//! Glue for the decode-and-score path: one completion text in, one fully
//! evaluated sentence out.

use crate::decoder::{self, ParsedTable};
use crate::metrics::{self, SentenceScore};
use crate::prompts::StepPlan;
use crate::treebank::Sentence;

/// Outcome of decoding and scoring one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceEval {
    pub score: SentenceScore,
    /// The recovered system parse, carrying the gold sentence id and text.
    pub recovered: Sentence,
}

/// Runs extraction, recovery, and scoring for one completion.
pub fn evaluate_completion(gold: &Sentence, completion: &str, plan: StepPlan) -> SentenceEval {
    evaluate_table(gold, &decoder::extract_final_table(completion, plan))
}

/// Same as [`evaluate_completion`] for an already-extracted table.
///
/// Token recall before recovery is measured on the raw table; recovery
/// then pins IDs and forms, and the recovered parse is what UPOS, UAS,
/// and LAS are measured on.
pub fn evaluate_table(gold: &Sentence, table: &ParsedTable) -> SentenceEval {
    let (raw, _) = decoder::to_sentence(table);
    let raw_alignment = metrics::align(gold, &raw);

    let gold_forms = gold.forms();
    let recovered_table = decoder::recover(table, &gold_forms);
    let (mut recovered, validity) = decoder::to_sentence(&recovered_table);
    recovered.sent_id = gold.sent_id.clone();
    recovered.text = gold.text.clone();

    let alignment = metrics::align(gold, &recovered);
    let counts = metrics::score_sentence(gold, &recovered, &alignment);

    SentenceEval {
        score: SentenceScore {
            sent_id: gold.sent_id.clone(),
            n_gold: gold.tokens.len(),
            n_sys_raw: raw.tokens.len(),
            aligned_raw: raw_alignment.pairs.len(),
            counts,
            validity,
        },
        recovered,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::aggregate;
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

    #[test]
    fn gold_reply_scores_perfectly() {
        let gold = gold();
        for plan in [StepPlan::OneStep, StepPlan::TwoStep, StepPlan::ThreeStep] {
            let b = build_prompt(&gold, plan, &LanguageProfile::for_code("en_ewt").unwrap())
                .unwrap();
            let eval = evaluate_completion(&gold, &b.gold_assistant, plan);
            let report = aggregate([&eval.score]);
            assert_eq!(report.summary_line(), "100.0\t100.0\t100.0\t100.0", "plan {plan:?}");
            assert!(eval.score.validity.is_clean());
            assert_eq!(eval.recovered.tokens, gold.tokens);
            assert_eq!(eval.recovered.sent_id, gold.sent_id);
        }
    }

    #[test]
    fn empty_completion_scores_zero_but_cleanly() {
        let gold = gold();
        let eval = evaluate_completion(&gold, "", StepPlan::ThreeStep);
        assert_eq!(eval.score.n_sys_raw, 0);
        assert_eq!(eval.score.counts.aligned, 0);
        assert_eq!(eval.score.validity.n_rows, 0);
        assert!(eval.recovered.tokens.is_empty());
        let report = aggregate([&eval.score]);
        assert_eq!(report.summary_line(), "0.0\t0.0\t0.0\t0.0");
    }

    #[test]
    fn recovery_lifts_token_recall_for_mangled_forms() {
        let gold = gold();
        // the model misspelled two forms and dropped a row; post-recovery
        // alignment must be full for the five surviving rows
        let reply = "\
1\tI\tPRON\t4\tnsubj
2\tam\tAUX\t4\taux
3\tjusst\tADV\t4\tadvmod
4\tspeculating\tVERB\t0\troot
5\tnow\tADV\t4\tadvmod";
        let eval = evaluate_completion(&gold, reply, StepPlan::OneStep);
        assert_eq!(eval.score.n_sys_raw, 5);
        assert!(eval.score.aligned_raw < 5, "misspellings cannot align raw");
        assert_eq!(eval.score.counts.n_sys, 5);
        assert_eq!(eval.score.counts.aligned, 5, "after recovery all rows align");
        assert_eq!(eval.recovered.tokens[1].form, "'m");
        assert_eq!(eval.recovered.tokens[4].form, "now");
    }
}
