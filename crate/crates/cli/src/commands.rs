//! One function per subcommand. Each returns `Ok(())` or a [`CliError`]
//! that the caller maps to an exit code; artifacts that were already
//! complete when an error struck stay on disk.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use udstep_core::decoder::{self, ParsedTable};
use udstep_core::llm::{
    ChatClient, ChatRequest, MockMode, MockPolicy, RetryPolicy, mock_complete,
};
use udstep_core::metrics::{self, EvalReport, PrfScore, SentenceScore, round1};
use udstep_core::pipeline::{SentenceEval, evaluate_completion, evaluate_table};
use udstep_core::prompts::{self, LanguageProfile, StepPlan, build_prompt};
use udstep_core::treebank::{self, Split, Treebank};
use udstep_core::Sentence;

use crate::error::{CliError, io_input};
use crate::manifest::{Manifest, manifest_path_for_file};

// ---------------------------------------------------------------------------
// Shared plumbing

fn load_treebank(path: &Path, language_code: &str) -> Result<Treebank, CliError> {
    treebank::read_file(path, language_code, Split::Train)
        .map_err(|e| io_input(path, e))
}

fn profile_for(lang: &str) -> Result<LanguageProfile, CliError> {
    LanguageProfile::for_code(lang).ok_or_else(|| {
        CliError::Config(format!(
            "unknown language code {lang}; expected a code like en_ewt or zh_gsdsimp"
        ))
    })
}

fn plan_for(steps: u8) -> StepPlan {
    StepPlan::from_steps(steps).expect("flag parser limits --steps to 1..=3")
}

fn create_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_input(dir, e))
}

fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    fs::write(path, body).map_err(|e| io_input(path, e))
}

/// `CODE=VALUE` flag payloads, as in `--downsample cs_pdt=0.17`.
fn split_pair<'a>(flag: &str, raw: &'a str) -> Result<(&'a str, &'a str), CliError> {
    match raw.split_once('=') {
        Some((code, value)) if !code.is_empty() && !value.is_empty() => Ok((code, value)),
        _ => Err(CliError::Config(format!("--{flag} expects CODE=VALUE, got {raw:?}"))),
    }
}

// ---------------------------------------------------------------------------
// stats

pub fn stats(treebank: &Path) -> Result<(), CliError> {
    let tb = load_treebank(treebank, "und")?;
    print!("{}", treebank::stats(&tb).to_tsv());
    Ok(())
}

// ---------------------------------------------------------------------------
// export-sft

pub fn export_sft(
    treebank: &Path,
    append: Option<&Path>,
    steps: u8,
    lang: &str,
    out: &Path,
) -> Result<(), CliError> {
    let profile = profile_for(lang)?;
    let tb = load_treebank(treebank, lang)?;
    let extra = append.map(|p| load_treebank(p, lang)).transpose()?;

    let mut writer = BufWriter::new(File::create(out).map_err(|e| io_input(out, e))?);
    let n = prompts::export_sft(&tb, extra.as_ref(), plan_for(steps), &profile, &mut writer)?;
    writer.flush().map_err(|e| io_input(out, e))?;

    let mut manifest = Manifest::new("export-sft", None);
    manifest.config("steps", steps).config("lang", lang);
    manifest.input(treebank)?;
    if let Some(p) = append {
        manifest.config("append", p.display());
        manifest.input(p)?;
    }
    manifest.output(out.display().to_string());
    manifest.write(&manifest_path_for_file(out))?;

    println!("wrote {n} records to {}", out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// mix

pub fn mix(
    treebanks: &[String],
    downsample: &[String],
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let mut parts = Vec::new();
    let mut paths = Vec::new();
    for raw in treebanks {
        let (code, path) = split_pair("treebank", raw)?;
        parts.push(load_treebank(Path::new(path), code)?);
        paths.push(PathBuf::from(path));
    }
    let mut fractions: BTreeMap<String, f64> = BTreeMap::new();
    for raw in downsample {
        let (code, value) = split_pair("downsample", raw)?;
        let fraction: f64 = value.parse().map_err(|_| {
            CliError::Config(format!("--downsample fraction {value:?} is not a number"))
        })?;
        fractions.insert(code.to_string(), fraction);
    }

    let (mixed, report) = treebank::mix(&parts, &fractions, seed)?;
    write_file(out, &treebank::write_conllu_string(&mixed.sentences))?;

    let mut manifest = Manifest::new("mix", Some(seed));
    for (raw, path) in treebanks.iter().zip(&paths) {
        manifest.config("treebank", raw);
        manifest.input(path)?;
    }
    for raw in downsample {
        manifest.config("downsample", raw);
    }
    manifest.output(out.display().to_string());
    manifest.write(&manifest_path_for_file(out))?;

    println!("language\tavailable\tkept");
    for part in &report {
        println!("{}\t{}\t{}", part.language_code, part.available, part.kept);
    }
    let stats = treebank::stats(&mixed);
    print!("{}", stats.to_tsv());
    Ok(())
}

// ---------------------------------------------------------------------------
// subsample

pub fn subsample(treebank: &Path, n: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    let tb = load_treebank(treebank, "und")?;
    let sample = treebank::subsample(&tb, n, seed)?;
    write_file(out, &treebank::write_conllu_string(&sample.sentences))?;

    let mut manifest = Manifest::new("subsample", Some(seed));
    manifest.config("n", n);
    manifest.input(treebank)?;
    manifest.output(out.display().to_string());
    manifest.write(&manifest_path_for_file(out))?;

    println!("kept {} of {} sentences", sample.len(), tb.len());
    Ok(())
}

// ---------------------------------------------------------------------------
// curve-export

pub fn curve_export(
    treebank: &Path,
    sizes: &[usize],
    steps: u8,
    lang: &str,
    seed: u64,
    out_dir: &Path,
) -> Result<(), CliError> {
    let profile = profile_for(lang)?;
    let tb = load_treebank(treebank, lang)?;
    create_out_dir(out_dir)?;

    let rungs = prompts::export_curve_ladder(
        &tb,
        sizes,
        seed,
        plan_for(steps),
        &profile,
        |size| File::create(out_dir.join(format!("sft_{size}.jsonl"))).map(BufWriter::new),
    )?;

    let mut manifest = Manifest::new("curve-export", Some(seed));
    manifest
        .config("steps", steps)
        .config("lang", lang)
        .config("sizes", sizes.iter().map(usize::to_string).collect::<Vec<_>>().join(","));
    manifest.input(treebank)?;
    for rung in &rungs {
        manifest.output(format!("sft_{}.jsonl", rung.size));
    }
    manifest.write(&out_dir.join("manifest.json"))?;

    println!("size\trecords");
    for rung in &rungs {
        println!("{}\t{}", rung.size, rung.n_records);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Inference backends (infer, pipeline)

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MockArg {
    /// Replay the reference reply verbatim.
    Oracle,
    /// Inject seeded tagging and attachment errors.
    Noisy,
}

#[derive(Debug, clap::Args)]
pub struct BackendArgs {
    /// Use the built-in simulator instead of a live endpoint.
    #[arg(long, value_enum, conflicts_with = "endpoint")]
    pub mock: Option<MockArg>,
    /// TOML file overriding simulator policy fields (probabilities, mode, seed).
    #[arg(long, requires = "mock", value_name = "FILE")]
    pub mock_config: Option<PathBuf>,
    /// Base URL of a chat-completions endpoint.
    #[arg(long, value_name = "URL")]
    pub endpoint: Option<String>,
    /// Model name to request from the endpoint.
    #[arg(long, requires = "endpoint")]
    pub model: Option<String>,
    /// Environment variable read for the bearer token.
    #[arg(long, default_value = "OPENAI_API_KEY", value_name = "VAR")]
    pub api_key_env: String,
    /// Completion token budget; sized from each sentence when omitted.
    #[arg(long)]
    pub max_tokens: Option<u32>,
    /// Request attempts before giving up on the endpoint.
    #[arg(long, default_value_t = 5)]
    pub max_attempts: u32,
}

#[derive(Debug)]
enum Backend {
    Mock { policy: MockPolicy, label: String },
    Remote { client: ChatClient, model: String, max_tokens: Option<u32> },
}

/// Partial overrides for the simulator policy; unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MockOverrides {
    mode: Option<MockMode>,
    seed: Option<u64>,
    p_drop_row: Option<f64>,
    p_truncate_fields: Option<f64>,
    p_head_error: Option<f64>,
    p_upos_error: Option<f64>,
    p_deprel_error: Option<f64>,
    p_extra_root: Option<f64>,
    p_cycle: Option<f64>,
}

fn apply_mock_config(policy: &mut MockPolicy, path: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_input(path, e))?;
    let o: MockOverrides = toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if let Some(v) = o.mode {
        policy.mode = v;
    }
    if let Some(v) = o.seed {
        policy.seed = v;
    }
    for (field, value) in [
        (&mut policy.p_drop_row, o.p_drop_row),
        (&mut policy.p_truncate_fields, o.p_truncate_fields),
        (&mut policy.p_head_error, o.p_head_error),
        (&mut policy.p_upos_error, o.p_upos_error),
        (&mut policy.p_deprel_error, o.p_deprel_error),
        (&mut policy.p_extra_root, o.p_extra_root),
        (&mut policy.p_cycle, o.p_cycle),
    ] {
        if let Some(v) = value {
            *field = v;
        }
    }
    Ok(())
}

impl Backend {
    fn from_args(args: &BackendArgs, seed: u64) -> Result<Backend, CliError> {
        match (args.mock, &args.endpoint) {
            (Some(_), Some(_)) => Err(CliError::Config(
                "--mock and --endpoint are mutually exclusive".into(),
            )),
            (None, None) => Err(CliError::Config(
                "choose a backend: pass exactly one of --mock or --endpoint".into(),
            )),
            (Some(mode), None) => {
                let (mut policy, name) = match mode {
                    MockArg::Oracle => (MockPolicy::oracle(seed), "oracle"),
                    MockArg::Noisy => (MockPolicy::noisy(seed), "noisy"),
                };
                if let Some(path) = &args.mock_config {
                    apply_mock_config(&mut policy, path)?;
                }
                policy.validate()?;
                Ok(Backend::Mock { policy, label: format!("mock:{name}") })
            }
            (None, Some(endpoint)) => {
                let model = args.model.clone().ok_or_else(|| {
                    CliError::Config("--endpoint requires --model".into())
                })?;
                if args.max_attempts == 0 {
                    return Err(CliError::Config("--max-attempts must be at least 1".into()));
                }
                let retry =
                    RetryPolicy { max_attempts: args.max_attempts, ..RetryPolicy::default() };
                let api_key = std::env::var(&args.api_key_env).ok();
                Ok(Backend::Remote {
                    client: ChatClient::new(endpoint.clone(), api_key, retry),
                    model,
                    max_tokens: args.max_tokens,
                })
            }
        }
    }

    fn label(&self) -> &str {
        match self {
            Backend::Mock { label, .. } => label,
            Backend::Remote { model, .. } => model,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CompletionRecord {
    sent_id: String,
    model: String,
    attempts: u32,
    completion: String,
}

/// Generates one completion per sentence, in corpus order. On an endpoint
/// failure the records produced so far are returned along with the error,
/// so callers can persist the partial run before exiting.
fn run_inference(
    tb: &Treebank,
    plan: StepPlan,
    profile: &LanguageProfile,
    backend: &Backend,
) -> (Vec<CompletionRecord>, Result<(), CliError>) {
    let mut records = Vec::with_capacity(tb.len());
    for sentence in &tb.sentences {
        let bundle = match build_prompt(sentence, plan, profile) {
            Ok(b) => b,
            Err(e) => return (records, Err(e.into())),
        };
        let (attempts, completion) = match backend {
            Backend::Mock { policy, .. } => (1, mock_complete(&bundle, sentence, policy)),
            Backend::Remote { client, model, max_tokens } => {
                let request = ChatRequest::from_bundle(&bundle, model.clone(), *max_tokens);
                match client.complete(&request) {
                    Ok(done) => (done.attempts, done.text),
                    Err(e) => {
                        let err = CliError::from(e);
                        let msg = format!("sentence {}: {err}", sentence.sent_id);
                        let err = match err {
                            CliError::Config(_) => CliError::Config(msg),
                            _ => CliError::Endpoint(msg),
                        };
                        return (records, Err(err));
                    }
                }
            }
        };
        records.push(CompletionRecord {
            sent_id: sentence.sent_id.clone(),
            model: backend.label().to_string(),
            attempts,
            completion,
        });
    }
    (records, Ok(()))
}

fn write_completions(path: &Path, records: &[CompletionRecord]) -> Result<(), CliError> {
    let mut body = String::new();
    for record in records {
        body.push_str(
            &serde_json::to_string(record)
                .map_err(|e| CliError::Input(format!("completion record: {e}")))?,
        );
        body.push('\n');
    }
    write_file(path, &body)
}

fn read_completions(path: &Path) -> Result<HashMap<String, String>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_input(path, e))?;
    completions_from_jsonl(path, &text)
}

fn completions_from_jsonl(
    path: &Path,
    text: &str,
) -> Result<HashMap<String, String>, CliError> {
    #[derive(Deserialize)]
    struct RecordIn {
        sent_id: String,
        completion: String,
    }
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: RecordIn = serde_json::from_str(line).map_err(|e| {
            CliError::Input(format!("{}:{}: {e}", path.display(), i + 1))
        })?;
        if map.insert(record.sent_id.clone(), record.completion).is_some() {
            log::warn!("{}: duplicate completion for {}; keeping the last", path.display(), record.sent_id);
        }
    }
    Ok(map)
}

fn backend_manifest(manifest: &mut Manifest, args: &BackendArgs, backend: &Backend) {
    manifest.config("backend", backend.label());
    if let Some(endpoint) = &args.endpoint {
        manifest.config("endpoint", endpoint);
        manifest.config("max_attempts", args.max_attempts);
    }
    if let Some(v) = args.max_tokens {
        manifest.config("max_tokens", v);
    }
    if let Some(path) = &args.mock_config {
        manifest.config("mock_config", path.display());
    }
}

// ---------------------------------------------------------------------------
// infer

#[allow(clippy::too_many_arguments)]
pub fn infer(
    treebank: &Path,
    steps: u8,
    lang: &str,
    seed: u64,
    backend_args: &BackendArgs,
    out_dir: &Path,
) -> Result<(), CliError> {
    let profile = profile_for(lang)?;
    let tb = load_treebank(treebank, lang)?;
    let backend = Backend::from_args(backend_args, seed)?;
    create_out_dir(out_dir)?;

    let (records, outcome) = run_inference(&tb, plan_for(steps), &profile, &backend);
    write_completions(&out_dir.join("completions.jsonl"), &records)?;

    let mut manifest = Manifest::new("infer", Some(seed));
    manifest.config("steps", steps).config("lang", lang);
    backend_manifest(&mut manifest, backend_args, &backend);
    manifest.input(treebank)?;
    if let Some(path) = &backend_args.mock_config {
        manifest.input(path)?;
    }
    manifest.output("completions.jsonl");
    manifest.write(&out_dir.join("manifest.json"))?;

    outcome?;
    println!("wrote {} completions to {}", records.len(), out_dir.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// Evaluation plumbing (decode, score, pipeline)

const VALIDITY_HEADER: &str =
    "sent_id\tn_rows\tmultiple_roots\tout_of_range_heads\tself_loops\thas_cycle";

fn validity_table(evals: &[SentenceEval]) -> String {
    let mut out = String::from(VALIDITY_HEADER);
    out.push('\n');
    for eval in evals {
        let v = &eval.score.validity;
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            eval.score.sent_id,
            v.n_rows,
            v.multiple_roots,
            v.out_of_range_heads,
            v.self_loops,
            v.has_cycle,
        ));
    }
    out
}

fn recovered_conllu(evals: &[SentenceEval]) -> String {
    let sentences: Vec<Sentence> = evals.iter().map(|e| e.recovered.clone()).collect();
    treebank::write_conllu_string(&sentences)
}

/// Evaluates every gold sentence against its completion, matching by
/// sentence id; sentences without one are scored against an empty reply.
fn evaluate_against_map(
    gold: &Treebank,
    completions: &HashMap<String, String>,
    plan: StepPlan,
) -> Vec<SentenceEval> {
    let mut unseen: usize = completions.len();
    let evals: Vec<SentenceEval> = gold
        .sentences
        .iter()
        .map(|sentence| {
            let completion = match completions.get(&sentence.sent_id) {
                Some(text) => {
                    unseen = unseen.saturating_sub(1);
                    text.as_str()
                }
                None => {
                    log::warn!("no completion for {}; scoring an empty reply", sentence.sent_id);
                    ""
                }
            };
            evaluate_completion(sentence, completion, plan)
        })
        .collect();
    if unseen > 0 {
        log::warn!("{unseen} completion(s) matched no gold sentence id");
    }
    evals
}

#[derive(Serialize)]
struct ScoreView {
    matches: usize,
    n_sys: usize,
    n_gold: usize,
    precision: f64,
    recall: f64,
    f1: f64,
}

impl From<&PrfScore> for ScoreView {
    fn from(p: &PrfScore) -> ScoreView {
        ScoreView {
            matches: p.matches,
            n_sys: p.n_sys,
            n_gold: p.n_gold,
            precision: round1(p.precision()),
            recall: round1(p.recall()),
            f1: round1(p.f1()),
        }
    }
}

#[derive(Serialize)]
struct EvalJson<'a> {
    n_sentences: usize,
    token: ScoreView,
    token_recovered: ScoreView,
    upos: ScoreView,
    uas: ScoreView,
    las: ScoreView,
    validity: &'a metrics::ValiditySummary,
    /// `token_recall  upos_f1  uas_f1  las_f1`, tab separated.
    summary: String,
}

fn eval_json(report: &EvalReport) -> Result<String, CliError> {
    let view = EvalJson {
        n_sentences: report.n_sentences,
        token: (&report.token).into(),
        token_recovered: (&report.token_recovered).into(),
        upos: (&report.upos).into(),
        uas: (&report.uas).into(),
        las: (&report.las).into(),
        validity: &report.validity,
        summary: report.summary_line(),
    };
    serde_json::to_string_pretty(&view)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Input(format!("evaluation report: {e}")))
}

// ---------------------------------------------------------------------------
// decode

pub fn decode(
    completions: &Path,
    treebank: &Path,
    steps: u8,
    out_dir: &Path,
) -> Result<(), CliError> {
    let gold = load_treebank(treebank, "und")?;
    let map = read_completions(completions)?;
    let evals = evaluate_against_map(&gold, &map, plan_for(steps));
    create_out_dir(out_dir)?;
    write_file(&out_dir.join("recovered.conllu"), &recovered_conllu(&evals))?;
    write_file(&out_dir.join("validity.tsv"), &validity_table(&evals))?;

    let mut manifest = Manifest::new("decode", None);
    manifest.config("steps", steps);
    manifest.input(completions)?;
    manifest.input(treebank)?;
    manifest.output("recovered.conllu").output("validity.tsv");
    manifest.write(&out_dir.join("manifest.json"))?;

    let clean = evals.iter().filter(|e| e.score.validity.is_clean()).count();
    println!("decoded {} sentences ({} clean)", evals.len(), clean);
    Ok(())
}

// ---------------------------------------------------------------------------
// score

/// Pairs a system-output text file with gold sentences: by `sent_id`
/// comments when every block carries one, otherwise positionally.
fn evaluate_system_text(
    gold: &Treebank,
    path: &Path,
    text: &str,
) -> Result<Vec<SentenceEval>, CliError> {
    let blocks = decoder::system_blocks(text);
    if !blocks.is_empty() && blocks.iter().all(|b| b.sent_id.is_some()) {
        let mut by_id: HashMap<&str, &ParsedTable> = HashMap::new();
        for block in &blocks {
            by_id.insert(block.sent_id.as_deref().unwrap(), &block.table);
        }
        let empty = ParsedTable::empty();
        Ok(gold
            .sentences
            .iter()
            .map(|sentence| {
                let table = by_id.get(sentence.sent_id.as_str()).copied().unwrap_or_else(|| {
                    log::warn!("no system block for {}; scoring an empty table", sentence.sent_id);
                    &empty
                });
                evaluate_table(sentence, table)
            })
            .collect())
    } else {
        if blocks.len() != gold.len() {
            return Err(CliError::Input(format!(
                "{}: {} unlabeled system block(s) for {} gold sentences; add sent_id \
                 comments or match the counts",
                path.display(),
                blocks.len(),
                gold.len()
            )));
        }
        Ok(gold
            .sentences
            .iter()
            .zip(&blocks)
            .map(|(sentence, block)| evaluate_table(sentence, &block.table))
            .collect())
    }
}

pub fn score(
    treebank: &Path,
    system: &Path,
    steps: u8,
    out_dir: Option<&Path>,
) -> Result<(), CliError> {
    let gold = load_treebank(treebank, "und")?;
    let text = fs::read_to_string(system).map_err(|e| io_input(system, e))?;

    // Completion files are JSONL (first visible byte `{`); anything else
    // is treated as tabular system output.
    let evals = if text.trim_start().starts_with('{') {
        let map = completions_from_jsonl(system, &text)?;
        evaluate_against_map(&gold, &map, plan_for(steps))
    } else {
        evaluate_system_text(&gold, system, &text)?
    };

    let scores: Vec<SentenceScore> = evals.iter().map(|e| e.score.clone()).collect();
    let report = metrics::aggregate(&scores);

    if let Some(dir) = out_dir {
        create_out_dir(dir)?;
        write_file(&dir.join("eval.json"), &eval_json(&report)?)?;
        let mut manifest = Manifest::new("score", None);
        manifest.config("steps", steps);
        manifest.input(treebank)?;
        manifest.input(system)?;
        manifest.output("eval.json");
        manifest.write(&dir.join("manifest.json"))?;
    }

    println!("{}", report.summary_line());
    Ok(())
}

// ---------------------------------------------------------------------------
// pipeline

#[allow(clippy::too_many_arguments)]
pub fn pipeline(
    treebank: &Path,
    steps: u8,
    lang: &str,
    seed: u64,
    backend_args: &BackendArgs,
    out_dir: &Path,
) -> Result<(), CliError> {
    let profile = profile_for(lang)?;
    let gold = load_treebank(treebank, lang)?;
    let backend = Backend::from_args(backend_args, seed)?;
    let plan = plan_for(steps);
    create_out_dir(out_dir)?;

    let (records, outcome) = run_inference(&gold, plan, &profile, &backend);
    write_completions(&out_dir.join("completions.jsonl"), &records)?;

    let mut manifest = Manifest::new("pipeline", Some(seed));
    manifest.config("steps", steps).config("lang", lang);
    backend_manifest(&mut manifest, backend_args, &backend);
    manifest.input(treebank)?;
    if let Some(path) = &backend_args.mock_config {
        manifest.input(path)?;
    }
    manifest.output("completions.jsonl");

    if let Err(e) = outcome {
        // Keep what the run produced, but nothing downstream: a partial
        // evaluation would understate every score.
        manifest.write(&out_dir.join("manifest.json"))?;
        return Err(e);
    }

    let evals: Vec<SentenceEval> = gold
        .sentences
        .iter()
        .zip(&records)
        .map(|(sentence, record)| evaluate_completion(sentence, &record.completion, plan))
        .collect();
    let scores: Vec<SentenceScore> = evals.iter().map(|e| e.score.clone()).collect();
    let report = metrics::aggregate(&scores);

    write_file(&out_dir.join("recovered.conllu"), &recovered_conllu(&evals))?;
    write_file(&out_dir.join("validity.tsv"), &validity_table(&evals))?;
    write_file(&out_dir.join("eval.json"), &eval_json(&report)?)?;
    manifest.output("recovered.conllu").output("validity.tsv").output("eval.json");
    manifest.write(&out_dir.join("manifest.json"))?;

    println!("{}", report.summary_line());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_splitting_rejects_missing_parts() {
        assert!(split_pair("downsample", "cs_pdt=0.17").is_ok());
        assert!(split_pair("downsample", "cs_pdt").is_err());
        assert!(split_pair("downsample", "=0.17").is_err());
        assert!(split_pair("downsample", "cs_pdt=").is_err());
    }

    #[test]
    fn backends_are_mutually_exclusive_and_required() {
        let args = BackendArgs {
            mock: None,
            mock_config: None,
            endpoint: None,
            model: None,
            api_key_env: "UNSET".into(),
            max_tokens: None,
            max_attempts: 5,
        };
        let err = Backend::from_args(&args, 1).unwrap_err();
        assert_eq!(err.exit_code(), 2);

        let both = BackendArgs {
            mock: Some(MockArg::Oracle),
            endpoint: Some("http://localhost:1".into()),
            ..args
        };
        let err = Backend::from_args(&both, 1).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn endpoint_requires_model() {
        let args = BackendArgs {
            mock: None,
            mock_config: None,
            endpoint: Some("http://localhost:1".into()),
            model: None,
            api_key_env: "UNSET".into(),
            max_tokens: None,
            max_attempts: 5,
        };
        let err = Backend::from_args(&args, 1).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("--model"));
    }

    #[test]
    fn mock_config_overrides_are_partial_and_validated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mock.toml");
        fs::write(&path, "p_head_error = 0.5\np_cycle = 0.0\n").unwrap();
        let mut policy = MockPolicy::noisy(9);
        apply_mock_config(&mut policy, &path).unwrap();
        assert_eq!(policy.p_head_error, 0.5);
        assert_eq!(policy.p_cycle, 0.0);
        assert_eq!(policy.p_drop_row, MockPolicy::noisy(9).p_drop_row);

        fs::write(&path, "p_unheard_of = 1.0\n").unwrap();
        let err = apply_mock_config(&mut policy, &path).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
