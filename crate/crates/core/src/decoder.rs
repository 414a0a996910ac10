//! Decoding raw model completions back into token tables: final-task
//! extraction, row-by-row ID/FORM recovery against the gold word list,
//! and structural validity checks.

use serde::Serialize;

use crate::prompts::StepPlan;
use crate::treebank::{INVALID_HEAD, Sentence, Token};

/// Column count of a complete output row: ID, FORM, UPOS, HEAD, DEPREL.
pub const EXPECTED_FIELDS: usize = 5;

/// One table row as the model wrote it, fields split on tabs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRow {
    /// 1-based line number within the completion text.
    pub line_no: usize,
    pub fields: Vec<String>,
}

/// Where [`extract_final_table`] found its rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TableSource {
    /// Under the final `- Task {k}` header.
    TaskBlock,
    /// Headers were missing or mangled; took the last contiguous run of
    /// tab-separated lines.
    LastTabRun,
    /// Single-task output: every tab-separated line in the completion.
    WholeText,
    /// Nothing table-like found. An empty table is a value, not an error.
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedTable {
    pub rows: Vec<RawRow>,
    pub source: TableSource,
}

impl ParsedTable {
    pub fn empty() -> ParsedTable {
        ParsedTable { rows: Vec::new(), source: TableSource::Empty }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Per-row flag: true when the row carries all five expected fields.
    pub fn well_formed_rows(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.fields.len() == EXPECTED_FIELDS).collect()
    }
}

/// Matches `- Task 3` style headers, tolerating surrounding whitespace and
/// trailing punctuation (`- Task 3:`). `want` restricts the task number.
fn task_header(line: &str, want: Option<usize>) -> Option<usize> {
    let rest = line.trim().strip_prefix("- Task")?;
    let rest = rest.trim_start();
    let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
    if digits.is_empty() {
        return None;
    }
    let after = &rest[digits.len()..];
    if after.chars().next().is_some_and(|c| c.is_alphanumeric()) {
        return None;
    }
    let number: usize = digits.parse().ok()?;
    match want {
        Some(w) if w != number => None,
        _ => Some(number),
    }
}

fn tab_rows<'a>(lines: impl Iterator<Item = (usize, &'a str)>) -> Vec<RawRow> {
    lines
        .filter(|(_, line)| line.contains('\t'))
        .map(|(i, line)| RawRow {
            line_no: i + 1,
            fields: line.split('\t').map(str::to_string).collect(),
        })
        .collect()
}

/// Pulls the table holding the finished annotation out of a completion.
///
/// Single-task plans take every tab-separated line. Multi-task plans take
/// the tab-separated lines following the last `- Task {k}` header (k being
/// the final task), stopping at any later task header; when no such header
/// survives in the output, the last contiguous run of tab-separated lines
/// is used instead.
pub fn extract_final_table(completion: &str, plan: StepPlan) -> ParsedTable {
    let lines: Vec<&str> = completion.lines().collect();
    if plan == StepPlan::OneStep {
        let rows = tab_rows(lines.iter().enumerate().map(|(i, l)| (i, *l)));
        let source = if rows.is_empty() { TableSource::Empty } else { TableSource::WholeText };
        return ParsedTable { rows, source };
    }

    let final_task = plan.steps();
    let header_at =
        lines.iter().rposition(|line| task_header(line, Some(final_task)).is_some());
    if let Some(at) = header_at {
        let block = lines[at + 1..]
            .iter()
            .take_while(|line| task_header(line, None).is_none())
            .enumerate()
            .map(|(offset, line)| (at + 1 + offset, *line));
        let rows = tab_rows(block);
        let source = if rows.is_empty() { TableSource::Empty } else { TableSource::TaskBlock };
        return ParsedTable { rows, source };
    }

    // No usable header: take the last contiguous run of tab lines.
    let mut end = lines.len();
    while end > 0 && !lines[end - 1].contains('\t') {
        end -= 1;
    }
    let mut start = end;
    while start > 0 && lines[start - 1].contains('\t') {
        start -= 1;
    }
    let rows = tab_rows(lines[start..end].iter().enumerate().map(|(o, l)| (start + o, *l)));
    let source = if rows.is_empty() { TableSource::Empty } else { TableSource::LastTabRun };
    ParsedTable { rows, source }
}

fn set_field(row: &mut RawRow, index: usize, value: String) {
    if index < row.fields.len() {
        row.fields[index] = value;
    } else {
        row.fields.push(value);
    }
}

/// Restores the deterministic columns of a decoded table against the gold
/// word list: row `i` gets ID `i+1` and the gold form, rows beyond the gold
/// length are cut, and short rows are padded to five fields with `_`.
/// Fields 3..5 (UPOS, HEAD, DEPREL) are never altered, rows are never
/// invented, and the operation is idempotent.
pub fn recover(table: &ParsedTable, gold_forms: &[&str]) -> ParsedTable {
    let n = gold_forms.len().min(table.rows.len());
    let mut rows: Vec<RawRow> = table.rows[..n].to_vec();
    for (i, row) in rows.iter_mut().enumerate() {
        set_field(row, 0, (i + 1).to_string());
        set_field(row, 1, gold_forms[i].to_string());
        while row.fields.len() < EXPECTED_FIELDS {
            row.fields.push("_".to_string());
        }
    }
    ParsedTable { rows, source: table.source }
}

/// Structural findings about one decoded sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ValidityReport {
    pub n_rows: usize,
    /// Rows claiming to be the root (HEAD = 0). A well-formed tree has
    /// exactly one.
    pub multiple_roots: usize,
    /// Rows whose HEAD was non-integer or outside `0..=n_rows`; their head
    /// becomes [`INVALID_HEAD`].
    pub out_of_range_heads: usize,
    /// Rows that name themselves as their head. Counted separately and
    /// also reported as cycles.
    pub self_loops: usize,
    pub has_cycle: bool,
}

impl ValidityReport {
    /// A single-rooted, cycle-free table with every head usable.
    pub fn is_clean(&self) -> bool {
        self.multiple_roots == 1
            && !self.has_cycle
            && self.out_of_range_heads == 0
            && self.self_loops == 0
    }
}

/// Follows head chains over `heads` (1-based values; 0 or [`INVALID_HEAD`]
/// end a chain) and reports whether any chain loops. Runs in O(n): each
/// position is visited once and then marked finished.
pub fn has_head_cycle(heads: &[i32]) -> bool {
    const ON_CHAIN: u8 = 1;
    const DONE: u8 = 2;
    let mut state = vec![0u8; heads.len()];
    let mut chain = Vec::new();
    for start in 0..heads.len() {
        if state[start] != 0 {
            continue;
        }
        chain.clear();
        let mut at = start;
        loop {
            match state[at] {
                ON_CHAIN => return true,
                DONE => break,
                _ => {
                    state[at] = ON_CHAIN;
                    chain.push(at);
                    let head = heads[at];
                    if head <= 0 {
                        break;
                    }
                    at = (head - 1) as usize;
                }
            }
        }
        for &visited in &chain {
            state[visited] = DONE;
        }
    }
    false
}

/// Turns a (normally recovered) table into scorable tokens plus a validity
/// report. Fields are whitespace-trimmed. A row's ID falls back to its
/// position and its HEAD to [`INVALID_HEAD`] when unusable; missing UPOS
/// or DEPREL read as `_`.
pub fn to_sentence(table: &ParsedTable) -> (Sentence, ValidityReport) {
    let n = table.rows.len();
    let field = |row: &RawRow, i: usize| -> String {
        row.fields.get(i).map(|f| f.trim().to_string()).unwrap_or_else(|| "_".to_string())
    };

    let mut tokens = Vec::with_capacity(n);
    let mut out_of_range_heads = 0;
    let mut self_loops = 0;
    let mut multiple_roots = 0;
    for (i, row) in table.rows.iter().enumerate() {
        let id: u32 = match field(row, 0).parse() {
            Ok(v) if v >= 1 => v,
            _ => i as u32 + 1,
        };
        let head: i32 = match field(row, 3).parse::<i64>() {
            Ok(h) if (0..=n as i64).contains(&h) => h as i32,
            _ => {
                out_of_range_heads += 1;
                INVALID_HEAD
            }
        };
        if head == 0 {
            multiple_roots += 1;
        }
        if head > 0 && head == id as i32 {
            self_loops += 1;
        }
        tokens.push(Token { id, form: field(row, 1), upos: field(row, 2), head, deprel: field(row, 4) });
    }
    let heads: Vec<i32> = tokens.iter().map(|t| t.head).collect();
    let report = ValidityReport {
        n_rows: n,
        multiple_roots,
        out_of_range_heads,
        self_loops,
        has_cycle: has_head_cycle(&heads),
    };
    (Sentence { sent_id: String::new(), text: None, tokens }, report)
}

/// One sentence block of a system-output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemBlock {
    pub sent_id: Option<String>,
    pub table: ParsedTable,
}

/// Splits a system-output file into per-sentence tables on blank lines.
/// Ten-column rows (full CoNLL-U) are narrowed to the ID, FORM, UPOS,
/// HEAD, DEPREL subset; anything else is kept as-is for recovery to fix.
pub fn system_blocks(text: &str) -> Vec<SystemBlock> {
    let mut blocks = Vec::new();
    let mut sent_id: Option<String> = None;
    let mut rows: Vec<RawRow> = Vec::new();
    let mut saw_content = false;

    let mut flush = |sent_id: &mut Option<String>, rows: &mut Vec<RawRow>, saw: &mut bool| {
        if *saw {
            let rows = std::mem::take(rows);
            let source = if rows.is_empty() { TableSource::Empty } else { TableSource::WholeText };
            blocks.push(SystemBlock {
                sent_id: sent_id.take(),
                table: ParsedTable { rows, source },
            });
        }
        *saw = false;
    };

    for (i, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.is_empty() {
            flush(&mut sent_id, &mut rows, &mut saw_content);
            continue;
        }
        saw_content = true;
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=')
                && key.trim() == "sent_id"
            {
                sent_id = Some(value.trim().to_string());
            }
            continue;
        }
        if !line.contains('\t') {
            continue;
        }
        let mut fields: Vec<String> = line.split('\t').map(str::to_string).collect();
        if fields.len() == 10 {
            // Full-width rows follow treebank conventions, so multiword
            // ranges and empty nodes are structure, not words.
            if crate::treebank::is_range_id(&fields[0])
                || crate::treebank::is_empty_node_id(&fields[0])
            {
                continue;
            }
            fields = vec![
                fields[0].clone(),
                fields[1].clone(),
                fields[3].clone(),
                fields[6].clone(),
                fields[7].clone(),
            ];
        }
        rows.push(RawRow { line_no: i + 1, fields });
    }
    flush(&mut sent_id, &mut rows, &mut saw_content);
    blocks
}
