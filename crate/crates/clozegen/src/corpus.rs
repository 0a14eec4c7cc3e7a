//! Cloze corpus loading.
//!
//! Parses CLOTH-shaped passage records and flat DGen records into a canonical
//! [`ClozeItem`] model, and derives per-distractor fine-tuning instances from
//! it. The canonical on-disk format is JSONL, one item per line, with a fixed
//! key order so golden files diff cleanly.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Blank marker used everywhere in the canonical model. Backend adapters
/// rewrite it to their own mask token.
pub const BLANK: &str = "[BLANK]";

/// Maximum stem window in whitespace tokens. Stems longer than this are
/// clipped around the blank so formatted backend inputs stay short.
pub const MAX_STEM_TOKENS: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("record {record}: article has {blanks} blanks but {options} option lists")]
    OptionCountMismatch {
        record: String,
        blanks: usize,
        options: usize,
    },
    #[error("record {record}: article has {blanks} blanks but {answers} answer keys")]
    AnswerCountMismatch {
        record: String,
        blanks: usize,
        answers: usize,
    },
    #[error("record {record}: answer key {key:?} does not address an option (expected A-{last})")]
    BadAnswerKey {
        record: String,
        key: String,
        last: char,
    },
    #[error("record {record}: expected exactly one blank, found {found}")]
    BlankCount { record: String, found: usize },
    #[error("record {record}: empty distractor list")]
    NoDistractors { record: String },
    #[error("record {record}: {reason}")]
    Invalid { record: String, reason: String },
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// Dataset provenance of an item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    #[serde(rename = "cloth-m")]
    ClothMiddle,
    #[serde(rename = "cloth-h")]
    ClothHigh,
    #[serde(rename = "dgen")]
    Dgen,
    #[serde(rename = "other")]
    Other,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Source::ClothMiddle => "cloth-m",
            Source::ClothHigh => "cloth-h",
            Source::Dgen => "dgen",
            Source::Other => "other",
        };
        f.write_str(s)
    }
}

/// One cloze question: a stem with a single `[BLANK]`, its answer, and the
/// human-authored gold distractors.
///
/// Field order matches the canonical JSONL schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClozeItem {
    pub id: String,
    pub source: Source,
    pub domain: Option<String>,
    pub stem: String,
    pub answer: String,
    pub distractors: Vec<String>,
}

impl ClozeItem {
    /// Validates the item invariants: exactly one blank, nonempty answer,
    /// distractors distinct from each other and from the answer
    /// (case-insensitive).
    pub fn validate(&self) -> Result<(), CorpusError> {
        let invalid = |reason: String| CorpusError::Invalid {
            record: self.id.clone(),
            reason,
        };
        let blanks = self.stem.matches(BLANK).count();
        if blanks != 1 {
            return Err(CorpusError::BlankCount {
                record: self.id.clone(),
                found: blanks,
            });
        }
        if self.answer.trim().is_empty() {
            return Err(invalid("empty answer".into()));
        }
        if self.distractors.is_empty() {
            return Err(CorpusError::NoDistractors {
                record: self.id.clone(),
            });
        }
        let answer_lc = self.answer.to_lowercase();
        let mut seen: Vec<String> = Vec::new();
        for d in &self.distractors {
            if d.trim().is_empty() {
                return Err(invalid("empty distractor".into()));
            }
            let lc = d.to_lowercase();
            if lc == answer_lc {
                return Err(invalid(format!("distractor {d:?} equals the answer")));
            }
            if seen.contains(&lc) {
                return Err(invalid(format!("duplicate distractor {d:?}")));
            }
            seen.push(lc);
        }
        Ok(())
    }

    /// True when the answer is more than one whitespace-separated word.
    /// Such items stay in the corpus but generation only works for them
    /// if the backend can emit multi-token candidates.
    pub fn multiword_answer(&self) -> bool {
        self.answer.split_whitespace().count() > 1
    }

    /// The stem with the blank replaced by `fill`.
    pub fn filled_stem(&self, fill: &str) -> String {
        self.stem.replacen(BLANK, fill, 1)
    }
}

/// One fine-tuning triple: predict `target_distractor` at the masked
/// position of `stem`, optionally conditioned on `answer`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInstance {
    pub stem: String,
    pub answer: String,
    pub target_distractor: String,
}

/// A CLOTH passage record: one article with `_` placeholders, one option
/// list per blank, one letter key per blank.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClothRecord {
    pub id: String,
    pub article: String,
    pub options: Vec<Vec<String>>,
    pub answers: Vec<String>,
    #[serde(default)]
    pub source: Option<String>,
}

/// A flat DGen record: one sentence with a single placeholder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DgenRecord {
    pub id: String,
    pub sentence: String,
    pub answer: String,
    pub distractors: Vec<String>,
    #[serde(default)]
    pub domain: Option<String>,
}

/// Parses one CLOTH passage into one item per blank.
///
/// The keyed option becomes the answer; the remaining options become the
/// gold distractors. Each item's stem is the sentence containing its blank,
/// clipped to [`MAX_STEM_TOKENS`] tokens centered on the blank, with the
/// placeholder rewritten to `[BLANK]`.
pub fn parse_cloth(record: &ClothRecord) -> Result<Vec<ClozeItem>, CorpusError> {
    let blanks = record.article.matches('_').count();
    if blanks != record.options.len() {
        return Err(CorpusError::OptionCountMismatch {
            record: record.id.clone(),
            blanks,
            options: record.options.len(),
        });
    }
    if blanks != record.answers.len() {
        return Err(CorpusError::AnswerCountMismatch {
            record: record.id.clone(),
            blanks,
            answers: record.answers.len(),
        });
    }
    let source = match record.source.as_deref() {
        Some("cloth-h") | Some("high") => Source::ClothHigh,
        Some("cloth-m") | Some("middle") | None => Source::ClothMiddle,
        Some(_) => Source::Other,
    };

    let mut items = Vec::with_capacity(blanks);
    for (idx, (opts, key)) in record.options.iter().zip(&record.answers).enumerate() {
        let last = (b'A' + opts.len().saturating_sub(1) as u8) as char;
        let key_idx = match key.trim().as_bytes() {
            [c @ b'A'..=b'Z'] if ((*c - b'A') as usize) < opts.len() => (*c - b'A') as usize,
            _ => {
                return Err(CorpusError::BadAnswerKey {
                    record: record.id.clone(),
                    key: key.clone(),
                    last,
                })
            }
        };
        let answer = opts[key_idx].clone();
        let distractors: Vec<String> = opts
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != key_idx)
            .map(|(_, o)| o.clone())
            .collect();
        let stem = stem_for_blank(&record.article, idx);
        let item = ClozeItem {
            id: format!("{}#{}", record.id, idx),
            source,
            domain: None,
            stem,
            answer,
            distractors,
        };
        item.validate()?;
        items.push(item);
    }
    Ok(items)
}

/// Parses one DGen record. The sentence must contain exactly one placeholder
/// (either `[BLANK]` or `_`).
pub fn parse_dgen(record: &DgenRecord) -> Result<ClozeItem, CorpusError> {
    let sentence = if record.sentence.contains(BLANK) {
        record.sentence.clone()
    } else {
        record.sentence.replace('_', BLANK)
    };
    let item = ClozeItem {
        id: record.id.clone(),
        source: Source::Dgen,
        domain: record.domain.clone(),
        stem: clip_stem(&sentence),
        answer: record.answer.clone(),
        distractors: record.distractors.clone(),
    };
    item.validate()?;
    Ok(item)
}

/// One training instance per gold distractor, all sharing the item's stem
/// and answer.
pub fn extract_training_instances(item: &ClozeItem) -> Vec<TrainingInstance> {
    item.distractors
        .iter()
        .map(|d| TrainingInstance {
            stem: item.stem.clone(),
            answer: item.answer.clone(),
            target_distractor: d.clone(),
        })
        .collect()
}

/// Cuts the sentence around the `nth` placeholder out of the article and
/// rewrites every placeholder in it: the target one to `[BLANK]`, any
/// co-occurring ones to `...` so the stem keeps a single blank.
fn stem_for_blank(article: &str, nth: usize) -> String {
    let target = nth_placeholder_offset(article, nth);
    let sentence = sentence_span(article, target);
    let mut out = String::with_capacity(sentence.len() + BLANK.len());
    let base = sentence.as_ptr() as usize - article.as_ptr() as usize;
    for (i, ch) in sentence.char_indices() {
        if ch == '_' {
            out.push_str(if base + i == target { BLANK } else { "..." });
        } else {
            out.push(ch);
        }
    }
    clip_stem(out.trim())
}

fn nth_placeholder_offset(article: &str, nth: usize) -> usize {
    article
        .match_indices('_')
        .nth(nth)
        .map(|(i, _)| i)
        .expect("blank index checked by caller")
}

/// Byte span of the sentence containing `offset`, delimited by `.`, `!`, `?`
/// or newlines.
fn sentence_span(article: &str, offset: usize) -> &str {
    let is_break = |c: char| matches!(c, '.' | '!' | '?' | '\n');
    let start = article[..offset]
        .char_indices()
        .rev()
        .find(|(_, c)| is_break(*c))
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(0);
    let end = article[offset..]
        .char_indices()
        .find(|(_, c)| is_break(*c))
        .map(|(i, c)| offset + i + c.len_utf8())
        .unwrap_or(article.len());
    &article[start..end]
}

/// Clips a stem to at most [`MAX_STEM_TOKENS`] whitespace tokens, keeping
/// the window centered on the blank.
fn clip_stem(stem: &str) -> String {
    let tokens: Vec<&str> = stem.split_whitespace().collect();
    if tokens.len() <= MAX_STEM_TOKENS {
        return tokens.join(" ");
    }
    let blank_pos = tokens
        .iter()
        .position(|t| t.contains(BLANK))
        .unwrap_or(tokens.len() / 2);
    let half = MAX_STEM_TOKENS / 2;
    let start = blank_pos.saturating_sub(half);
    let end = (start + MAX_STEM_TOKENS).min(tokens.len());
    let start = end.saturating_sub(MAX_STEM_TOKENS);
    tokens[start..end].join(" ")
}

/// Serializes items to canonical JSONL, one object per line.
pub fn write_items_jsonl(items: &[ClozeItem]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("item serializes"));
        out.push('\n');
    }
    out
}

/// Parses canonical items JSONL; validates every item.
pub fn read_items_jsonl(text: &str) -> Result<Vec<ClozeItem>, CorpusError> {
    let mut items = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item: ClozeItem = serde_json::from_str(line).map_err(|source| CorpusError::Json {
            line: lineno + 1,
            source,
        })?;
        item.validate()?;
        items.push(item);
    }
    Ok(items)
}
