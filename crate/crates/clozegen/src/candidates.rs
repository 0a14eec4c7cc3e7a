//! Candidate set generation.
//!
//! Queries a masked-LM backend for the blank, filters out the answer and
//! duplicates, and keeps the top k surviving predictions with their
//! confidences.

use crate::backend::{format_query, BackendError, MaskedLm, Strategy};
use crate::corpus::ClozeItem;
use serde::{Deserialize, Serialize};

/// Predictions requested from the backend per k candidates wanted, so that
/// answer exclusion and dedup rarely starve the set.
pub const DEFAULT_OVERFETCH: usize = 3;

/// One surviving distractor candidate with its backend confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    #[serde(rename = "text")]
    pub surface: String,
    pub confidence: f64,
}

/// The ordered candidate set for one item, confidence descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub id: String,
    pub strategy: Strategy,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, thiserror::Error)]
#[error("item {item_id}: {source}")]
pub struct GenerateError {
    pub item_id: String,
    #[source]
    pub source: BackendError,
}

#[derive(Debug, Clone, Copy)]
pub struct GenerateOptions {
    pub overfetch: usize,
    /// Also exclude naive inflections of the answer (trailing s/es/ed/ing).
    /// Off by default; exclusion is otherwise exact case-insensitive match.
    pub exclude_inflections: bool,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions { overfetch: DEFAULT_OVERFETCH, exclude_inflections: false }
    }
}

/// Generates the candidate set for one item. An empty set is a legal
/// result, not an error; metrics score it as all-miss.
pub fn generate(
    item: &ClozeItem,
    backend: &dyn MaskedLm,
    strategy: Strategy,
    k: usize,
    opts: &GenerateOptions,
) -> Result<CandidateSet, GenerateError> {
    assert!(k >= 1, "k must be >= 1");
    let query = format_query(item, strategy);
    let fetched = backend
        .top_k(&query, k * opts.overfetch.max(1))
        .map_err(|source| GenerateError { item_id: item.id.clone(), source })?;

    let answer_lc = item.answer.to_lowercase();
    let mut survivors: Vec<Candidate> = Vec::new();
    for pred in fetched {
        let lc = pred.surface.to_lowercase();
        if lc == answer_lc {
            continue;
        }
        if opts.exclude_inflections && same_inflection_family(&lc, &answer_lc) {
            continue;
        }
        // backend order is confidence-descending, so the first occurrence
        // of a surface is the highest-confidence one
        if survivors.iter().any(|c| c.surface.to_lowercase() == lc) {
            continue;
        }
        survivors.push(Candidate { surface: pred.surface, confidence: pred.probability });
    }
    survivors.truncate(k);
    Ok(CandidateSet { id: item.id.clone(), strategy, candidates: survivors })
}

/// Element-wise [`generate`]; output order matches input order and per-item
/// failures are collected rather than aborting the batch.
pub fn generate_batch(
    items: &[ClozeItem],
    backend: &dyn MaskedLm,
    strategy: Strategy,
    k: usize,
    opts: &GenerateOptions,
) -> (Vec<CandidateSet>, Vec<GenerateError>) {
    let mut sets = Vec::with_capacity(items.len());
    let mut errors = Vec::new();
    for item in items {
        match generate(item, backend, strategy, k, opts) {
            Ok(set) => sets.push(set),
            Err(e) => errors.push(e),
        }
    }
    (sets, errors)
}

fn same_inflection_family(a: &str, b: &str) -> bool {
    let fa = inflection_family(a);
    inflection_family(b).iter().any(|s| fa.contains(s))
}

fn inflection_family(w: &str) -> Vec<&str> {
    let mut family = vec![w];
    for suffix in ["ing", "es", "ed", "s"] {
        if let Some(stripped) = w.strip_suffix(suffix) {
            if stripped.len() >= 2 {
                family.push(stripped);
            }
        }
    }
    family
}

/// Serializes candidate sets to JSONL, one set per line.
pub fn write_candidates_jsonl(sets: &[CandidateSet]) -> String {
    let mut out = String::new();
    for set in sets {
        out.push_str(&serde_json::to_string(set).expect("candidate set serializes"));
        out.push('\n');
    }
    out
}

pub fn read_candidates_jsonl(text: &str) -> Result<Vec<CandidateSet>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::StubBackend;
    use crate::corpus::Source;

    fn item(answer: &str) -> ClozeItem {
        ClozeItem {
            id: "i1".into(),
            source: Source::Other,
            domain: None,
            stem: "I like [BLANK] .".into(),
            answer: answer.into(),
            distractors: vec!["cars".into()],
        }
    }

    fn stub(rows: Vec<(&str, f64)>, it: &ClozeItem, strategy: Strategy) -> StubBackend {
        let key = format_query(it, strategy).key();
        StubBackend::from_rows([(
            key,
            rows.into_iter().map(|(s, p)| (s.to_string(), p)).collect::<Vec<_>>(),
        )])
    }

    #[test]
    fn filters_answer_and_truncates() {
        let it = item("apples");
        let backend = stub(
            vec![("bananas", 0.4), ("oranges", 0.3), ("apples", 0.2), ("cars", 0.1)],
            &it,
            Strategy::Naive,
        );
        let set = generate(&it, &backend, Strategy::Naive, 3, &Default::default()).unwrap();
        let surfaces: Vec<&str> = set.candidates.iter().map(|c| c.surface.as_str()).collect();
        assert_eq!(surfaces, vec!["bananas", "oranges", "cars"]);
        assert_eq!(set.candidates[0].confidence, 0.4);
    }

    #[test]
    fn answer_exclusion_is_case_insensitive() {
        let it = item("apples");
        let backend = stub(vec![("Apples", 0.6), ("pears", 0.4)], &it, Strategy::Naive);
        let set = generate(&it, &backend, Strategy::Naive, 2, &Default::default()).unwrap();
        let surfaces: Vec<&str> = set.candidates.iter().map(|c| c.surface.as_str()).collect();
        assert_eq!(surfaces, vec!["pears"]);
    }

    #[test]
    fn k_one_takes_max_confidence() {
        let it = item("apples");
        let backend = stub(
            vec![("bananas", 0.4), ("oranges", 0.3), ("cars", 0.1)],
            &it,
            Strategy::Naive,
        );
        let set = generate(&it, &backend, Strategy::Naive, 1, &Default::default()).unwrap();
        assert_eq!(set.candidates.len(), 1);
        assert_eq!(set.candidates[0].surface, "bananas");
    }

    #[test]
    fn dedup_keeps_higher_confidence() {
        let it = item("apples");
        let backend = stub(
            vec![("Pears", 0.5), ("pears", 0.3), ("plums", 0.2)],
            &it,
            Strategy::Naive,
        );
        let set = generate(&it, &backend, Strategy::Naive, 3, &Default::default()).unwrap();
        assert_eq!(set.candidates.len(), 2);
        assert_eq!(set.candidates[0].surface, "Pears");
        assert_eq!(set.candidates[0].confidence, 0.5);
    }

    #[test]
    fn empty_survivors_is_legal() {
        let it = item("apples");
        let backend = stub(vec![("apples", 0.9)], &it, Strategy::Naive);
        let set = generate(&it, &backend, Strategy::Naive, 5, &Default::default()).unwrap();
        assert!(set.candidates.is_empty());
    }

    #[test]
    fn inflection_exclusion_when_enabled() {
        let it = item("apple");
        let backend = stub(vec![("apples", 0.5), ("pears", 0.4)], &it, Strategy::Naive);
        let opts = GenerateOptions { exclude_inflections: true, ..Default::default() };
        let set = generate(&it, &backend, Strategy::Naive, 2, &opts).unwrap();
        let surfaces: Vec<&str> = set.candidates.iter().map(|c| c.surface.as_str()).collect();
        assert_eq!(surfaces, vec!["pears"]);
        // off by default: "apples" survives
        let set = generate(&it, &backend, Strategy::Naive, 2, &Default::default()).unwrap();
        assert_eq!(set.candidates.len(), 2);
    }

    #[test]
    fn batch_preserves_order_and_collects_errors() {
        let a = ClozeItem { id: "a".into(), ..item("apples") };
        let mut long_stem = vec!["w"; 80].join(" ");
        long_stem.push_str(" [BLANK]");
        let b = ClozeItem { id: "b".into(), stem: long_stem, ..item("apples") };
        let c = ClozeItem { id: "c".into(), ..item("apples") };
        let backend = StubBackend::from_rows([(
            format_query(&a, Strategy::Naive).key(),
            vec![("pears".to_string(), 0.5)],
        )])
        .with_max_input_length(64);
        let (sets, errors) =
            generate_batch(&[a, b, c], &backend, Strategy::Naive, 3, &Default::default());
        assert_eq!(sets.len(), 2);
        assert_eq!(sets[0].id, "a");
        assert_eq!(sets[1].id, "c");
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].item_id, "b");
    }

    #[test]
    fn batch_empty_input() {
        let backend = StubBackend::from_rows(Vec::<(String, Vec<(String, f64)>)>::new());
        let (sets, errors) =
            generate_batch(&[], &backend, Strategy::Naive, 3, &Default::default());
        assert!(sets.is_empty() && errors.is_empty());
    }

    #[test]
    fn confidences_non_increasing() {
        let it = item("apples");
        let backend = stub(
            vec![("a", 0.1), ("b", 0.5), ("c", 0.3), ("d", 0.3)],
            &it,
            Strategy::Naive,
        );
        let set = generate(&it, &backend, Strategy::Naive, 10, &Default::default()).unwrap();
        assert!(set
            .candidates
            .windows(2)
            .all(|w| w[0].confidence >= w[1].confidence));
    }

    #[test]
    fn candidates_jsonl_round_trip() {
        let sets = vec![CandidateSet {
            id: "i1".into(),
            strategy: Strategy::AnswerRelating,
            candidates: vec![Candidate { surface: "pears".into(), confidence: 0.5 }],
        }];
        let text = write_candidates_jsonl(&sets);
        assert!(text.contains("\"strategy\":\"answer\""));
        assert!(text.contains("\"text\":\"pears\""));
        assert_eq!(read_candidates_jsonl(&text).unwrap(), sets);
    }
}
