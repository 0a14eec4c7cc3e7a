//! Distractor selection.
//!
//! Scores each candidate with four features — backend confidence, word
//! embedding similarity to the answer, contextual similarity of the filled
//! stems, and a POS match indicator — MinMax-normalizes each feature across
//! the candidate set, combines them by weighted sum, and selects the top 3.

use crate::candidates::{Candidate, CandidateSet};
use crate::corpus::ClozeItem;
use crate::providers::{PosTagger, SentenceEmbedder, WordEmbedder};
use serde::{Deserialize, Serialize};

pub const TOP_SELECTED: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum SelectorError {
    #[error("cosine similarity undefined for a zero vector")]
    ZeroVector,
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("non-finite feature value {0}")]
    NonFinite(f64),
    #[error("invalid weights: {0}")]
    BadWeights(String),
}

/// How the two embedding features are oriented. The printed form is
/// 1 − cos (a distance); `Cosine` flips both to the raw cosine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityMode {
    Printed,
    Cosine,
}

impl std::str::FromStr for SimilarityMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "printed" | "as-printed" => Ok(SimilarityMode::Printed),
            "cosine" => Ok(SimilarityMode::Cosine),
            other => Err(format!("unknown similarity mode {other:?} (expected printed|cosine)")),
        }
    }
}

/// Weights for the four features; nonnegative, not all zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectorWeights {
    pub w0: f64,
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl SelectorWeights {
    pub fn new(w0: f64, w1: f64, w2: f64, w3: f64) -> Result<Self, SelectorError> {
        let w = SelectorWeights { w0, w1, w2, w3 };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), SelectorError> {
        let all = self.as_array();
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(SelectorError::BadWeights(format!("{all:?} (must be finite and >= 0)")));
        }
        if all.iter().sum::<f64>() <= 0.0 {
            return Err(SelectorError::BadWeights("all weights are zero".into()));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.w0, self.w1, self.w2, self.w3]
    }
}

impl Default for SelectorWeights {
    fn default() -> Self {
        SelectorWeights { w0: 0.6, w1: 0.15, w2: 0.15, w3: 0.1 }
    }
}

/// Raw and normalized feature values for one candidate. A `None` raw value
/// means the provider failed for that candidate; it normalizes to 0 and is
/// flagged in `warnings`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub raw: [Option<f64>; 4],
    pub normalized: [f64; 4],
    pub warnings: Vec<String>,
}

/// One scored candidate in a ranked list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub text: String,
    /// Raw s0..s3; failed features serialize as 0.
    pub s: [f64; 4],
    /// Normalized n0..n3.
    pub n: [f64; 4],
    pub score: f64,
}

/// The selector output for one item: all candidates ordered by final score
/// and the top-3 selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub id: String,
    pub entries: Vec<RankedEntry>,
    pub selected: Vec<String>,
}

/// Word feature: 1 − cos(answer, candidate) as printed, or raw cosine.
pub fn word_similarity(
    answer_vec: &[f64],
    cand_vec: &[f64],
    mode: SimilarityMode,
) -> Result<f64, SelectorError> {
    oriented_cosine(answer_vec, cand_vec, mode)
}

/// Context feature over sentence vectors of the two filled stems.
pub fn context_similarity(
    sent_vec_answer: &[f64],
    sent_vec_cand: &[f64],
    mode: SimilarityMode,
) -> Result<f64, SelectorError> {
    oriented_cosine(sent_vec_answer, sent_vec_cand, mode)
}

fn oriented_cosine(a: &[f64], b: &[f64], mode: SimilarityMode) -> Result<f64, SelectorError> {
    let c = cosine(a, b)?;
    Ok(match mode {
        SimilarityMode::Printed => 1.0 - c,
        SimilarityMode::Cosine => c,
    })
}

fn cosine(a: &[f64], b: &[f64]) -> Result<f64, SelectorError> {
    if a.len() != b.len() {
        return Err(SelectorError::DimensionMismatch(a.len(), b.len()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(SelectorError::ZeroVector);
    }
    Ok(dot / (na * nb))
}

/// POS indicator: 1 iff the tagger assigns both words the same tag. An
/// uncovered word scores 0 and raises a warning rather than erroring.
pub fn pos_match(
    answer: &str,
    cand: &str,
    tagger: &dyn PosTagger,
    context_answer: Option<&str>,
    context_cand: Option<&str>,
) -> (f64, Option<String>) {
    let ta = tagger.tag(answer, context_answer);
    let tc = tagger.tag(cand, context_cand);
    match (ta, tc) {
        (Some(a), Some(c)) => ((a == c) as u8 as f64, None),
        (None, _) => (0.0, Some(format!("no POS tag for answer {answer:?}"))),
        (_, None) => (0.0, Some(format!("no POS tag for candidate {cand:?}"))),
    }
}

/// (v − min)/(max − min) elementwise; a constant list maps to all zeros.
pub fn minmax_normalize(values: &[f64]) -> Result<Vec<f64>, SelectorError> {
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(SelectorError::NonFinite(*bad));
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Ok(vec![0.0; values.len()]);
    }
    Ok(values.iter().map(|v| (v - min) / (max - min)).collect())
}

/// Weighted sum of normalized features for each candidate.
pub fn score(features: &[FeatureVector], weights: &SelectorWeights) -> Vec<f64> {
    let w = weights.as_array();
    features
        .iter()
        .map(|f| f.normalized.iter().zip(&w).map(|(n, w)| n * w).sum())
        .collect()
}

/// Feature providers handed to [`select`].
pub struct Providers<'a> {
    pub word: &'a dyn WordEmbedder,
    pub sentence: &'a dyn SentenceEmbedder,
    pub tagger: &'a dyn PosTagger,
}

/// Computes features for every candidate, normalizes per feature across the
/// set, scores, orders (score desc, then raw confidence desc, then
/// lexicographic), and selects the top 3.
///
/// Provider failures degrade the affected feature for that candidate to the
/// normalized worst (0) and never abort the item.
pub fn select(
    item: &ClozeItem,
    set: &CandidateSet,
    providers: &Providers<'_>,
    weights: &SelectorWeights,
    mode: SimilarityMode,
) -> Result<RankedList, SelectorError> {
    weights.validate()?;
    if set.candidates.is_empty() {
        return Ok(RankedList { id: set.id.clone(), entries: vec![], selected: vec![] });
    }

    let answer_filled = item.filled_stem(&item.answer);
    let answer_word_vec = providers.word.embed_word(&item.answer).ok();
    let answer_sent_vec = providers.sentence.embed_sentence(&answer_filled).ok();

    let mut features: Vec<FeatureVector> = Vec::with_capacity(set.candidates.len());
    for cand in &set.candidates {
        let mut warnings = Vec::new();
        let filled = item.filled_stem(&cand.surface);

        let s1 = answer_word_vec
            .as_deref()
            .and_then(|av| {
                providers
                    .word
                    .embed_word(&cand.surface)
                    .ok()
                    .and_then(|cv| word_similarity(av, &cv, mode).ok())
            })
            .filter(|v| v.is_finite());
        if s1.is_none() {
            warnings.push(format!("word embedding unavailable for {:?}", cand.surface));
        }

        let s2 = answer_sent_vec
            .as_deref()
            .and_then(|av| {
                providers
                    .sentence
                    .embed_sentence(&filled)
                    .ok()
                    .and_then(|cv| context_similarity(av, &cv, mode).ok())
            })
            .filter(|v| v.is_finite());
        if s2.is_none() {
            warnings.push(format!("sentence embedding unavailable for {:?}", cand.surface));
        }

        let (s3, pos_warning) = pos_match(
            &item.answer,
            &cand.surface,
            providers.tagger,
            Some(answer_filled.as_str()),
            Some(filled.as_str()),
        );
        warnings.extend(pos_warning);

        features.push(FeatureVector {
            raw: [Some(cand.confidence), s1, s2, Some(s3)],
            normalized: [0.0; 4],
            warnings,
        });
    }

    // normalize each feature over the candidates where it succeeded;
    // failures stay at the normalized worst (0)
    for j in 0..4 {
        let present: Vec<f64> = features.iter().filter_map(|f| f.raw[j]).collect();
        if present.is_empty() {
            continue;
        }
        let normed = minmax_normalize(&present)?;
        let mut it = normed.into_iter();
        for f in features.iter_mut() {
            if f.raw[j].is_some() {
                f.normalized[j] = it.next().unwrap();
            }
        }
    }

    let scores = score(&features, weights);
    let mut order: Vec<usize> = (0..set.candidates.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap()
            .then_with(|| {
                set.candidates[b]
                    .confidence
                    .partial_cmp(&set.candidates[a].confidence)
                    .unwrap()
            })
            .then_with(|| set.candidates[a].surface.cmp(&set.candidates[b].surface))
    });

    let entries: Vec<RankedEntry> = order
        .iter()
        .map(|&i| RankedEntry {
            text: set.candidates[i].surface.clone(),
            s: features[i].raw.map(|v| v.unwrap_or(0.0)),
            n: features[i].normalized,
            score: scores[i],
        })
        .collect();
    let selected = entries
        .iter()
        .take(TOP_SELECTED)
        .map(|e| e.text.clone())
        .collect();
    Ok(RankedList { id: set.id.clone(), entries, selected })
}

/// Ranks by raw backend confidence only; used when the selector component
/// is ablated away.
pub fn rank_by_confidence(set: &CandidateSet) -> RankedList {
    let mut candidates: Vec<&Candidate> = set.candidates.iter().collect();
    candidates.sort_by(|a, b| {
        b.confidence
            .partial_cmp(&a.confidence)
            .unwrap()
            .then_with(|| a.surface.cmp(&b.surface))
    });
    let entries: Vec<RankedEntry> = candidates
        .iter()
        .map(|c| RankedEntry {
            text: c.surface.clone(),
            s: [c.confidence, 0.0, 0.0, 0.0],
            n: [0.0; 4],
            score: c.confidence,
        })
        .collect();
    let selected = entries.iter().take(TOP_SELECTED).map(|e| e.text.clone()).collect();
    RankedList { id: set.id.clone(), entries, selected }
}

pub fn write_ranked_jsonl(lists: &[RankedList]) -> String {
    let mut out = String::new();
    for list in lists {
        out.push_str(&serde_json::to_string(list).expect("ranked list serializes"));
        out.push('\n');
    }
    out
}

pub fn read_ranked_jsonl(text: &str) -> Result<Vec<RankedList>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
