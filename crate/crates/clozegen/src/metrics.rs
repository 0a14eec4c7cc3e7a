//! Ranking metrics against gold distractor sets: P@1, F1@3, F1@10, MRR@10,
//! NDCG@10, plus unweighted corpus aggregation.
//!
//! Matching is case-insensitive, whitespace-trimmed string equality
//! throughout; no stemming.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("cannot aggregate zero items")]
    EmptyCorpus,
    #[error("case {0}: gold set is empty")]
    EmptyGold(String),
    #[error("case {0}: ranked list contains duplicate {1:?}")]
    DuplicateRanked(String, String),
}

/// One evaluation case: the ranked candidate surfaces and the gold set.
#[derive(Debug, Clone)]
pub struct EvalCase {
    pub item_id: String,
    pub ranked: Vec<String>,
    pub gold: Vec<String>,
}

fn canon(s: &str) -> String {
    s.trim().to_lowercase()
}

impl EvalCase {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.gold.is_empty() {
            return Err(MetricsError::EmptyGold(self.item_id.clone()));
        }
        let mut seen = Vec::new();
        for r in &self.ranked {
            let c = canon(r);
            if seen.contains(&c) {
                return Err(MetricsError::DuplicateRanked(self.item_id.clone(), r.clone()));
            }
            seen.push(c);
        }
        Ok(())
    }

    fn hits(&self) -> Vec<bool> {
        let gold: Vec<String> = self.gold.iter().map(|g| canon(g)).collect();
        self.ranked.iter().map(|r| gold.contains(&canon(r))).collect()
    }

    fn gold_count(&self) -> usize {
        let mut gold: Vec<String> = self.gold.iter().map(|g| canon(g)).collect();
        gold.sort();
        gold.dedup();
        gold.len()
    }
}

/// Metric values for one item, as fractions in [0,1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItemMetrics {
    #[serde(rename = "P@1")]
    pub p1: f64,
    #[serde(rename = "F1@3")]
    pub f1_3: f64,
    #[serde(rename = "F1@10")]
    pub f1_10: f64,
    #[serde(rename = "MRR@10")]
    pub mrr10: f64,
    #[serde(rename = "NDCG@10")]
    pub ndcg10: f64,
}

/// Per-item metrics and their unweighted corpus means.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub aggregate: AggregateMetrics,
    pub per_item: BTreeMap<String, ItemMetrics>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateMetrics {
    #[serde(rename = "P@1")]
    pub p1: f64,
    #[serde(rename = "F1@3")]
    pub f1_3: f64,
    #[serde(rename = "F1@10")]
    pub f1_10: f64,
    #[serde(rename = "MRR@10")]
    pub mrr10: f64,
    #[serde(rename = "NDCG@10")]
    pub ndcg10: f64,
    pub scale: String,
}

/// 1 if the top-ranked candidate is gold, else 0.
pub fn p_at_1(case: &EvalCase) -> f64 {
    case.hits().first().map(|h| *h as u8 as f64).unwrap_or(0.0)
}

/// F1 with precision = hits/k (the cutoff, not the returned length) and
/// recall = hits/|gold|; 0 when there are no hits.
pub fn f1_at_k(case: &EvalCase, k: usize) -> f64 {
    let hits = case.hits().iter().take(k).filter(|h| **h).count() as f64;
    if hits == 0.0 {
        return 0.0;
    }
    let precision = hits / k as f64;
    let recall = hits / case.gold_count() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Reciprocal rank of the first gold match within the top k, else 0.
pub fn mrr_at_k(case: &EvalCase, k: usize) -> f64 {
    case.hits()
        .iter()
        .take(k)
        .position(|h| *h)
        .map(|i| 1.0 / (i + 1) as f64)
        .unwrap_or(0.0)
}

/// Binary-gain NDCG with log2(i+1) discount; the ideal ranking places
/// min(|gold|, k) ones in the lead.
pub fn ndcg_at_k(case: &EvalCase, k: usize) -> f64 {
    let dcg: f64 = case
        .hits()
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, h)| **h)
        .map(|(i, _)| 1.0 / ((i + 2) as f64).log2())
        .sum();
    if dcg == 0.0 {
        return 0.0;
    }
    let ideal = case.gold_count().min(k);
    let idcg: f64 = (0..ideal).map(|i| 1.0 / ((i + 2) as f64).log2()).sum();
    dcg / idcg
}

/// All five metrics for one case.
pub fn item_metrics(case: &EvalCase) -> ItemMetrics {
    ItemMetrics {
        p1: p_at_1(case),
        f1_3: f1_at_k(case, 3),
        f1_10: f1_at_k(case, 10),
        mrr10: mrr_at_k(case, 10),
        ndcg10: ndcg_at_k(case, 10),
    }
}

/// Unweighted (macro) mean over all cases; empty ranked lists contribute
/// all-zero items.
pub fn evaluate_corpus(cases: &[EvalCase]) -> Result<EvalReport, MetricsError> {
    if cases.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let mut per_item = BTreeMap::new();
    let mut sums = [0.0; 5];
    for case in cases {
        case.validate()?;
        let m = item_metrics(case);
        sums[0] += m.p1;
        sums[1] += m.f1_3;
        sums[2] += m.f1_10;
        sums[3] += m.mrr10;
        sums[4] += m.ndcg10;
        per_item.insert(case.item_id.clone(), m);
    }
    let n = cases.len() as f64;
    Ok(EvalReport {
        aggregate: AggregateMetrics {
            p1: sums[0] / n,
            f1_3: sums[1] / n,
            f1_10: sums[2] / n,
            mrr10: sums[3] / n,
            ndcg10: sums[4] / n,
            scale: "fraction".into(),
        },
        per_item,
    })
}

impl EvalReport {
    /// The same report with aggregate values multiplied by 100.
    pub fn scaled_x100(&self) -> EvalReport {
        let a = &self.aggregate;
        EvalReport {
            aggregate: AggregateMetrics {
                p1: a.p1 * 100.0,
                f1_3: a.f1_3 * 100.0,
                f1_10: a.f1_10 * 100.0,
                mrr10: a.mrr10 * 100.0,
                ndcg10: a.ndcg10 * 100.0,
                scale: "x100".into(),
            },
            per_item: self.per_item.clone(),
        }
    }
}
