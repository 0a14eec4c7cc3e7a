//! Stage orchestration: configuration, the prepare/generate/rank/evaluate
//! stages over JSONL artifacts, and the ablation harness.
//!
//! Every intermediate artifact is JSONL so each stage can be re-run and
//! diffed on its own. Items fan out to a bounded worker pool inside a
//! stage, but results are always emitted in input order, so output bytes do
//! not depend on the parallelism degree.

use crate::backend::{registry, MaskedLm, Strategy};
use crate::candidates::{
    generate, CandidateSet, GenerateError, GenerateOptions,
};
use crate::corpus::{self, ClozeItem};
use crate::metrics::{evaluate_corpus, EvalCase, EvalReport};
use crate::providers::{self, PosTagger, SentenceEmbedder, WordEmbedder};
use crate::selector::{self, Providers, RankedList, SelectorWeights, SimilarityMode};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
}

impl PipelineError {
    /// CLI exit code: 1 for data errors, 2 for configuration errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Data(_) => 1,
        }
    }
}

/// Full run configuration. Loadable from a TOML file; CLI flags override
/// individual fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub strategy: Strategy,
    pub k: usize,
    pub weights: [f64; 4],
    pub similarity_mode: SimilarityMode,
    /// `stub:PATH` or `model:ID`.
    pub backend: String,
    /// Un-fine-tuned backend for the DS / None ablation rows.
    pub backend_base: Option<String>,
    /// `table:PATH` or `hashed:DIM:SEED`.
    pub word_embedder: String,
    pub sentence_embedder: String,
    /// `lexicon:PATH`.
    pub pos_tagger: String,
    pub jobs: usize,
    pub overfetch: usize,
    pub exclude_inflections: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            strategy: Strategy::AnswerRelating,
            k: 10,
            weights: [0.6, 0.15, 0.15, 0.1],
            similarity_mode: SimilarityMode::Printed,
            backend: String::new(),
            backend_base: None,
            word_embedder: "hashed:64:1".into(),
            sentence_embedder: "hashed:64:2".into(),
            pos_tagger: String::new(),
            jobs: 1,
            overfetch: 3,
            exclude_inflections: false,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn selector_weights(&self) -> Result<SelectorWeights, PipelineError> {
        SelectorWeights::new(self.weights[0], self.weights[1], self.weights[2], self.weights[3])
            .map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.k < 1 {
            return Err(PipelineError::Config("k must be >= 1".into()));
        }
        if self.jobs < 1 {
            return Err(PipelineError::Config("jobs must be >= 1".into()));
        }
        self.selector_weights()?;
        Ok(())
    }

    pub fn resolve_backend(&self) -> Result<Box<dyn MaskedLm>, PipelineError> {
        registry::resolve(&self.backend).map_err(|e| PipelineError::Config(e.to_string()))
    }

    fn resolve_base_backend(&self) -> Result<Box<dyn MaskedLm>, PipelineError> {
        let spec = self.backend_base.as_deref().unwrap_or(&self.backend);
        registry::resolve(spec).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn resolve_providers(&self) -> Result<ResolvedProviders, PipelineError> {
        let cfg = |e: providers::ProviderError| PipelineError::Config(e.to_string());
        Ok((
            providers::resolve_word_embedder(&self.word_embedder).map_err(cfg)?,
            providers::resolve_embedder(&self.sentence_embedder).map_err(cfg)?,
            providers::resolve_tagger(&self.pos_tagger).map_err(cfg)?,
        ))
    }

    fn generate_options(&self) -> GenerateOptions {
        GenerateOptions {
            overfetch: self.overfetch,
            exclude_inflections: self.exclude_inflections,
        }
    }
}

/// The three selector providers resolved from their spec strings.
pub type ResolvedProviders = (Box<dyn WordEmbedder>, Box<dyn SentenceEmbedder>, Box<dyn PosTagger>);

fn pool(jobs: usize) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))
}

/// Candidate generation over all items. Per-item failures are collected;
/// output order matches input order at any parallelism degree.
pub fn run_generate(
    items: &[ClozeItem],
    backend: &dyn MaskedLm,
    config: &PipelineConfig,
) -> Result<(Vec<CandidateSet>, Vec<GenerateError>), PipelineError> {
    config.validate()?;
    let opts = config.generate_options();
    let results: Vec<Result<CandidateSet, GenerateError>> = pool(config.jobs)?.install(|| {
        items
            .par_iter()
            .map(|item| generate(item, backend, config.strategy, config.k, &opts))
            .collect()
    });
    let mut sets = Vec::with_capacity(items.len());
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(s) => sets.push(s),
            Err(e) => errors.push(e),
        }
    }
    Ok((sets, errors))
}

/// Distractor selection over all candidate sets. Each set must
/// cross-reference an item by id.
pub fn run_rank(
    sets: &[CandidateSet],
    items: &[ClozeItem],
    config: &PipelineConfig,
) -> Result<Vec<RankedList>, PipelineError> {
    config.validate()?;
    let weights = config.selector_weights()?;
    let (word, sentence, tagger) = config.resolve_providers()?;
    let by_id: BTreeMap<&str, &ClozeItem> = items.iter().map(|i| (i.id.as_str(), i)).collect();
    for set in sets {
        if !by_id.contains_key(set.id.as_str()) {
            return Err(PipelineError::Data(format!(
                "candidate set {:?} has no matching item",
                set.id
            )));
        }
    }
    let prov = Providers { word: word.as_ref(), sentence: sentence.as_ref(), tagger: tagger.as_ref() };
    pool(config.jobs)?.install(|| {
        sets.par_iter()
            .map(|set| {
                selector::select(by_id[set.id.as_str()], set, &prov, &weights, config.similarity_mode)
                    .map_err(|e| PipelineError::Data(format!("item {}: {e}", set.id)))
            })
            .collect()
    })
}

/// Scores ranked lists against the items' gold distractors.
pub fn run_evaluate(
    ranked: &[RankedList],
    items: &[ClozeItem],
) -> Result<EvalReport, PipelineError> {
    let by_id: BTreeMap<&str, &ClozeItem> = items.iter().map(|i| (i.id.as_str(), i)).collect();
    let cases: Vec<EvalCase> = ranked
        .iter()
        .map(|list| {
            let item = by_id.get(list.id.as_str()).ok_or_else(|| {
                PipelineError::Data(format!("ranked list {:?} has no matching item", list.id))
            })?;
            Ok(EvalCase {
                item_id: list.id.clone(),
                ranked: list.entries.iter().map(|e| e.text.clone()).collect(),
                gold: item.distractors.clone(),
            })
        })
        .collect::<Result<_, PipelineError>>()?;
    evaluate_corpus(&cases).map_err(|e| PipelineError::Data(e.to_string()))
}

/// One full in-memory pass: generate, rank, evaluate.
pub fn run_end_to_end(
    items: &[ClozeItem],
    config: &PipelineConfig,
) -> Result<(Vec<CandidateSet>, Vec<RankedList>, EvalReport), PipelineError> {
    let backend = config.resolve_backend()?;
    let (sets, _errors) = run_generate(items, backend.as_ref(), config)?;
    let ranked = run_rank(&sets, items, config)?;
    let report = run_evaluate(&ranked, items)?;
    Ok((sets, ranked, report))
}

/// Ablation axis: fine-tuning strategy, selector weight preset, or
/// component on/off combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationAxis {
    Strategy,
    WeightsPreset,
    Components,
}

impl std::str::FromStr for AblationAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strategy" => Ok(AblationAxis::Strategy),
            "weights-preset" => Ok(AblationAxis::WeightsPreset),
            "components" => Ok(AblationAxis::Components),
            other => Err(format!(
                "unknown ablation axis {other:?} (expected strategy|weights-preset|components)"
            )),
        }
    }
}

/// The four selector weight presets compared in the weighting study.
pub const WEIGHT_PRESETS: [[f64; 4]; 4] = [
    [0.25, 0.25, 0.25, 0.25],
    [0.4, 0.2, 0.2, 0.2],
    [0.6, 0.15, 0.15, 0.1],
    [0.8, 0.05, 0.05, 0.1],
];

/// One ablation result row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
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

fn row(variant: &str, report: &EvalReport) -> AblationRow {
    let a = &report.aggregate;
    AblationRow {
        variant: variant.to_string(),
        p1: a.p1,
        f1_3: a.f1_3,
        f1_10: a.f1_10,
        mrr10: a.mrr10,
        ndcg10: a.ndcg10,
    }
}

/// Runs the pipeline once per variant along `axis` and returns one metric
/// row per variant.
///
/// The components axis mirrors the generator/selector on-off grid:
/// `csg+ds` and `csg` use the configured backend, `ds` and `none` use the
/// un-fine-tuned base backend, and the `csg`/`none` rows rank candidates by
/// raw confidence instead of running the selector.
pub fn run_ablate(
    items: &[ClozeItem],
    config: &PipelineConfig,
    axis: AblationAxis,
) -> Result<Vec<AblationRow>, PipelineError> {
    config.validate()?;
    match axis {
        AblationAxis::Strategy => [Strategy::AnswerRelating, Strategy::Naive]
            .iter()
            .map(|s| {
                let cfg = PipelineConfig { strategy: *s, ..config.clone() };
                let (_, _, report) = run_end_to_end(items, &cfg)?;
                Ok(row(s.as_str(), &report))
            })
            .collect(),
        AblationAxis::WeightsPreset => WEIGHT_PRESETS
            .iter()
            .map(|w| {
                let cfg = PipelineConfig { weights: *w, ..config.clone() };
                let (_, _, report) = run_end_to_end(items, &cfg)?;
                Ok(row(&format!("w={:?}", w), &report))
            })
            .collect(),
        AblationAxis::Components => {
            let mut rows = Vec::with_capacity(4);
            for (variant, tuned, with_selector) in [
                ("csg+ds", true, true),
                ("csg", true, false),
                ("ds", false, true),
                ("none", false, false),
            ] {
                let backend = if tuned {
                    config.resolve_backend()?
                } else {
                    config.resolve_base_backend()?
                };
                let (sets, _) = run_generate(items, backend.as_ref(), config)?;
                let ranked = if with_selector {
                    run_rank(&sets, items, config)?
                } else {
                    sets.iter().map(selector::rank_by_confidence).collect()
                };
                let report = run_evaluate(&ranked, items)?;
                rows.push(row(variant, &report));
            }
            Ok(rows)
        }
    }
}

/// Parses a raw dataset file (JSONL of CLOTH passage records or flat DGen
/// records) into canonical items. Returns `(items, line_errors)`.
pub fn prepare(
    text: &str,
    format: DatasetFormat,
) -> (Vec<ClozeItem>, Vec<(usize, String)>) {
    let mut items = Vec::new();
    let mut errors = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = lineno + 1;
        match format {
            DatasetFormat::Cloth => {
                match serde_json::from_str::<corpus::ClothRecord>(line)
                    .map_err(|e| e.to_string())
                    .and_then(|r| corpus::parse_cloth(&r).map_err(|e| e.to_string()))
                {
                    Ok(parsed) => items.extend(parsed),
                    Err(e) => errors.push((lineno, e)),
                }
            }
            DatasetFormat::Dgen => {
                match serde_json::from_str::<corpus::DgenRecord>(line)
                    .map_err(|e| e.to_string())
                    .and_then(|r| corpus::parse_dgen(&r).map_err(|e| e.to_string()))
                {
                    Ok(item) => items.push(item),
                    Err(e) => errors.push((lineno, e)),
                }
            }
        }
    }
    (items, errors)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Cloth,
    Dgen,
}

impl std::str::FromStr for DatasetFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cloth" => Ok(DatasetFormat::Cloth),
            "dgen" => Ok(DatasetFormat::Dgen),
            other => Err(format!("unknown dataset format {other:?} (expected cloth|dgen)")),
        }
    }
}
