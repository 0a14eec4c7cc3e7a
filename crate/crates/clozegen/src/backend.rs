//! Masked-LM backend contract.
//!
//! Everything that predicts words for a masked position sits behind the
//! [`MaskedLm`] trait: fill-mask prediction with probabilities, per-target
//! loss, and an optional fine-tuning entry point. The crate ships one
//! implementation, a deterministic table-driven [`StubBackend`], which is
//! the oracle for all golden-file tests. Real model adapters plug in through
//! [`registry`].

use crate::corpus::{ClozeItem, TrainingInstance, BLANK};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Fine-tuning input construction: stem-with-mask alone, or stem-with-mask
/// followed by a separator and the answer so the model conditions on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Naive,
    #[serde(rename = "answer")]
    AnswerRelating,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Naive => "naive",
            Strategy::AnswerRelating => "answer",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "naive" => Ok(Strategy::Naive),
            "answer" | "answer-relating" => Ok(Strategy::AnswerRelating),
            other => Err(format!("unknown strategy {other:?} (expected naive|answer)")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("backend transport failure: {0}")]
    Transport(String),
    #[error("formatted query is {tokens} tokens, exceeding the backend limit of {max}")]
    InputTooLong { tokens: usize, max: usize },
    #[error("target {surface:?} is outside the backend vocabulary for this query")]
    OutOfVocabulary { surface: String },
    #[error("backend does not support fine-tuning")]
    TrainingUnsupported,
    #[error("fine-tune called with no training instances")]
    NoInstances,
    #[error("invalid fine-tune spec: {0}")]
    InvalidSpec(String),
    #[error("failed to load stub table {path}: {reason}")]
    Table { path: String, reason: String },
}

/// A fill-mask query: the text around the blank, plus the answer hint when
/// the answer-relating strategy is in effect.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskQuery {
    pub left_context: String,
    pub right_context: String,
    pub answer_hint: Option<String>,
    pub strategy: Strategy,
}

impl MaskQuery {
    /// Canonical lookup key: lowercased, whitespace-collapsed
    /// `left [MASK] right`, with ` [SEP] answer` appended under the
    /// answer-relating strategy. Stub tables are keyed by this string.
    pub fn key(&self) -> String {
        let mut s = format!("{} [MASK] {}", self.left_context, self.right_context);
        if let Some(hint) = &self.answer_hint {
            s.push_str(" [SEP] ");
            s.push_str(hint);
        }
        normalize_key(&s)
    }
}

fn normalize_key(s: &str) -> String {
    s.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

/// One fill-mask prediction: a whole-word surface form and its probability
/// mass under the backend's distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub surface: String,
    pub probability: f64,
}

/// Fine-tuning configuration handed to an adapter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineTuneSpec {
    pub strategy: Strategy,
    pub optimizer: String,
    pub learning_rate: f64,
    pub max_input_length: usize,
    pub batch_size: usize,
    pub model_id: String,
}

impl FineTuneSpec {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.learning_rate.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(BackendError::InvalidSpec(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size < 1 {
            return Err(BackendError::InvalidSpec("batch_size must be >= 1".into()));
        }
        if self.max_input_length < 1 {
            return Err(BackendError::InvalidSpec("max_input_length must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for FineTuneSpec {
    fn default() -> Self {
        FineTuneSpec {
            strategy: Strategy::AnswerRelating,
            optimizer: "adam".into(),
            learning_rate: 1e-4,
            max_input_length: 64,
            batch_size: 64,
            model_id: "stub".into(),
        }
    }
}

/// Splits an item's stem at `[BLANK]` into a [`MaskQuery`], attaching the
/// answer hint under the answer-relating strategy.
pub fn format_query(item: &ClozeItem, strategy: Strategy) -> MaskQuery {
    let (left, right) = item
        .stem
        .split_once(BLANK)
        .expect("item invariant: exactly one blank");
    MaskQuery {
        left_context: left.to_string(),
        right_context: right.to_string(),
        answer_hint: match strategy {
            Strategy::Naive => None,
            Strategy::AnswerRelating => Some(item.answer.clone()),
        },
        strategy,
    }
}

/// Uniform masked-LM contract. `top_k` and `loss` are read-only;
/// `fine_tune` leaves `self` untouched and returns a new handle.
pub trait MaskedLm: Send + Sync {
    /// At most `k` predictions, probability descending, lexicographic on
    /// ties. Probabilities are in (0,1] and need not sum to 1.
    fn top_k(&self, query: &MaskQuery, k: usize) -> Result<Vec<Prediction>, BackendError>;

    /// Negative log probability of `target` at the masked position.
    fn loss(&self, query: &MaskQuery, target: &str) -> Result<f64, BackendError>;

    /// Returns a handle with updated parameters. Generation-only backends
    /// keep the default and report [`BackendError::TrainingUnsupported`].
    fn fine_tune(
        &self,
        _instances: &[TrainingInstance],
        _spec: &FineTuneSpec,
    ) -> Result<Box<dyn MaskedLm>, BackendError> {
        Err(BackendError::TrainingUnsupported)
    }
}

/// Mean per-instance loss over a training set; this is the objective a
/// training adapter minimizes.
pub fn mean_loss(
    backend: &dyn MaskedLm,
    instances: &[TrainingInstance],
    strategy: Strategy,
) -> Result<f64, BackendError> {
    if instances.is_empty() {
        return Err(BackendError::NoInstances);
    }
    let mut total = 0.0;
    for inst in instances {
        let query = instance_query(inst, strategy);
        total += backend.loss(&query, &inst.target_distractor)?;
    }
    Ok(total / instances.len() as f64)
}

fn instance_query(inst: &TrainingInstance, strategy: Strategy) -> MaskQuery {
    let (left, right) = inst.stem.split_once(BLANK).unwrap_or((inst.stem.as_str(), ""));
    MaskQuery {
        left_context: left.to_string(),
        right_context: right.to_string(),
        answer_hint: match strategy {
            Strategy::Naive => None,
            Strategy::AnswerRelating => Some(inst.answer.clone()),
        },
        strategy,
    }
}

/// On-disk stub table. `entries` maps a [`MaskQuery::key`] to a
/// surface → probability table; `default` serves any key not listed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StubTable {
    pub version: u32,
    pub entries: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default)]
    pub default: Option<BTreeMap<String, f64>>,
}

/// Deterministic table-driven backend.
///
/// Fine-tuning is a table merge: for each training instance the target's
/// probability in that query's row is set to 1.0 and every other entry's
/// probability is halved, so the target dominates afterwards. Instances are
/// applied in input order.
#[derive(Debug, Clone)]
pub struct StubBackend {
    table: StubTable,
    max_input_length: Option<usize>,
}

impl StubBackend {
    pub fn new(table: StubTable) -> Self {
        StubBackend { table, max_input_length: None }
    }

    /// Builds a backend from one in-memory row list, keyed by query keys.
    pub fn from_rows<I, J, S>(rows: I) -> Self
    where
        I: IntoIterator<Item = (S, J)>,
        J: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let entries = rows
            .into_iter()
            .map(|(k, preds)| {
                (
                    normalize_key(&k.into()),
                    preds.into_iter().map(|(s, p)| (s.into(), p)).collect(),
                )
            })
            .collect();
        StubBackend::new(StubTable { version: 1, entries, default: None })
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path).map_err(|e| BackendError::Table {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let table: StubTable = serde_json::from_str(&text).map_err(|e| BackendError::Table {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        if table.version != 1 {
            return Err(BackendError::Table {
                path: path.display().to_string(),
                reason: format!("unsupported table version {}", table.version),
            });
        }
        Ok(StubBackend::new(table))
    }

    pub fn table(&self) -> &StubTable {
        &self.table
    }

    pub fn with_max_input_length(mut self, max: usize) -> Self {
        self.max_input_length = Some(max);
        self
    }

    fn row(&self, key: &str) -> Option<&BTreeMap<String, f64>> {
        self.table.entries.get(key).or(self.table.default.as_ref())
    }

    fn check_length(&self, query: &MaskQuery) -> Result<(), BackendError> {
        if let Some(max) = self.max_input_length {
            let tokens = query.key().split_whitespace().count();
            if tokens > max {
                return Err(BackendError::InputTooLong { tokens, max });
            }
        }
        Ok(())
    }
}

impl MaskedLm for StubBackend {
    fn top_k(&self, query: &MaskQuery, k: usize) -> Result<Vec<Prediction>, BackendError> {
        self.check_length(query)?;
        let mut preds: Vec<Prediction> = self
            .row(&query.key())
            .map(|row| {
                row.iter()
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(s, p)| Prediction { surface: s.clone(), probability: *p })
                    .collect()
            })
            .unwrap_or_default();
        preds.sort_by(|a, b| {
            b.probability
                .partial_cmp(&a.probability)
                .unwrap()
                .then_with(|| a.surface.cmp(&b.surface))
        });
        preds.truncate(k);
        Ok(preds)
    }

    fn loss(&self, query: &MaskQuery, target: &str) -> Result<f64, BackendError> {
        self.check_length(query)?;
        let p = self
            .row(&query.key())
            .and_then(|row| row.get(target))
            .copied()
            .unwrap_or(0.0);
        if p <= 0.0 {
            return Err(BackendError::OutOfVocabulary { surface: target.to_string() });
        }
        Ok(-p.ln())
    }

    fn fine_tune(
        &self,
        instances: &[TrainingInstance],
        spec: &FineTuneSpec,
    ) -> Result<Box<dyn MaskedLm>, BackendError> {
        if instances.is_empty() {
            return Err(BackendError::NoInstances);
        }
        spec.validate()?;
        let mut table = self.table.clone();
        for inst in instances {
            let key = instance_query(inst, spec.strategy).key();
            let row = table.entries.entry(key).or_default();
            for (surface, p) in row.iter_mut() {
                if surface != &inst.target_distractor {
                    *p *= 0.5;
                }
            }
            row.insert(inst.target_distractor.clone(), 1.0);
        }
        Ok(Box::new(StubBackend { table, max_input_length: self.max_input_length }))
    }
}

pub mod registry {
    //! Named adapter plugins for real masked-LM checkpoints.
    //!
    //! An adapter registers a factory under a name; `resolve` turns a
    //! backend spec string (`stub:PATH` or `model:ID`) into a live handle.
    //! Model identifiers are opaque to the core.

    use super::{BackendError, MaskedLm, StubBackend};
    use std::collections::HashMap;
    use std::path::Path;
    use std::sync::Mutex;

    pub type Factory = fn(model_id: &str) -> Result<Box<dyn MaskedLm>, BackendError>;

    static ADAPTERS: Mutex<Option<HashMap<String, Factory>>> = Mutex::new(None);

    pub fn register_adapter(name: &str, factory: Factory) {
        let mut guard = ADAPTERS.lock().unwrap();
        guard.get_or_insert_with(HashMap::new).insert(name.to_string(), factory);
    }

    /// Resolves `stub:PATH`, `model:ID`, or `model:ADAPTER/ID` where
    /// `ADAPTER` names a registered factory. A bare `model:ID` uses the
    /// adapter registered as `default`.
    pub fn resolve(spec: &str) -> Result<Box<dyn MaskedLm>, BackendError> {
        if let Some(path) = spec.strip_prefix("stub:") {
            return Ok(Box::new(StubBackend::load(Path::new(path))?));
        }
        if let Some(id) = spec.strip_prefix("model:") {
            let (adapter, model_id) = match id.split_once('/') {
                Some((a, rest)) if has_adapter(a) => (a.to_string(), rest.to_string()),
                _ => ("default".to_string(), id.to_string()),
            };
            let guard = ADAPTERS.lock().unwrap();
            let factory = guard
                .as_ref()
                .and_then(|m| m.get(&adapter))
                .copied()
                .ok_or_else(|| {
                    BackendError::Transport(format!(
                        "no masked-LM adapter registered under {adapter:?}; \
                         register one or use a stub: backend"
                    ))
                })?;
            drop(guard);
            return factory(&model_id);
        }
        Err(BackendError::Transport(format!(
            "unknown backend spec {spec:?} (expected stub:PATH or model:ID)"
        )))
    }

    fn has_adapter(name: &str) -> bool {
        ADAPTERS
            .lock()
            .unwrap()
            .as_ref()
            .map(|m| m.contains_key(name))
            .unwrap_or(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Source;

    fn item() -> ClozeItem {
        ClozeItem {
            id: "i1".into(),
            source: Source::Other,
            domain: None,
            stem: "I like [BLANK] .".into(),
            answer: "apples".into(),
            distractors: vec!["cars".into()],
        }
    }

    fn fruit_stub(strategy: Strategy) -> (StubBackend, MaskQuery) {
        let query = format_query(&item(), strategy);
        let backend = StubBackend::from_rows([(
            query.key(),
            vec![
                ("bananas".to_string(), 0.4),
                ("oranges".to_string(), 0.3),
                ("apples".to_string(), 0.2),
                ("cars".to_string(), 0.1),
            ],
        )]);
        (backend, query)
    }

    #[test]
    fn format_query_naive() {
        let q = format_query(&item(), Strategy::Naive);
        assert_eq!(q.left_context, "I like ");
        assert_eq!(q.right_context, " .");
        assert_eq!(q.answer_hint, None);
    }

    #[test]
    fn format_query_answer_relating() {
        let q = format_query(&item(), Strategy::AnswerRelating);
        assert_eq!(q.answer_hint.as_deref(), Some("apples"));
        assert!(q.key().ends_with("[sep] apples"));
    }

    #[test]
    fn top_k_orders_and_truncates() {
        let (backend, query) = fruit_stub(Strategy::Naive);
        let preds = backend.top_k(&query, 2).unwrap();
        assert_eq!(preds.len(), 2);
        assert_eq!(preds[0].surface, "bananas");
        assert_eq!(preds[0].probability, 0.4);
        assert_eq!(preds[1].surface, "oranges");
    }

    #[test]
    fn top_k_no_padding_past_table() {
        let (backend, query) = fruit_stub(Strategy::Naive);
        let preds = backend.top_k(&query, 10).unwrap();
        assert_eq!(preds.len(), 4);
    }

    #[test]
    fn top_k_lexicographic_tie_break() {
        let query = format_query(&item(), Strategy::Naive);
        let backend = StubBackend::from_rows([(
            query.key(),
            vec![("bee".to_string(), 0.3), ("ant".to_string(), 0.3)],
        )]);
        let preds = backend.top_k(&query, 2).unwrap();
        assert_eq!(preds[0].surface, "ant");
        assert_eq!(preds[1].surface, "bee");
    }

    #[test]
    fn loss_matches_table() {
        let query = format_query(&item(), Strategy::Naive);
        let backend = StubBackend::from_rows([(
            query.key(),
            vec![("cars".to_string(), 1.0), ("vans".to_string(), 0.5)],
        )]);
        assert_eq!(backend.loss(&query, "cars").unwrap(), 0.0);
        let l = backend.loss(&query, "vans").unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn loss_out_of_vocabulary() {
        let (backend, query) = fruit_stub(Strategy::Naive);
        assert!(matches!(
            backend.loss(&query, "zeppelins"),
            Err(BackendError::OutOfVocabulary { .. })
        ));
    }

    #[test]
    fn fine_tune_target_dominates() {
        let (backend, _) = fruit_stub(Strategy::AnswerRelating);
        let instances = extract(&item());
        let spec = FineTuneSpec::default();
        let tuned = backend.fine_tune(&instances, &spec).unwrap();
        let query = format_query(&item(), Strategy::AnswerRelating);
        let preds = tuned.top_k(&query, 1).unwrap();
        assert_eq!(preds[0].surface, "cars");
        assert_eq!(preds[0].probability, 1.0);
    }

    #[test]
    fn fine_tune_leaves_original_untouched() {
        let (backend, query) = fruit_stub(Strategy::AnswerRelating);
        let _ = backend.fine_tune(&extract(&item()), &FineTuneSpec::default()).unwrap();
        let preds = backend.top_k(&query, 1).unwrap();
        assert_eq!(preds[0].surface, "bananas");
    }

    #[test]
    fn fine_tune_rejects_empty_and_bad_spec() {
        let (backend, _) = fruit_stub(Strategy::AnswerRelating);
        assert!(matches!(
            backend.fine_tune(&[], &FineTuneSpec::default()),
            Err(BackendError::NoInstances)
        ));
        let bad = FineTuneSpec { learning_rate: 0.0, ..FineTuneSpec::default() };
        assert!(matches!(
            backend.fine_tune(&extract(&item()), &bad),
            Err(BackendError::InvalidSpec(_))
        ));
    }

    #[test]
    fn mean_loss_over_instances() {
        let query = format_query(&item(), Strategy::AnswerRelating);
        let backend = StubBackend::from_rows([(
            query.key(),
            vec![("cars".to_string(), 0.5)],
        )]);
        let loss = mean_loss(&backend, &extract(&item()), Strategy::AnswerRelating).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn input_too_long() {
        let (backend, _) = fruit_stub(Strategy::Naive);
        let backend = backend.with_max_input_length(4);
        let long = ClozeItem {
            stem: "one two three four five [BLANK] six".into(),
            ..item()
        };
        let query = format_query(&long, Strategy::Naive);
        assert!(matches!(
            backend.top_k(&query, 5),
            Err(BackendError::InputTooLong { .. })
        ));
    }

    #[test]
    fn registry_rejects_unregistered_model() {
        assert!(registry::resolve("model:some-checkpoint").is_err());
        assert!(registry::resolve("garbage").is_err());
    }

    fn extract(i: &ClozeItem) -> Vec<TrainingInstance> {
        crate::corpus::extract_training_instances(i)
    }
}
