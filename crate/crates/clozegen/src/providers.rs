//! Embedding and POS providers for the distractor selector.
//!
//! All three interfaces are deliberately tiny so production adapters
//! (fasttext-style word vectors, sentence encoders, real taggers) can plug
//! in. The crate ships deterministic table-backed and hash-backed stubs
//! that cover tests and desk-scale runs.

use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum ProviderError {
    #[error("no embedding for {0:?}")]
    UnknownWord(String),
    #[error("embedding of {0:?} is the zero vector")]
    ZeroVector(String),
    #[error("failed to load provider table {path}: {reason}")]
    Table { path: String, reason: String },
    #[error("bad provider spec {0:?}")]
    BadSpec(String),
}

/// Word-level embedding lookup (answer vs candidate similarity).
pub trait WordEmbedder: Send + Sync {
    fn embed_word(&self, word: &str) -> Result<Vec<f64>, ProviderError>;
}

/// Sentence-level embedding of a filled-in stem.
pub trait SentenceEmbedder: Send + Sync {
    fn embed_sentence(&self, sentence: &str) -> Result<Vec<f64>, ProviderError>;
}

/// POS tag lookup; `context` is the filled-in stem when available. Returns
/// `None` for words the tagger does not cover.
pub trait PosTagger: Send + Sync {
    fn tag(&self, word: &str, context: Option<&str>) -> Option<String>;
}

/// Fixed-table embedder; keys are lowercased. Serves both the word and
/// sentence interfaces so test fixtures stay in one file format.
#[derive(Debug, Clone, Deserialize)]
pub struct TableEmbedder {
    pub vectors: BTreeMap<String, Vec<f64>>,
}

impl TableEmbedder {
    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        load_json(path)
    }

    fn get(&self, key: &str) -> Result<Vec<f64>, ProviderError> {
        let v = self
            .vectors
            .get(&key.to_lowercase())
            .ok_or_else(|| ProviderError::UnknownWord(key.to_string()))?;
        if v.iter().all(|x| *x == 0.0) {
            return Err(ProviderError::ZeroVector(key.to_string()));
        }
        Ok(v.clone())
    }
}

impl WordEmbedder for TableEmbedder {
    fn embed_word(&self, word: &str) -> Result<Vec<f64>, ProviderError> {
        self.get(word)
    }
}

impl SentenceEmbedder for TableEmbedder {
    fn embed_sentence(&self, sentence: &str) -> Result<Vec<f64>, ProviderError> {
        self.get(sentence)
    }
}

/// Deterministic character-trigram hashing embedder. Covers any input
/// string, so it works as a sentence encoder over arbitrary filled stems.
#[derive(Debug, Clone)]
pub struct HashedEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl HashedEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim >= 1);
        HashedEmbedder { dim, seed }
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        let norm: String = text.to_lowercase();
        let chars: Vec<char> = norm.chars().collect();
        let mut v = vec![0.0; self.dim];
        if chars.len() < 3 {
            // degenerate short strings: hash the whole string once
            let h = fnv1a(norm.as_bytes(), self.seed);
            v[(h % self.dim as u64) as usize] += if h & 1 == 0 { 1.0 } else { -1.0 };
        } else {
            for w in chars.windows(3) {
                let tri: String = w.iter().collect();
                let h = fnv1a(tri.as_bytes(), self.seed);
                v[(h % self.dim as u64) as usize] += if h & 1 == 0 { 1.0 } else { -1.0 };
            }
        }
        if v.iter().all(|x| *x == 0.0) {
            return Err(ProviderError::ZeroVector(text.to_string()));
        }
        Ok(v)
    }
}

// FNV-1a, seeded; stable across platforms and releases.
fn fnv1a(bytes: &[u8], seed: u64) -> u64 {
    let mut h = 0xcbf29ce484222325u64 ^ seed;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

impl WordEmbedder for HashedEmbedder {
    fn embed_word(&self, word: &str) -> Result<Vec<f64>, ProviderError> {
        self.embed(word)
    }
}

impl SentenceEmbedder for HashedEmbedder {
    fn embed_sentence(&self, sentence: &str) -> Result<Vec<f64>, ProviderError> {
        self.embed(sentence)
    }
}

/// Lexicon-backed tagger: a flat word → tag map, case-insensitive, no
/// context use.
#[derive(Debug, Clone, Deserialize)]
pub struct LexiconTagger {
    pub tags: BTreeMap<String, String>,
}

impl LexiconTagger {
    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        load_json(path)
    }
}

impl PosTagger for LexiconTagger {
    fn tag(&self, word: &str, _context: Option<&str>) -> Option<String> {
        self.tags.get(&word.to_lowercase()).cloned()
    }
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ProviderError> {
    let text = std::fs::read_to_string(path).map_err(|e| ProviderError::Table {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| ProviderError::Table {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

/// Parses a provider spec string: `table:PATH` or `hashed:DIM:SEED`.
pub fn resolve_embedder(spec: &str) -> Result<Box<dyn SentenceEmbedder>, ProviderError> {
    match parse_spec(spec)? {
        Resolved::Table(t) => Ok(Box::new(t)),
        Resolved::Hashed(h) => Ok(Box::new(h)),
    }
}

pub fn resolve_word_embedder(spec: &str) -> Result<Box<dyn WordEmbedder>, ProviderError> {
    match parse_spec(spec)? {
        Resolved::Table(t) => Ok(Box::new(t)),
        Resolved::Hashed(h) => Ok(Box::new(h)),
    }
}

pub fn resolve_tagger(spec: &str) -> Result<Box<dyn PosTagger>, ProviderError> {
    let path = spec
        .strip_prefix("lexicon:")
        .ok_or_else(|| ProviderError::BadSpec(spec.to_string()))?;
    Ok(Box::new(LexiconTagger::load(Path::new(path))?))
}

enum Resolved {
    Table(TableEmbedder),
    Hashed(HashedEmbedder),
}

fn parse_spec(spec: &str) -> Result<Resolved, ProviderError> {
    if let Some(path) = spec.strip_prefix("table:") {
        return Ok(Resolved::Table(TableEmbedder::load(Path::new(path))?));
    }
    if let Some(rest) = spec.strip_prefix("hashed:") {
        let (dim, seed) = rest
            .split_once(':')
            .and_then(|(d, s)| Some((d.parse().ok()?, s.parse().ok()?)))
            .ok_or_else(|| ProviderError::BadSpec(spec.to_string()))?;
        return Ok(Resolved::Hashed(HashedEmbedder::new(dim, seed)));
    }
    Err(ProviderError::BadSpec(spec.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashed_embedder_is_deterministic() {
        let e = HashedEmbedder::new(16, 7);
        let a = e.embed("I like apples .").unwrap();
        let b = e.embed("I like apples .").unwrap();
        assert_eq!(a, b);
        let c = e.embed("I like bananas .").unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn table_embedder_unknown_word() {
        let t = TableEmbedder { vectors: BTreeMap::new() };
        assert!(matches!(
            t.embed_word("ghost"),
            Err(ProviderError::UnknownWord(_))
        ));
    }

    #[test]
    fn table_embedder_case_insensitive() {
        let mut vectors = BTreeMap::new();
        vectors.insert("apples".to_string(), vec![1.0, 0.0]);
        let t = TableEmbedder { vectors };
        assert_eq!(t.embed_word("Apples").unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn lexicon_tagger_lookup() {
        let mut tags = BTreeMap::new();
        tags.insert("run".to_string(), "VERB".to_string());
        let tagger = LexiconTagger { tags };
        assert_eq!(tagger.tag("Run", None).as_deref(), Some("VERB"));
        assert_eq!(tagger.tag("blue", None), None);
    }
}
