//! Cloze distractor generation and evaluation toolkit.
//!
//! A two-stage pipeline over cloze questions: a masked-LM candidate
//! generator produces k distractor candidates with confidences, and a
//! feature-based selector re-ranks them (confidence, word similarity,
//! filled-stem similarity, POS match) and picks the top 3. A metrics module
//! scores rankings against gold distractor sets with P@1, F1@3, F1@10,
//! MRR@10 and NDCG@10.
//!
//! The `clozegen` binary exposes the stages as `prepare`, `generate`,
//! `rank`, `evaluate`, `ablate` and `report` subcommands over JSONL
//! artifacts.

pub mod backend;
pub mod candidates;
pub mod corpus;
pub mod metrics;
pub mod pipeline;
pub mod providers;
pub mod selector;
