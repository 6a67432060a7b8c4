//! Faithfulness-conditioned uncertainty quantification for retrieval-augmented
//! generation (RAG).
//!
//! The crate detects factual errors in RAG outputs by decomposing the
//! probability that a generated claim is true into a faithfulness-weighted
//! mixture of two branches:
//!
//! ```text
//! P(c true) = P(faithful) * P(true | faithful) + (1 - P(faithful)) * P(true | unfaithful)
//! ```
//!
//! Faithful claims (those grounded in the retrieved passages) are scored with
//! an uncertainty estimator that reflects trust in the retrieval-conditioned
//! generation; unfaithful claims fall back to an estimator of the model's
//! parametric knowledge. Each branch is mapped to a probability of truth by
//! isotonic calibration fitted on a labeled training split, optionally
//! conditioned on the faithfulness partition itself.
//!
//! Module map:
//!
//! - [`data`]: record/claim types, JSONL loading and validation, dataset splits
//! - [`backends`]: OpenAI-compatible LLM client, alignment scorer client,
//!   content-addressed record/replay cache, offline mode
//! - [`prompts`]: prompt templates and strict response parsers for generation,
//!   claim decomposition, span matching, annotation, judging and P(True)
//! - [`estimators`]: claim- and sequence-level uncertainty baselines
//!   (logprob-based, sample-diversity, spectral, semantic entropy, P(True),
//!   external score ingestion)
//! - [`faithfulness`]: alignment-pair construction and faithfulness
//!   probabilities
//! - [`calibration`]: score orientation and isotonic (PAVA) calibration
//! - [`franq`]: the faithfulness-conditioned mixture model itself
//! - [`metrics`]: PR-AUC, AUROC, PRR, ECE and bootstrap standard errors
//! - [`harness`]: dataset generation, retrieval corruption, evaluation runs,
//!   report and manifest emission

pub mod backends;
pub mod calibration;
pub mod data;
pub mod error;
pub mod estimators;
pub mod faithfulness;
pub mod franq;
pub mod harness;
pub mod metrics;
pub mod prompts;

pub use error::{Error, Result};
