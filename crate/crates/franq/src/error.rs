//! Crate-wide error type.
//!
//! Every fallible operation in the crate returns [`Result`]. Variants are
//! named for the contract they enforce rather than for the module that raised
//! them, so callers can match on failure modes across pipeline stages.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // ---- data loading / validation ----
    /// A JSONL line failed to parse or declared an unsupported schema.
    #[error("malformed record on line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    /// A claim span references token indices outside the record's token list.
    #[error("claim {claim_id} in record {record_id} has a span outside the token range")]
    SpanOutOfRange { record_id: String, claim_id: String },
    /// Two records share an id.
    #[error("duplicate record id {0}")]
    DuplicateRecordId(String),
    /// Two claims share an id (claim ids must be unique across the dataset).
    #[error("duplicate claim id {0}")]
    DuplicateClaimId(String),
    /// A record violates a structural invariant not covered by a more
    /// specific variant (bad logprob sign, unsorted alternatives, ...).
    #[error("invalid record {record_id}: {reason}")]
    InvalidRecord { record_id: String, reason: String },
    /// Requested more training units than the dataset holds.
    #[error("train count {requested} exceeds available {available} {unit}")]
    TrainCountTooLarge {
        requested: usize,
        available: usize,
        unit: &'static str,
    },

    // ---- backends ----
    /// The HTTP backend stayed unreachable after the retry budget.
    #[error("backend unreachable: {0}")]
    BackendUnreachable(String),
    /// The backend answered but did not include token logprobs.
    #[error("backend response carried no token logprobs")]
    BackendNoLogprobs,
    /// The backend cannot rescore forced tokens (no echo+logprobs support).
    #[error("backend does not support forced-token rescoring: {0}")]
    BackendNoForcedDecoding(String),
    /// The alignment scorer endpoint is not configured or rejected the call.
    #[error("alignment scorer unavailable: {0}")]
    AlignmentUnavailable(String),
    /// Offline mode was requested and the replay cache has no entry for this
    /// request. Recomputation is refused so that offline runs stay exact.
    #[error("offline mode: no cached response for request {key}")]
    CacheMiss { key: String },
    /// The backend returned a response the client could not interpret.
    #[error("malformed backend response: {0}")]
    BadBackendResponse(String),

    // ---- prompts ----
    /// No template registered under this id.
    #[error("unknown prompt template {0:?}")]
    TemplateUnknown(String),
    /// A placeholder survived rendering.
    #[error("template placeholder {placeholder} left unbound in {template}")]
    UnboundPlaceholder {
        template: String,
        placeholder: String,
    },
    /// An LLM response did not match the format the prompt demanded.
    /// Responses are accepted whole or rejected whole; nothing is salvaged.
    #[error("unparseable response: {0}")]
    UnparseableResponse(String),
    /// Span matching found no usable words for any sentence of the claim.
    #[error("no span found for claim")]
    NoSpanFound,
    /// The P(True) verdict distribution contained neither a True nor a False
    /// token.
    #[error("no verdict token in next-token distribution")]
    NoVerdictToken,

    // ---- estimators ----
    /// The claim span is empty while the record has tokens.
    #[error("claim {0} has an empty span")]
    EmptySpan(String),
    /// The record has no generated tokens.
    #[error("record {0} has no tokens")]
    NoTokens(String),
    /// A span position carries no recorded alternatives, so token entropy is
    /// undefined there.
    #[error("record {record_id} token {index} has no logprob alternatives")]
    NoAlternatives { record_id: String, index: usize },
    /// Sample-diversity estimators need at least two answers in the pool.
    #[error("need at least {needed} samples, have {have}")]
    TooFewSamples { needed: usize, have: usize },
    /// A similarity row sums to zero, so the normalized Laplacian is
    /// undefined.
    #[error("similarity matrix row {0} has zero degree")]
    ZeroDegree(usize),
    /// Clustering produced an empty cluster (internal invariant).
    #[error("semantic clustering produced an empty cluster")]
    EmptyCluster,
    /// A requested external estimator has no ingested score for a claim.
    #[error("no external {estimator} score for claim {claim_id}")]
    MissingExternalScore {
        estimator: String,
        claim_id: String,
    },
    /// An estimator name is not recognized by the registry.
    #[error("unknown estimator {0:?}")]
    UnknownEstimator(String),
    /// External score ingestion needs a polarity for this estimator name.
    #[error("no polarity configured for external estimator {0:?}")]
    UnknownPolarity(String),

    // ---- faithfulness ----
    /// A record has no retrieved passages to align against.
    #[error("record {0} has no passages")]
    NoPassages(String),
    /// A claim is missing the faithfulness probability the operation needs.
    #[error("claim {0} has no faithfulness score")]
    MissingFaithfulness(String),

    // ---- calibration / franq ----
    /// Isotonic regression needs at least two training pairs.
    #[error("isotonic fit needs at least 2 pairs, got {0}")]
    InsufficientTrainingData(usize),
    /// A claim lacks a branch score required by the mixture.
    #[error("claim {claim_id} is missing a {estimator} branch score")]
    MissingBranchScore {
        claim_id: String,
        estimator: String,
    },

    // ---- metrics ----
    /// Scores and labels differ in length or are empty.
    #[error("evaluation input invalid: {0}")]
    BadEvalInput(String),
    /// PR-AUC requires at least one positive instance.
    #[error("no positive instances in evaluation input")]
    NoPositives,
    /// AUROC and PRR require both classes to be present.
    #[error("evaluation input contains a single class")]
    SingleClass,
    /// The PRR oracle and random baselines coincide, so the ratio is
    /// undefined.
    #[error("rejection oracle equals the random baseline; PRR undefined")]
    DegenerateOracle,
    /// ECE inputs must be probabilities in [0, 1].
    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    /// An unknown metric id was requested.
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),

    // ---- harness ----
    /// Corruption needs at least two records to swap passages between.
    #[error("corruption needs at least {needed} records, have {have}")]
    TooFewRecords { needed: usize, have: usize },
    /// No donor record with a fully disjoint passage list exists.
    #[error("no donor with disjoint passages found for record {0}")]
    NoDisjointDonor(String),
    /// A CSV score row failed to parse.
    #[error("malformed scores row {line}: {reason}")]
    MalformedScoreRow { line: usize, reason: String },
    /// A required file is missing or a path is not usable.
    #[error("bad path {path}: {reason}")]
    BadPath { path: String, reason: String },

    // ---- plumbing ----
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("http error: {0}")]
    Http(String),
}
