//! Faithfulness probabilities: is a claim grounded in the retrieved passages?
//!
//! Faithfulness is estimated with an alignment scorer over (context, claim)
//! pairs. The context is always the concatenated retrieved passages. In
//! long-form mode the claim side is the claim text itself; in short-form
//! mode the whole answer is the single claim and the question is prepended so
//! the scorer sees what the answer was responding to.
//!
//! The raw alignment probability is used directly as P(faithful) by default;
//! thresholded binarization (strictly above `threshold`) is available as a
//! variant, which trades granularity for a hard routing decision between the
//! two mixture branches.

use serde::{Deserialize, Serialize};

use crate::backends::AlignBackend;
use crate::data::{Claim, Dataset, GenerationRecord, TaskMode};
use crate::error::{Error, Result};

/// Default faithfulness threshold for binarization and partitioning.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Settings for faithfulness estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaithfulnessConfig {
    /// Threshold for the binarized variant and for the faithful/unfaithful
    /// partition; claims with probability strictly above it count as
    /// faithful.
    pub threshold: f64,
    /// Replace the probability with its thresholded 0/1 version.
    pub use_binary: bool,
}

impl Default for FaithfulnessConfig {
    fn default() -> Self {
        FaithfulnessConfig {
            threshold: DEFAULT_THRESHOLD,
            use_binary: false,
        }
    }
}

/// Concatenate a record's passages into the alignment context: passages are
/// separated by blank lines and rendered as "Title: ...\nContent: ..." (the
/// title line is dropped for untitled passages), mirroring how the passages
/// appeared in the generation prompt.
pub fn passage_context(record: &GenerationRecord) -> Result<String> {
    if record.passages.is_empty() {
        return Err(Error::NoPassages(record.record_id.clone()));
    }
    let blocks: Vec<String> = record
        .passages
        .iter()
        .map(|p| {
            if p.title.is_empty() {
                format!("Content: {}", p.content)
            } else {
                format!("Title: {}\nContent: {}", p.title, p.content)
            }
        })
        .collect();
    Ok(blocks.join("\n\n"))
}

/// Build the (context, claim_text) pair the alignment scorer is asked about.
pub fn build_alignment_pair(
    record: &GenerationRecord,
    claim: &Claim,
    task_mode: TaskMode,
) -> Result<(String, String)> {
    let context = passage_context(record)?;
    let claim_text = match task_mode {
        TaskMode::LongForm => claim.text.clone(),
        TaskMode::ShortForm => format!("{} {}", record.question, record.answer_text.trim()),
    };
    Ok((context, claim_text))
}

/// P(faithful) for one claim. A stored `faithfulness_score` is reused as-is;
/// otherwise the alignment backend is consulted. With neither available the
/// probability is undefined and this errors rather than guessing.
pub fn faithfulness_probability(
    record: &GenerationRecord,
    claim: &Claim,
    task_mode: TaskMode,
    backend: Option<&dyn AlignBackend>,
) -> Result<f64> {
    if let Some(score) = claim.faithfulness_score {
        return Ok(score);
    }
    let backend = backend.ok_or_else(|| {
        Error::AlignmentUnavailable(format!(
            "claim {} has no stored faithfulness score and no scorer is configured",
            claim.claim_id
        ))
    })?;
    let (context, claim_text) = build_alignment_pair(record, claim, task_mode)?;
    backend.score(&context, &claim_text)
}

/// Thresholded faithfulness: 1.0 strictly above the threshold, else 0.0.
/// A probability exactly at the threshold counts as unfaithful.
pub fn binarize(probability: f64, threshold: f64) -> f64 {
    if probability > threshold {
        1.0
    } else {
        0.0
    }
}

/// Return a copy of the dataset with `faithfulness_score` filled in for every
/// claim that does not already carry one.
pub fn annotate_faithfulness(data: &Dataset, backend: &dyn AlignBackend) -> Result<Dataset> {
    let mut out = data.clone();
    for record in &mut out.records {
        let context = if record.claims.iter().any(|c| c.faithfulness_score.is_none()) {
            Some(passage_context(record)?)
        } else {
            None
        };
        let question = record.question.clone();
        let answer = record.answer_text.trim().to_string();
        for claim in &mut record.claims {
            if claim.faithfulness_score.is_some() {
                continue;
            }
            let claim_text = match data.task_mode {
                TaskMode::LongForm => claim.text.clone(),
                TaskMode::ShortForm => format!("{question} {answer}"),
            };
            let score = backend.score(context.as_deref().unwrap(), &claim_text)?;
            claim.faithfulness_score = Some(score);
        }
    }
    Ok(out)
}
