//! Logprob-based estimators over the greedy answer tokens.
//!
//! All logarithms are natural. Claim-level quantities sum over the claim's
//! span indices in increasing order; sequence-level quantities sum over all
//! tokens, so a claim spanning every token reproduces the sequence value
//! exactly.

use crate::backends::{rescore_forced, LlmBackend};
use crate::data::{Claim, GenerationRecord, TaskMode};
use crate::error::{Error, Result};
use crate::prompts;

fn span_indices<'a>(record: &'a GenerationRecord, claim: Option<&'a Claim>) -> Result<Vec<usize>> {
    if record.tokens.is_empty() {
        return Err(Error::NoTokens(record.record_id.clone()));
    }
    match claim {
        Some(c) => {
            if c.span.is_empty() {
                return Err(Error::EmptySpan(c.claim_id.clone()));
            }
            Ok(c.span.clone())
        }
        None => Ok((0..record.tokens.len()).collect()),
    }
}

/// Claim negative log-likelihood: U(c) = -sum of the span tokens' logprobs.
pub fn claim_neg_logprob(record: &GenerationRecord, claim: &Claim) -> Result<f64> {
    let span = span_indices(record, Some(claim))?;
    Ok(span.iter().map(|&i| -record.tokens[i].logprob).sum())
}

/// Max Claim Probability: exp(-U(c)), the joint probability of the claim's
/// tokens under the generation distribution.
pub fn claim_probability(record: &GenerationRecord, claim: &Claim) -> Result<f64> {
    Ok((-claim_neg_logprob(record, claim)?).exp())
}

/// Sequence negative log-likelihood over all generated tokens.
pub fn sequence_neg_logprob(record: &GenerationRecord) -> Result<f64> {
    if record.tokens.is_empty() {
        return Err(Error::NoTokens(record.record_id.clone()));
    }
    Ok(record.tokens.iter().map(|t| -t.logprob).sum())
}

/// Max Sequence Probability: exp of the total sequence logprob.
pub fn max_sequence_probability(record: &GenerationRecord) -> Result<f64> {
    Ok((-sequence_neg_logprob(record)?).exp())
}

/// Perplexity over the claim span (or the whole sequence when `claim` is
/// `None`): exp of the mean negative logprob.
pub fn perplexity(record: &GenerationRecord, claim: Option<&Claim>) -> Result<f64> {
    let span = span_indices(record, claim)?;
    let mean: f64 =
        span.iter().map(|&i| -record.tokens[i].logprob).sum::<f64>() / span.len() as f64;
    Ok(mean.exp())
}

/// How the per-position entropies are aggregated over a span.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntropyAgg {
    Mean,
    Max,
}

/// Shannon entropy of the recorded alternatives at one position, after
/// renormalizing the top-k masses to sum to one. A deterministic position
/// (single alternative) has entropy 0.
fn position_entropy(record: &GenerationRecord, index: usize) -> Result<f64> {
    let alts = &record.tokens[index].alternatives;
    if alts.is_empty() {
        return Err(Error::NoAlternatives {
            record_id: record.record_id.clone(),
            index,
        });
    }
    let masses: Vec<f64> = alts.iter().map(|(_, lp)| lp.exp()).collect();
    let total: f64 = masses.iter().sum();
    Ok(masses
        .iter()
        .map(|&m| {
            let p = m / total;
            if p > 0.0 {
                -p * p.ln()
            } else {
                0.0
            }
        })
        .sum())
}

/// Token-entropy uncertainty over the claim span (or the whole sequence),
/// aggregated by mean or max.
pub fn token_entropy(
    record: &GenerationRecord,
    claim: Option<&Claim>,
    agg: EntropyAgg,
) -> Result<f64> {
    let span = span_indices(record, claim)?;
    let mut entropies = Vec::with_capacity(span.len());
    for &i in &span {
        entropies.push(position_entropy(record, i)?);
    }
    Ok(match agg {
        EntropyAgg::Mean => entropies.iter().sum::<f64>() / entropies.len() as f64,
        EntropyAgg::Max => entropies.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Rescore the answer tokens with the retrieval material removed from the
/// prompt: returns one logprob per answer token under the no-retrieval
/// context. One backend call per record; claims then slice into the result.
pub fn parametric_token_logprobs(
    backend: &dyn LlmBackend,
    record: &GenerationRecord,
    task_mode: TaskMode,
) -> Result<Vec<f64>> {
    if record.tokens.is_empty() {
        return Err(Error::NoTokens(record.record_id.clone()));
    }
    let prompt = prompts::render_generation(
        prompts::no_retrieval_template(task_mode),
        &record.question,
        &[],
    )?;
    let forced: Vec<String> = record.tokens.iter().map(|t| t.text.clone()).collect();
    rescore_forced(backend, &prompt, &forced)
}

/// Parametric knowledge p(c | x): the joint probability of the claim's
/// tokens under the retrieval-free context, from logprobs produced by
/// [`parametric_token_logprobs`].
pub fn parametric_knowledge_from_logprobs(logprobs: &[f64], claim: &Claim) -> Result<f64> {
    if claim.span.is_empty() {
        return Err(Error::EmptySpan(claim.claim_id.clone()));
    }
    let total: f64 = claim.span.iter().map(|&i| logprobs[i]).sum();
    Ok(total.exp())
}

/// Convenience wrapper: rescore and evaluate one claim.
pub fn parametric_knowledge(
    backend: &dyn LlmBackend,
    record: &GenerationRecord,
    claim: &Claim,
    task_mode: TaskMode,
) -> Result<f64> {
    let logprobs = parametric_token_logprobs(backend, record, task_mode)?;
    parametric_knowledge_from_logprobs(&logprobs, claim)
}
