//! P(True): self-assessed claim confidence from the model's next-token
//! distribution over a True/False verdict prompt.

use crate::backends::LlmBackend;
use crate::error::{Error, Result};
use crate::prompts;

/// True if this token surface, stripped of surrounding whitespace, spells
/// the verdict word in any casing. Covers the usual tokenizer variants
/// (`True`, ` True`, `TRUE`, ...).
fn is_verdict_token(token: &str, word: &str) -> bool {
    token.trim().eq_ignore_ascii_case(word)
}

/// Renormalized probability of "True" among the True/False verdict tokens in
/// a next-token distribution. Masses of all casing/whitespace variants are
/// pooled per verdict; if neither verdict appears in the alternatives this
/// fails with [`Error::NoVerdictToken`].
pub fn verdict_probability(distribution: &[(String, f64)]) -> Result<f64> {
    let mut true_mass = 0.0;
    let mut false_mass = 0.0;
    for (token, logprob) in distribution {
        if is_verdict_token(token, "true") {
            true_mass += logprob.exp();
        } else if is_verdict_token(token, "false") {
            false_mass += logprob.exp();
        }
    }
    let total = true_mass + false_mass;
    if total <= 0.0 {
        return Err(Error::NoVerdictToken);
    }
    Ok(true_mass / total)
}

/// P(True) for a claim: build the verdict prompt, read the next-token
/// distribution, and renormalize the True/False masses.
pub fn p_true(backend: &dyn LlmBackend, question: &str, claim_text: &str) -> Result<f64> {
    let prompt = prompts::render_ptrue(question, claim_text)?;
    let distribution = backend.next_token_distribution(&prompt)?;
    verdict_probability(&distribution)
}
