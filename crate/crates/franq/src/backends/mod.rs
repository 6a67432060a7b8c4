//! Pluggable LLM and alignment-scorer backends.
//!
//! The pipeline talks to two services: an OpenAI-compatible LLM (generation,
//! sampling, forced-token rescoring, next-token distributions) and an
//! alignment scorer (faithfulness probabilities). Both are abstracted behind
//! small traits so tests and downstream users can substitute local mocks or
//! precomputed stores, and both share the append-only [`ReplayCache`]: warm
//! caches replay runs byte-for-byte, and offline mode turns any cache miss
//! into a loud error instead of a silent recomputation.
//!
//! Configuration comes from the environment by default:
//! `FRANQ_LLM_BASE_URL`, `FRANQ_LLM_API_KEY` and `FRANQ_ALIGN_BASE_URL`.

mod cache;
mod http;

pub use cache::ReplayCache;
pub use http::{HttpAlignClient, HttpLlmClient};

use serde::{Deserialize, Serialize};

use crate::data::{Passage, SampleInfo, TokenInfo};
use crate::error::{Error, Result};
use crate::prompts;

/// Environment variable holding the LLM service root URL.
pub const ENV_LLM_BASE_URL: &str = "FRANQ_LLM_BASE_URL";
/// Environment variable holding the LLM API key (optional).
pub const ENV_LLM_API_KEY: &str = "FRANQ_LLM_API_KEY";
/// Environment variable holding the alignment scorer root URL.
pub const ENV_ALIGN_BASE_URL: &str = "FRANQ_ALIGN_BASE_URL";

/// Decoding regime for a generation request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    /// Temperature 0; used for the answer that gets scored.
    Greedy,
    /// Temperature sampling; used for the diversity pool.
    Sample,
}

/// Decoding parameters shared by generation and sampling calls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub mode: DecodeMode,
    /// Sampling temperature; ignored in greedy mode.
    pub temperature: f64,
    pub max_tokens: usize,
    /// How many alternatives to record per emitted token.
    pub top_logprobs: usize,
}

impl Default for DecodeParams {
    fn default() -> Self {
        DecodeParams {
            mode: DecodeMode::Greedy,
            temperature: 1.0,
            max_tokens: 512,
            top_logprobs: 20,
        }
    }
}

impl DecodeParams {
    /// Sampling variant of the defaults.
    pub fn sampling(temperature: f64) -> Self {
        DecodeParams {
            mode: DecodeMode::Sample,
            temperature,
            ..DecodeParams::default()
        }
    }
}

/// One decoded choice: the answer text (concatenation of token surfaces) and
/// the per-token logprobs with alternatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub tokens: Vec<TokenInfo>,
}

/// Shared backend configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    /// LLM service root, e.g. `http://localhost:8000`.
    pub base_url: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub api_key: Option<String>,
    /// Model identifier sent with every request.
    pub model: String,
    /// Refuse network access; every request must hit the replay cache.
    pub offline: bool,
    /// Transient-failure retries after the initial attempt.
    pub max_retries: u32,
    /// First backoff delay; doubles per retry.
    pub retry_base_delay_ms: u64,
    /// Upper bound on concurrent in-flight requests in batch helpers.
    pub concurrency: usize,
    pub timeout_secs: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            base_url: String::new(),
            api_key: None,
            model: "default".into(),
            offline: false,
            max_retries: 3,
            retry_base_delay_ms: 1000,
            concurrency: 8,
            timeout_secs: 120,
        }
    }
}

impl BackendConfig {
    /// Read the LLM connection settings from the environment.
    pub fn from_env() -> Self {
        BackendConfig {
            base_url: std::env::var(ENV_LLM_BASE_URL).unwrap_or_default(),
            api_key: std::env::var(ENV_LLM_API_KEY).ok(),
            ..BackendConfig::default()
        }
    }
}

/// Alignment service root from the environment.
pub fn align_base_url_from_env() -> String {
    std::env::var(ENV_ALIGN_BASE_URL).unwrap_or_default()
}

/// Low-level LLM operations. Implemented by [`HttpLlmClient`]; tests and
/// embedders can provide their own.
pub trait LlmBackend: Send + Sync {
    /// One decoding request with `n` choices.
    fn complete_n(&self, prompt: &str, params: &DecodeParams, n: usize) -> Result<Vec<Completion>>;

    /// Per-token logprobs of `text` under the model (echo scoring). Entries
    /// without a logprob are `None`.
    fn echo_logprobs(&self, text: &str) -> Result<Vec<(String, Option<f64>)>>;

    /// Top-k distribution over the next token.
    fn next_token_distribution(&self, prompt: &str) -> Result<Vec<(String, f64)>>;

    fn complete(&self, prompt: &str, params: &DecodeParams) -> Result<Completion> {
        Ok(self.complete_n(prompt, params, 1)?.remove(0))
    }
}

impl LlmBackend for HttpLlmClient {
    fn complete_n(&self, prompt: &str, params: &DecodeParams, n: usize) -> Result<Vec<Completion>> {
        HttpLlmClient::complete_n(self, prompt, params, n)
    }

    fn echo_logprobs(&self, text: &str) -> Result<Vec<(String, Option<f64>)>> {
        HttpLlmClient::echo_logprobs(self, text)
    }

    fn next_token_distribution(&self, prompt: &str) -> Result<Vec<(String, f64)>> {
        HttpLlmClient::next_token_distribution(self, prompt)
    }
}

/// Alignment scoring operations. Implemented by [`HttpAlignClient`].
pub trait AlignBackend: Send + Sync {
    /// Alignment probability that `claim` is supported by `context`, in
    /// [0, 1].
    fn score(&self, context: &str, claim: &str) -> Result<f64>;
}

impl AlignBackend for HttpAlignClient {
    fn score(&self, context: &str, claim: &str) -> Result<f64> {
        HttpAlignClient::score(self, context, claim)
    }
}

/// Greedy-decode an answer to `question` conditioned on `passages`, using
/// the named generation template. Returns the answer text (concatenation of
/// the token surfaces) and the scored tokens.
pub fn generate_answer(
    backend: &dyn LlmBackend,
    question: &str,
    passages: &[Passage],
    template: prompts::TemplateId,
    params: &DecodeParams,
) -> Result<(String, Vec<TokenInfo>)> {
    let prompt = prompts::render_generation(template, question, passages)?;
    let completion = backend.complete(&prompt, params)?;
    if completion.tokens.is_empty() {
        return Err(Error::BackendNoLogprobs);
    }
    Ok((completion.text, completion.tokens))
}

/// Draw `m` sampled answers for the diversity pool. Issued as a single
/// `n = m` request so a warm cache replays the whole pool at once.
pub fn sample_answers(
    backend: &dyn LlmBackend,
    question: &str,
    passages: &[Passage],
    template: prompts::TemplateId,
    params: &DecodeParams,
    m: usize,
) -> Result<Vec<SampleInfo>> {
    if m == 0 {
        return Ok(Vec::new());
    }
    let prompt = prompts::render_generation(template, question, passages)?;
    let completions = backend.complete_n(&prompt, params, m)?;
    completions
        .into_iter()
        .map(|c| {
            if c.tokens.is_empty() {
                return Err(Error::BackendNoLogprobs);
            }
            Ok(SampleInfo {
                total_logprob: c.tokens.iter().map(|t| t.logprob).sum(),
                token_count: c.tokens.len(),
                text: c.text,
            })
        })
        .collect()
}

/// Score an exact token sequence under the model: the logprob of each forced
/// token given `prompt` and the preceding forced tokens. The trailing tokens
/// of the echo response must reproduce the forced surfaces exactly;
/// tokenization drift is an error, not an approximation.
pub fn rescore_forced(
    backend: &dyn LlmBackend,
    prompt: &str,
    forced_tokens: &[String],
) -> Result<Vec<f64>> {
    if forced_tokens.is_empty() {
        return Ok(Vec::new());
    }
    let full_text: String = format!("{prompt}{}", forced_tokens.concat());
    let echoed = backend.echo_logprobs(&full_text)?;
    if echoed.len() < forced_tokens.len() {
        return Err(Error::BackendNoForcedDecoding(format!(
            "echo returned {} tokens for {} forced tokens",
            echoed.len(),
            forced_tokens.len()
        )));
    }
    let tail = &echoed[echoed.len() - forced_tokens.len()..];
    let mut logprobs = Vec::with_capacity(forced_tokens.len());
    for ((text, lp), want) in tail.iter().zip(forced_tokens) {
        if text != want {
            return Err(Error::BackendNoForcedDecoding(format!(
                "echo token {text:?} does not match forced token {want:?}"
            )));
        }
        match lp {
            Some(lp) => logprobs.push(*lp),
            None => {
                return Err(Error::BackendNoForcedDecoding(format!(
                    "no logprob for forced token {want:?}"
                )))
            }
        }
    }
    Ok(logprobs)
}

/// Alignment probability for a (context, claim) pair.
pub fn score_alignment(backend: &dyn AlignBackend, context: &str, claim: &str) -> Result<f64> {
    backend.score(context, claim)
}

/// Apply `f` to every item with at most `limit` concurrent invocations,
/// preserving input order in the results.
pub fn map_concurrent<T, R, F>(items: &[T], limit: usize, f: F) -> Vec<Result<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync,
{
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Mutex;

    let limit = limit.max(1).min(items.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Vec<Mutex<Option<Result<R>>>> =
        items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..limit {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= items.len() {
                    break;
                }
                let out = f(&items[idx]);
                *results[idx].lock().unwrap() = Some(out);
            });
        }
    });
    results
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("worker filled every slot"))
        .collect()
}
