//! HTTP backend clients.
//!
//! [`HttpLlmClient`] speaks the OpenAI-compatible surface: POST
//! `/v1/chat/completions` with `logprobs`/`top_logprobs` for generation and
//! next-token distributions, and POST `/v1/completions` with `echo` for
//! forced-token rescoring. [`HttpAlignClient`] speaks a minimal alignment
//! scorer protocol: POST `/score` with `{context, claim}` returning
//! `{score}`.
//!
//! All requests funnel through the replay cache. In offline mode a cache
//! miss is a hard error ([`crate::Error::CacheMiss`]) rather than a silent
//! recomputation, so replayed runs are exact or they fail.

use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};

use super::cache::ReplayCache;
use super::{BackendConfig, Completion, DecodeMode, DecodeParams};
use crate::data::TokenInfo;
use crate::error::{Error, Result};

/// Issue a request through the cache, retrying transient failures with
/// exponential backoff. Requests here are idempotent by construction (fixed
/// bodies, content-addressed), so retrying is safe.
fn cached_post(
    http: &reqwest::blocking::Client,
    config: &BackendConfig,
    cache: &ReplayCache,
    base_url: &str,
    endpoint: &str,
    body: &Value,
) -> Result<Value> {
    let key = ReplayCache::request_key(endpoint, body);
    if let Some(hit) = cache.get(&key) {
        return Ok(hit);
    }
    if config.offline {
        return Err(Error::CacheMiss { key });
    }
    if base_url.is_empty() {
        return Err(Error::BackendUnreachable(format!(
            "no base URL configured for {endpoint}"
        )));
    }
    let url = format!("{}{}", base_url.trim_end_matches('/'), endpoint);
    let mut delay = Duration::from_millis(config.retry_base_delay_ms);
    let mut last_err = String::new();
    for attempt in 0..=config.max_retries {
        if attempt > 0 {
            std::thread::sleep(delay);
            delay *= 2;
        }
        let mut req = http.post(&url).json(body);
        if let Some(api_key) = &config.api_key {
            req = req.bearer_auth(api_key);
        }
        match req.send() {
            Ok(resp) => {
                let status = resp.status();
                if status.is_success() {
                    let value: Value = resp
                        .json()
                        .map_err(|e| Error::BadBackendResponse(e.to_string()))?;
                    cache.put(&key, &value)?;
                    return Ok(value);
                }
                let transient = status.is_server_error() || status.as_u16() == 429;
                let text = resp.text().unwrap_or_default();
                last_err = format!("{endpoint} returned {status}: {text}");
                if !transient {
                    return Err(Error::Http(last_err));
                }
            }
            Err(e) => last_err = format!("{endpoint}: {e}"),
        }
    }
    Err(Error::BackendUnreachable(last_err))
}

fn build_http(config: &BackendConfig) -> Result<reqwest::blocking::Client> {
    reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(config.timeout_secs))
        .build()
        .map_err(|e| Error::Http(e.to_string()))
}

/// OpenAI-compatible chat/completions client with record/replay caching.
pub struct HttpLlmClient {
    config: BackendConfig,
    cache: Arc<ReplayCache>,
    http: reqwest::blocking::Client,
}

impl HttpLlmClient {
    pub fn new(config: BackendConfig, cache: Arc<ReplayCache>) -> Result<Self> {
        let http = build_http(&config)?;
        Ok(HttpLlmClient {
            config,
            cache,
            http,
        })
    }

    pub fn cache(&self) -> &ReplayCache {
        &self.cache
    }

    fn chat_body(&self, prompt: &str, params: &DecodeParams, n: usize) -> Value {
        let temperature = match params.mode {
            DecodeMode::Greedy => 0.0,
            DecodeMode::Sample => params.temperature,
        };
        json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "max_tokens": params.max_tokens,
            "temperature": temperature,
            "logprobs": true,
            "top_logprobs": params.top_logprobs,
            "n": n,
        })
    }

    fn parse_choice(choice: &Value) -> Result<Completion> {
        let content_tokens = choice
            .pointer("/logprobs/content")
            .and_then(Value::as_array)
            .ok_or(Error::BackendNoLogprobs)?;
        let mut tokens = Vec::with_capacity(content_tokens.len());
        for tok in content_tokens {
            let text = tok
                .get("token")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::BadBackendResponse("token without text".into()))?;
            let logprob = tok
                .get("logprob")
                .and_then(Value::as_f64)
                .ok_or(Error::BackendNoLogprobs)?;
            let mut alternatives: Vec<(String, f64)> = tok
                .get("top_logprobs")
                .and_then(Value::as_array)
                .map(|alts| {
                    alts.iter()
                        .filter_map(|a| {
                            Some((
                                a.get("token")?.as_str()?.to_string(),
                                a.get("logprob")?.as_f64()?,
                            ))
                        })
                        .collect()
                })
                .unwrap_or_default();
            alternatives.sort_by(|a, b| b.1.total_cmp(&a.1));
            tokens.push(TokenInfo {
                text: text.to_string(),
                logprob,
                alternatives,
            });
        }
        // The answer text is defined as the concatenation of token surfaces,
        // which keeps spans and rescoring aligned with what was scored.
        let text = tokens.iter().map(|t| t.text.as_str()).collect::<String>();
        Ok(Completion { text, tokens })
    }

    /// Run one decoding request with `n` choices and parse each choice's
    /// tokens and logprobs.
    pub fn complete_n(
        &self,
        prompt: &str,
        params: &DecodeParams,
        n: usize,
    ) -> Result<Vec<Completion>> {
        let body = self.chat_body(prompt, params, n);
        let resp = cached_post(
            &self.http,
            &self.config,
            &self.cache,
            &self.config.base_url,
            "/v1/chat/completions",
            &body,
        )?;
        let choices = resp
            .get("choices")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::BadBackendResponse("missing choices".into()))?;
        if choices.len() < n {
            return Err(Error::BadBackendResponse(format!(
                "asked for {n} choices, got {}",
                choices.len()
            )));
        }
        choices.iter().take(n).map(Self::parse_choice).collect()
    }

    /// Single-choice decoding.
    pub fn complete(&self, prompt: &str, params: &DecodeParams) -> Result<Completion> {
        Ok(self.complete_n(prompt, params, 1)?.remove(0))
    }

    /// Per-token logprobs of `text` under the model, via the plain
    /// completions endpoint with `echo`. Entries without a logprob (the
    /// first token of the context, typically) are `None`.
    pub fn echo_logprobs(&self, text: &str) -> Result<Vec<(String, Option<f64>)>> {
        let body = json!({
            "model": self.config.model,
            "prompt": text,
            "max_tokens": 0,
            "echo": true,
            "logprobs": 0,
        });
        let resp = cached_post(
            &self.http,
            &self.config,
            &self.cache,
            &self.config.base_url,
            "/v1/completions",
            &body,
        )
        .map_err(|e| match e {
            Error::Http(msg) => Error::BackendNoForcedDecoding(msg),
            other => other,
        })?;
        let logprobs = resp
            .pointer("/choices/0/logprobs")
            .ok_or_else(|| Error::BackendNoForcedDecoding("response has no logprobs".into()))?;
        let tokens = logprobs
            .get("tokens")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::BackendNoForcedDecoding("response has no tokens".into()))?;
        let values = logprobs
            .get("token_logprobs")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::BackendNoForcedDecoding("response has no token_logprobs".into()))?;
        if tokens.len() != values.len() {
            return Err(Error::BadBackendResponse(
                "tokens and token_logprobs length mismatch".into(),
            ));
        }
        Ok(tokens
            .iter()
            .zip(values)
            .map(|(t, v)| (t.as_str().unwrap_or_default().to_string(), v.as_f64()))
            .collect())
    }

    /// Top-k distribution over the next token after `prompt`.
    pub fn next_token_distribution(&self, prompt: &str) -> Result<Vec<(String, f64)>> {
        let params = DecodeParams {
            max_tokens: 1,
            ..DecodeParams::default()
        };
        let completion = self.complete(prompt, &params)?;
        let first = completion
            .tokens
            .first()
            .ok_or_else(|| Error::BadBackendResponse("empty next-token response".into()))?;
        if first.alternatives.is_empty() {
            return Err(Error::BackendNoLogprobs);
        }
        Ok(first.alternatives.clone())
    }
}

/// Alignment scorer client: POST `{base}/score` with `{context, claim}`,
/// expecting `{score}` in [0, 1].
pub struct HttpAlignClient {
    config: BackendConfig,
    base_url: String,
    cache: Arc<ReplayCache>,
    http: reqwest::blocking::Client,
}

impl HttpAlignClient {
    /// `base_url` is the alignment service root (`FRANQ_ALIGN_BASE_URL`),
    /// kept separate from the LLM base URL in the shared config.
    pub fn new(config: BackendConfig, base_url: String, cache: Arc<ReplayCache>) -> Result<Self> {
        let http = build_http(&config)?;
        Ok(HttpAlignClient {
            config,
            base_url,
            cache,
            http,
        })
    }

    pub fn score(&self, context: &str, claim: &str) -> Result<f64> {
        let body = json!({"context": context, "claim": claim});
        let resp = cached_post(
            &self.http,
            &self.config,
            &self.cache,
            &self.base_url,
            "/score",
            &body,
        )
        .map_err(|e| match e {
            Error::BackendUnreachable(msg) | Error::Http(msg) => Error::AlignmentUnavailable(msg),
            other => other,
        })?;
        let score = resp
            .get("score")
            .and_then(Value::as_f64)
            .ok_or_else(|| Error::BadBackendResponse("alignment response missing score".into()))?;
        if !score.is_finite() || !(-1e-9..=1.0 + 1e-9).contains(&score) {
            return Err(Error::BadBackendResponse(format!(
                "alignment score {score} outside [0, 1]"
            )));
        }
        Ok(score.clamp(0.0, 1.0))
    }
}
