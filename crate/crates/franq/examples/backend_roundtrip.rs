//! Talk to an OpenAI-compatible completion endpoint through the replay
//! cache, then replay the same call offline with no network at all.
//!
//! Point `FRANQ_LLM_BASE_URL` at a live endpoint first, e.g.
//!
//! ```text
//! FRANQ_LLM_BASE_URL=http://localhost:8000/v1 cargo run --example backend_roundtrip
//! ```

use std::sync::Arc;

use franq::backends::{BackendConfig, DecodeParams, HttpLlmClient, ReplayCache};

fn main() -> franq::Result<()> {
    let mut config = BackendConfig::from_env();
    if config.base_url.is_empty() {
        println!("FRANQ_LLM_BASE_URL is not set; nothing to call.");
        println!("Set it to an OpenAI-compatible endpoint and re-run.");
        return Ok(());
    }

    let dir = tempfile::tempdir().expect("tempdir");
    let cache_path = dir.path().join("replay.jsonl");
    let prompt = "Question: What is the capital of France?\n\nAnswer (single line):";

    // Online pass: the response is served by the endpoint and recorded.
    let completion = {
        let cache = Arc::new(ReplayCache::open(&cache_path)?);
        let llm = HttpLlmClient::new(config.clone(), cache)?;
        let completion = llm.complete(prompt, &DecodeParams::default())?;
        println!("endpoint answered: {:?}", completion.text);
        println!("  {} tokens with logprobs", completion.tokens.len());
        completion
    };

    // Offline pass: same request, cache only. Any uncached request would
    // fail loudly instead of silently recomputing.
    config.offline = true;
    let cache = Arc::new(ReplayCache::open(&cache_path)?);
    let llm = HttpLlmClient::new(config, cache)?;
    let replayed = llm.complete(prompt, &DecodeParams::default())?;
    assert_eq!(replayed, completion);
    println!("offline replay from {} is identical", cache_path.display());

    match llm.complete("A prompt that was never recorded.", &DecodeParams::default()) {
        Err(e) => println!("uncached offline request correctly fails: {e}"),
        Ok(_) => unreachable!("offline cache miss must not succeed"),
    }
    Ok(())
}
