//! HTTP client behavior against a local wire-compatible server: caching,
//! offline replay, retry policy, forced-token rescoring, and alignment
//! scoring.

mod common;

use std::sync::Arc;

use franq::backends::{
    rescore_forced, BackendConfig, DecodeParams, HttpAlignClient, HttpLlmClient, ReplayCache,
};
use franq::Error;

use common::mock_llm::{Behavior, MockServer, ANSWER_TOKENS};

fn config_for(server: &MockServer) -> BackendConfig {
    BackendConfig {
        base_url: server.base_url.clone(),
        retry_base_delay_ms: 1,
        ..BackendConfig::default()
    }
}

fn llm_for(server: &MockServer, cache: &Arc<ReplayCache>) -> HttpLlmClient {
    HttpLlmClient::new(config_for(server), Arc::clone(cache)).expect("client")
}

#[test]
fn greedy_completion_parses_tokens_and_hits_cache_on_repeat() {
    let server = MockServer::start();
    let cache = Arc::new(ReplayCache::in_memory());
    let llm = llm_for(&server, &cache);
    let params = DecodeParams::default();

    let completion = llm.complete("Question: capital?\n\nAnswer (single line):", &params).unwrap();
    assert_eq!(completion.text, " Paris is the capital of France.");
    assert_eq!(completion.tokens.len(), ANSWER_TOKENS.len());
    for (token, want) in completion.tokens.iter().zip(ANSWER_TOKENS) {
        assert_eq!(token.text, want);
        assert!(token.logprob < 0.0 && token.logprob.is_finite());
        assert!(!token.alternatives.is_empty());
    }
    assert_eq!(server.hits(), 1);

    let replay = llm.complete("Question: capital?\n\nAnswer (single line):", &params).unwrap();
    assert_eq!(replay, completion);
    assert_eq!(server.hits(), 1, "second identical request must come from the cache");
}

#[test]
fn sampling_draws_n_choices_with_variation() {
    let server = MockServer::start();
    let cache = Arc::new(ReplayCache::in_memory());
    let llm = llm_for(&server, &cache);

    let choices = llm
        .complete_n("Question: capital?\n\nAnswer (single line):", &DecodeParams::sampling(1.0), 6)
        .unwrap();
    assert_eq!(choices.len(), 6);
    let texts: Vec<&str> = choices.iter().map(|c| c.text.as_str()).collect();
    assert!(texts.contains(&" Paris is the capital of France."));
    assert!(texts.contains(&" Lyon is the capital of France."), "pool has no variation: {texts:?}");
    assert_eq!(server.hits(), 1, "the whole pool is one request");
}

#[test]
fn persistent_cache_replays_across_reopen_without_network() {
    let dir = tempfile::tempdir().unwrap();
    let cache_path = dir.path().join("cache.jsonl");
    let params = DecodeParams::default();

    let recorded = {
        let server = MockServer::start();
        let cache = Arc::new(ReplayCache::open(&cache_path).unwrap());
        let llm = llm_for(&server, &cache);
        llm.complete("Question: anything?\n\nAnswer (single line):", &params).unwrap()
    };

    // No server this time: the reopened cache must answer, offline.
    let cache = Arc::new(ReplayCache::open(&cache_path).unwrap());
    assert!(!cache.is_empty());
    let offline = BackendConfig {
        offline: true,
        ..BackendConfig::default()
    };
    let llm = HttpLlmClient::new(offline, cache).unwrap();
    let replayed = llm.complete("Question: anything?\n\nAnswer (single line):", &params).unwrap();
    assert_eq!(replayed, recorded);
}

#[test]
fn offline_cold_cache_refuses_to_recompute() {
    let offline = BackendConfig {
        offline: true,
        ..BackendConfig::default()
    };
    let llm = HttpLlmClient::new(offline, Arc::new(ReplayCache::in_memory())).unwrap();
    let err = llm
        .complete("Question: anything?\n\nAnswer (single line):", &DecodeParams::default())
        .unwrap_err();
    assert!(matches!(err, Error::CacheMiss { .. }), "got {err}");
}

#[test]
fn transient_500s_are_retried_until_success() {
    let server = MockServer::with_behavior(Behavior {
        fail_first: 2,
        fail_status: 500,
    });
    let cache = Arc::new(ReplayCache::in_memory());
    let llm = llm_for(&server, &cache); // max_retries 3 covers 2 failures
    let completion = llm
        .complete("Question: retry?\n\nAnswer (single line):", &DecodeParams::default())
        .unwrap();
    assert_eq!(completion.tokens.len(), ANSWER_TOKENS.len());
    assert_eq!(server.hits(), 3, "two failures then one success");
}

#[test]
fn rate_limit_429_is_retried() {
    let server = MockServer::with_behavior(Behavior {
        fail_first: 1,
        fail_status: 429,
    });
    let cache = Arc::new(ReplayCache::in_memory());
    let llm = llm_for(&server, &cache);
    llm.complete("Question: limited?\n\nAnswer (single line):", &DecodeParams::default())
        .unwrap();
    assert_eq!(server.hits(), 2);
}

#[test]
fn retry_budget_exhaustion_reports_unreachable() {
    let server = MockServer::with_behavior(Behavior {
        fail_first: 100,
        fail_status: 503,
    });
    let mut config = config_for(&server);
    config.max_retries = 2;
    let llm = HttpLlmClient::new(config, Arc::new(ReplayCache::in_memory())).unwrap();
    let err = llm
        .complete("Question: down?\n\nAnswer (single line):", &DecodeParams::default())
        .unwrap_err();
    assert!(matches!(err, Error::BackendUnreachable(_)), "got {err}");
    assert_eq!(server.hits(), 3, "initial attempt plus two retries");
}

#[test]
fn non_transient_4xx_fails_without_retry() {
    let server = MockServer::with_behavior(Behavior {
        fail_first: 1,
        fail_status: 404,
    });
    let cache = Arc::new(ReplayCache::in_memory());
    let llm = llm_for(&server, &cache);
    let err = llm
        .complete("Question: missing?\n\nAnswer (single line):", &DecodeParams::default())
        .unwrap_err();
    assert!(matches!(err, Error::Http(_)), "got {err}");
    assert_eq!(server.hits(), 1, "client errors must not be retried");
}

#[test]
fn empty_base_url_is_unreachable_not_a_hang() {
    let llm = HttpLlmClient::new(BackendConfig::default(), Arc::new(ReplayCache::in_memory()))
        .unwrap();
    let err = llm
        .complete("Question: where?\n\nAnswer (single line):", &DecodeParams::default())
        .unwrap_err();
    assert!(matches!(err, Error::BackendUnreachable(_)), "got {err}");
}

#[test]
fn echo_rescoring_aligns_the_forced_tail() {
    let server = MockServer::start();
    let cache = Arc::new(ReplayCache::in_memory());
    let llm = llm_for(&server, &cache);

    let forced: Vec<String> = ANSWER_TOKENS.iter().map(|t| t.to_string()).collect();
    let logprobs = rescore_forced(&llm, "Question: capital?\n\nAnswer (single line):", &forced)
        .unwrap();
    assert_eq!(logprobs.len(), forced.len());
    assert!(logprobs.iter().all(|lp| lp.is_finite() && *lp < 0.0));

    // A tail the server cannot tokenize the same way is an error, not a guess.
    let other = vec![" Paris".to_string(), " rules".to_string()];
    let err = rescore_forced(&llm, "Question: capital?\n\nAnswer (single line):", &other)
        .unwrap_err();
    assert!(matches!(err, Error::BackendNoForcedDecoding(_)), "got {err}");
}

#[test]
fn next_token_distribution_exposes_verdict_logprobs() {
    let server = MockServer::start();
    let cache = Arc::new(ReplayCache::in_memory());
    let llm = llm_for(&server, &cache);

    let prompt = "Question: q\nProposed answer: a\nIs the proposed answer true? Answer 'True' or 'False'.\nAnswer:";
    let dist = llm.next_token_distribution(prompt).unwrap();
    let true_lp = dist.iter().find(|(t, _)| t == " True").map(|(_, lp)| *lp).unwrap();
    let false_lp = dist.iter().find(|(t, _)| t == " False").map(|(_, lp)| *lp).unwrap();
    let total = true_lp.exp() + false_lp.exp();
    assert!((total - 1.0).abs() < 1e-9, "verdict mass {total} should be ~1");
}

#[test]
fn align_scores_are_unit_interval_and_cached() {
    let server = MockServer::start();
    let cache = Arc::new(ReplayCache::in_memory());
    let align = HttpAlignClient::new(
        config_for(&server),
        server.base_url.clone(),
        Arc::clone(&cache),
    )
    .unwrap();

    let supported = align
        .score("the capital of France is Paris", "Paris is the capital of France")
        .unwrap();
    let unsupported = align.score("completely unrelated text", "quantum chromodynamics").unwrap();
    assert!((0.0..=1.0).contains(&supported));
    assert!((0.0..=1.0).contains(&unsupported));
    assert!(supported > unsupported);

    let hits_before = server.hits();
    let again = align
        .score("the capital of France is Paris", "Paris is the capital of France")
        .unwrap();
    assert_eq!(again, supported);
    assert_eq!(server.hits(), hits_before, "repeat alignment must replay from cache");
}
