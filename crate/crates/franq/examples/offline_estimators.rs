//! Score a record with every estimator that runs without any backend:
//! token-logprob baselines plus the sample-diversity family with lexical
//! similarity as the clustering signal.
//!
//! Run with: `cargo run --example offline_estimators`

use franq::data::{
    Claim, Dataset, GenerationRecord, Passage, SampleInfo, Split, TaskMode, TokenInfo,
    SCHEMA_VERSION,
};
use franq::harness::pipeline::{cmd_score, ScoreResources};

fn main() -> franq::Result<()> {
    // One short-form record: a greedy answer with per-token logprobs and
    // top-k alternatives, plus a pool of stochastic samples. Two of the five
    // samples disagree with the rest, so the diversity estimators light up.
    let tokens: Vec<TokenInfo> = [
        (" Mount", -0.08),
        (" Everest", -0.15),
        (" is", -0.03),
        (" the", -0.02),
        (" tallest", -0.40),
        (".", -0.05),
    ]
    .iter()
    .map(|&(text, logprob)| TokenInfo {
        text: text.to_string(),
        logprob,
        alternatives: vec![(text.to_string(), logprob), (" K2".to_string(), logprob - 1.6)],
    })
    .collect();

    let samples = [
        ("Mount Everest is the tallest.", -1.1, 6),
        ("Mount Everest is the tallest.", -1.3, 6),
        ("Mount Everest is the tallest mountain.", -1.8, 7),
        ("K2 stands above every other peak.", -3.0, 7),
        ("K2 stands above every other peak.", -3.2, 7),
    ]
    .iter()
    .map(|&(text, total_logprob, token_count)| SampleInfo {
        text: text.to_string(),
        total_logprob,
        token_count,
    })
    .collect();

    let record = GenerationRecord {
        record_id: "ex-0".to_string(),
        question: "Which mountain is the tallest?".to_string(),
        passages: vec![Passage {
            title: "mountains".to_string(),
            content: "Mount Everest is the tallest mountain on Earth.".to_string(),
            source_id: String::new(),
        }],
        answer_text: " Mount Everest is the tallest.".to_string(),
        tokens,
        samples,
        claims: vec![Claim {
            claim_id: "ex-0-c0".to_string(),
            text: "Mount Everest is the tallest.".to_string(),
            span: vec![0, 1, 2, 3, 4, 5],
            factuality_label: Default::default(),
            faithfulness_label: Default::default(),
            faithfulness_score: None,
        }],
        external_scores: Default::default(),
        gold_answer: None,
        split: Split::Unassigned,
        schema: SCHEMA_VERSION,
        original_passages: None,
    };

    let data = Dataset::new(vec![record], TaskMode::ShortForm)?;

    // Without an alignment backend the diversity estimators cluster samples
    // by lexical overlap instead of NLI entailment.
    let estimators: Vec<String> = [
        "msp",
        "claim_prob",
        "perplexity",
        "mean_token_entropy",
        "max_token_entropy",
        "lexsim",
        "degmat",
        "eigv",
        "semantic_entropy",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();

    let (_, table) = cmd_score(&data, &estimators, &ScoreResources::default())?;

    println!("{:<20} {:>12}  polarity", "estimator", "score");
    for name in table.estimator_names() {
        let score = table.require(&name, "ex-0-c0")?;
        println!("{:<20} {:>12.6}  {:?}", name, score, table.polarity(&name)?);
    }
    Ok(())
}
