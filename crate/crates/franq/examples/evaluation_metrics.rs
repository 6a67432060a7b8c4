//! Error-detection metrics: PR-AUC, AUROC, the prediction-rejection ratio,
//! and expected calibration error, with bootstrap standard errors and the
//! grouped report renderer.
//!
//! Run with: `cargo run --example evaluation_metrics`

use franq::data::{
    Claim, Dataset, FactualityLabel, GenerationRecord, Passage, Split, TaskMode, TokenInfo,
    SCHEMA_VERSION,
};
use franq::estimators::ScoreTable;
use franq::harness::report::{evaluate_methods, EvalParams};
use franq::metrics::{bootstrap_stderr, Metric, MetricParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn main() -> franq::Result<()> {
    // --- Direct metric calls ---
    // Detection convention: higher score = more likely to be a factual
    // error, label 1 = the claim IS an error.
    let scores = vec![0.9, 0.8, 0.7, 0.6, 0.4, 0.35, 0.2, 0.1];
    let labels = vec![1, 1, 0, 1, 0, 0, 0, 0];
    let params = MetricParams::default();
    for metric in [Metric::PrAuc, Metric::Auroc, Metric::Prr] {
        let value = metric.compute(&scores, &labels, &params)?;
        let stderr = bootstrap_stderr(metric, &scores, &labels, &params, 500, 11)?;
        println!("{:<8} {value:.3} +/- {stderr:.3}", metric.id());
    }
    // ECE runs on probabilities of truth against truth labels.
    let probs = vec![0.95, 0.9, 0.2, 0.85, 0.3, 0.25, 0.1, 0.05];
    let truth = vec![1, 1, 0, 1, 0, 1, 0, 0];
    println!("ece      {:.3}", Metric::Ece.compute(&probs, &truth, &params)?);

    // --- The grouped report over a dataset ---
    // Two methods score every labeled claim; `evaluate_methods` turns them
    // into detection inputs by polarity and renders a sectioned table.
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let mut records = Vec::new();
    let mut table = ScoreTable::new();
    for i in 0..120 {
        let truthful = rng.gen_bool(0.6);
        let good: f64 = (if truthful { 0.75 } else { 0.25 }) + rng.gen_range(-0.2..=0.2);
        let noisy: f64 = rng.gen_range(0.0..=1.0);
        let record = GenerationRecord {
            record_id: format!("m-{i}"),
            question: format!("q {i}"),
            passages: vec![Passage {
                title: String::new(),
                content: "ctx".into(),
                source_id: String::new(),
            }],
            answer_text: " a".into(),
            tokens: vec![TokenInfo {
                text: " a".into(),
                logprob: -0.2,
                alternatives: vec![],
            }],
            samples: vec![],
            claims: vec![Claim {
                claim_id: format!("m-{i}-c0"),
                text: "claim".into(),
                span: vec![0],
                factuality_label: if truthful {
                    FactualityLabel::True
                } else {
                    FactualityLabel::False
                },
                faithfulness_label: Default::default(),
                faithfulness_score: None,
            }],
            external_scores: Default::default(),
            gold_answer: None,
            split: Split::Unassigned,
            schema: SCHEMA_VERSION,
            original_passages: None,
        };
        table.insert("msp", &record.record_id, &record.claims[0].claim_id, good.clamp(0.0, 1.0))?;
        table.insert("alignscore", &record.record_id, &record.claims[0].claim_id, noisy)?;
        records.push(record);
    }
    let data = Dataset::new(records, TaskMode::LongForm)?;
    let report = evaluate_methods(
        &data,
        &table,
        &["msp".to_string(), "alignscore".to_string()],
        &EvalParams {
            resamples: 100,
            seed: 5,
            ..EvalParams::default()
        },
    )?;
    println!("\n{}", report.to_text());
    print!("as CSV:\n{}", report.to_csv());
    Ok(())
}
