//! Build generation records in code, validate them as a dataset, round-trip
//! them through JSONL, and assign a train/test split.
//!
//! Run with: `cargo run --example dataset_basics`

use franq::data::{
    load_records, save_records, split_dataset, Claim, Dataset, GenerationRecord, Passage, Split,
    TaskMode, TokenInfo, SCHEMA_VERSION,
};

fn token(text: &str, logprob: f64) -> TokenInfo {
    TokenInfo {
        text: text.to_string(),
        logprob,
        alternatives: vec![(text.to_string(), logprob)],
    }
}

fn record(i: usize) -> GenerationRecord {
    let tokens = vec![
        token(" The", -0.02),
        token(" answer", -0.10),
        token(" is", -0.05),
        token(" here", -0.60),
        token(".", -0.01),
    ];
    GenerationRecord {
        record_id: format!("rec-{i}"),
        question: format!("Question number {i}?"),
        passages: vec![Passage {
            title: format!("source {i}"),
            content: format!("Supporting passage for question {i}."),
            source_id: String::new(),
        }],
        answer_text: " The answer is here.".to_string(),
        tokens,
        samples: vec![],
        claims: vec![
            Claim {
                claim_id: format!("rec-{i}-c0"),
                text: "The answer is here.".to_string(),
                span: vec![0, 1, 2, 3, 4],
                factuality_label: Default::default(),
                faithfulness_label: Default::default(),
                faithfulness_score: Some(0.9),
            },
            Claim {
                claim_id: format!("rec-{i}-c1"),
                text: "There is an answer.".to_string(),
                span: vec![1, 2],
                factuality_label: Default::default(),
                faithfulness_label: Default::default(),
                faithfulness_score: None,
            },
        ],
        external_scores: Default::default(),
        gold_answer: None,
        split: Split::Unassigned,
        schema: SCHEMA_VERSION,
        original_passages: None,
    }
}

fn main() -> franq::Result<()> {
    // Dataset::new validates every record: schema version, token logprobs,
    // claim spans, unique ids, faithfulness score ranges.
    let records: Vec<GenerationRecord> = (0..10).map(record).collect();
    let data = Dataset::new(records, TaskMode::LongForm)?;
    println!(
        "built a dataset of {} records / {} claims",
        data.records.len(),
        data.total_claims()
    );

    // Validation rejects malformed records. Here: a span index past the end
    // of the token list.
    let mut broken = record(99);
    broken.claims[0].span = vec![0, 1, 2, 3, 4, 5, 6, 7];
    match Dataset::new(vec![broken], TaskMode::LongForm) {
        Err(e) => println!("malformed record rejected: {e}"),
        Ok(_) => unreachable!("validation should have failed"),
    }

    // JSONL round-trip.
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("records.jsonl");
    save_records(&data, &path)?;
    let reloaded = load_records(&path, TaskMode::LongForm)?;
    assert_eq!(reloaded.records, data.records);
    println!("saved and reloaded {} records byte-faithfully", reloaded.records.len());

    // Deterministic train/test split: same seed, same assignment.
    let split = split_dataset(reloaded, 6, 42)?;
    let trains = split.split_records(Split::Train).count();
    let tests = split.split_records(Split::Test).count();
    println!("split with seed 42: {trains} train / {tests} test");
    assert!(split.has_train_split());
    Ok(())
}
