//! Stress-test estimators by corrupting retrievals: swap each chosen
//! record's passages for another record's, keeping the originals for audit.
//!
//! Run with: `cargo run --example retrieval_corruption`

use franq::data::{Dataset, GenerationRecord, Passage, Split, TaskMode, SCHEMA_VERSION};
use franq::harness::corrupt::shuffle_retrievals;

fn record(i: usize) -> GenerationRecord {
    GenerationRecord {
        record_id: format!("doc-{i}"),
        question: format!("question about topic {i}"),
        passages: vec![Passage {
            title: format!("topic {i} reference"),
            content: format!("Everything there is to know about topic {i}."),
            source_id: String::new(),
        }],
        answer_text: format!("An answer about topic {i}."),
        tokens: vec![],
        samples: vec![],
        claims: vec![],
        external_scores: Default::default(),
        gold_answer: None,
        split: Split::Unassigned,
        schema: SCHEMA_VERSION,
        original_passages: None,
    }
}

fn main() -> franq::Result<()> {
    let data = Dataset::new((0..6).map(record).collect(), TaskMode::LongForm)?;

    // Corrupt half the records: each selected record receives passages drawn
    // from other records, never any of its own.
    let corrupted = shuffle_retrievals(&data, 0.5, 17)?;

    for (before, after) in data.records.iter().zip(&corrupted.records) {
        match &after.original_passages {
            Some(originals) => {
                println!(
                    "{}: CORRUPTED  '{}' -> '{}'",
                    after.record_id, originals[0].title, after.passages[0].title
                );
                assert!(after.passages.iter().all(|p| !originals.contains(p)));
            }
            None => {
                println!("{}: untouched  '{}'", after.record_id, after.passages[0].title);
                assert_eq!(before.passages, after.passages);
            }
        }
    }
    let swapped = corrupted
        .records
        .iter()
        .filter(|r| r.original_passages.is_some())
        .count();
    println!("\n{swapped}/{} records corrupted (fraction 0.5 rounds up)", data.records.len());
    Ok(())
}
