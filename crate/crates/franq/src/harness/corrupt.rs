//! Retrieval-corruption experiments: swapping passage sets between records
//! and rewriting passages with planted factual errors.
//!
//! Both corruptions select `ceil(fraction * n)` records with a seeded
//! shuffle and stash each corrupted record's original passages in
//! `original_passages` for audit. Claims, spans, and answers are left
//! untouched — the point is to measure how estimators behave when the
//! retrieval no longer supports the generation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::collections::BTreeSet;

use crate::backends::{DecodeParams, LlmBackend};
use crate::data::{Dataset, Passage};
use crate::error::{Error, Result};
use crate::prompts;

/// Seeded choice of which record indices to corrupt.
fn select_corrupted(n: usize, fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::ProbabilityOutOfRange(fraction));
    }
    let count = (fraction * n as f64).ceil() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut chosen: Vec<usize> = order.into_iter().take(count).collect();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Passage identity for the overlap check: title plus content. Two passages
/// with the same text are the same passage regardless of source bookkeeping.
fn passage_key(p: &Passage) -> (String, String) {
    (p.title.clone(), p.content.clone())
}

/// Replace the passage lists of `ceil(fraction * n)` records with passage
/// lists taken from other records, guaranteeing that no corrupted record
/// retains any passage from its original set. Donor lists come from the
/// *input* dataset, so two corrupted records may validly swap with each
/// other. Deterministic per seed.
pub fn shuffle_retrievals(data: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    let n = data.records.len();
    if n < 2 {
        return Err(Error::TooFewRecords { needed: 2, have: n });
    }
    let chosen = select_corrupted(n, fraction, seed)?;
    let originals: Vec<Vec<Passage>> =
        data.records.iter().map(|r| r.passages.clone()).collect();

    let mut out = data.clone();
    for (offset, &idx) in chosen.iter().enumerate() {
        let own: BTreeSet<(String, String)> =
            originals[idx].iter().map(passage_key).collect();
        // Walk donor candidates starting just past this record, rotated by
        // the record's position among the corrupted so swaps spread out.
        let donor = (1..n)
            .map(|step| (idx + offset + step) % n)
            .find(|&d| {
                d != idx
                    && !originals[d].is_empty()
                    && originals[d].iter().all(|p| !own.contains(&passage_key(p)))
            })
            .ok_or_else(|| Error::NoDisjointDonor(data.records[idx].record_id.clone()))?;
        let record = &mut out.records[idx];
        record.original_passages = Some(originals[idx].clone());
        record.passages = originals[donor].clone();
    }
    Dataset::new(out.records, out.task_mode)
}

/// Rewrite the passages of `ceil(fraction * n)` records through the
/// factual-rewrite prompt, planting plausible errors (dates, names, places)
/// while keeping topic and fluency. Originals are kept for audit. With a
/// warm replay cache the rewrites are bit-identical across runs.
pub fn corrupt_factual(
    data: &Dataset,
    fraction: f64,
    backend: &dyn LlmBackend,
    seed: u64,
) -> Result<Dataset> {
    let n = data.records.len();
    if n == 0 {
        return Err(Error::TooFewRecords { needed: 1, have: 0 });
    }
    let chosen = select_corrupted(n, fraction, seed)?;
    let params = DecodeParams::default();

    let mut out = data.clone();
    for &idx in &chosen {
        let record = &mut out.records[idx];
        let originals = record.passages.clone();
        let mut rewritten = Vec::with_capacity(originals.len());
        for passage in &originals {
            let prompt = prompts::render_factual_rewrite(&passage.content)?;
            let completion = backend.complete(&prompt, &params)?;
            let content = completion.text.trim().to_string();
            if content.is_empty() {
                return Err(Error::BadBackendResponse(format!(
                    "empty rewrite for a passage of record {}",
                    record.record_id
                )));
            }
            rewritten.push(Passage {
                title: passage.title.clone(),
                content,
                source_id: passage.source_id.clone(),
            });
        }
        record.original_passages = Some(originals);
        record.passages = rewritten;
    }
    Dataset::new(out.records, out.task_mode)
}
