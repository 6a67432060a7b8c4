//! The faithfulness-conditioned mixture: fit it on a labeled synthetic
//! dataset under each calibration strategy and score held-out claims.
//!
//! Run with: `cargo run --example mixture_model`

use franq::calibration::{BranchCalibrator, MinMaxNorm, Polarity};
use franq::data::{
    Claim, Dataset, FactualityLabel, GenerationRecord, Passage, Split, TaskMode, TokenInfo,
    SCHEMA_VERSION,
};
use franq::estimators::ScoreTable;
use franq::franq::{fit_franq, score_dataset, FranqConfig, FranqModel, Strategy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// One single-claim record carrying a faithfulness probability and a gold
/// factuality label.
fn record(i: usize, p_faith: f64, truthful: bool, split: Split) -> GenerationRecord {
    GenerationRecord {
        record_id: format!("syn-{i}"),
        question: format!("synthetic question {i}"),
        passages: vec![Passage {
            title: "ctx".into(),
            content: "synthetic context".into(),
            source_id: String::new(),
        }],
        answer_text: " yes".into(),
        tokens: vec![TokenInfo {
            text: " yes".into(),
            logprob: -0.3,
            alternatives: vec![(" yes".into(), -0.3)],
        }],
        samples: vec![],
        claims: vec![Claim {
            claim_id: format!("syn-{i}-c0"),
            text: format!("synthetic claim {i}"),
            span: vec![0],
            factuality_label: if truthful {
                FactualityLabel::True
            } else {
                FactualityLabel::False
            },
            faithfulness_label: Default::default(),
            faithfulness_score: Some(p_faith),
        }],
        external_scores: Default::default(),
        gold_answer: None,
        split,
        schema: SCHEMA_VERSION,
        original_passages: None,
    }
}

fn main() -> franq::Result<()> {
    // --- The mixture arithmetic, with pass-through calibrators ---
    let passthrough = BranchCalibrator::Normalizer(MinMaxNorm {
        orientation: Polarity::Confidence,
        lo: 0.0,
        hi: 1.0,
    });
    let model = FranqModel {
        config: FranqConfig {
            strategy: Strategy::None,
            ..FranqConfig::long_form_default()
        },
        cal_faith: passthrough.clone(),
        cal_unfaith: passthrough,
        notes: vec![],
    };
    // P(true) = p_faith * c_faith + (1 - p_faith) * c_unfaith
    println!(
        "p_faith=0.6, branches (0.9, 0.5) -> P(true) = {}",
        model.score(0.6, 0.9, 0.5)?
    );
    // Binary mode replaces p_faith with the indicator p_faith > T.
    let binary = FranqModel {
        config: FranqConfig {
            binary_faithfulness: true,
            ..model.config.clone()
        },
        ..model.clone()
    };
    println!(
        "same inputs, binary faithfulness (T=0.5) -> P(true) = {}",
        binary.score(0.6, 0.9, 0.5)?
    );

    // --- Fitting on labeled data ---
    // Faithful claims are mostly true and their truth tracks the faithful
    // branch score; unfaithful claims are mostly false and track the other
    // branch. Scores are provided under the configured branch estimator
    // names (here the long-form defaults).
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut records = Vec::new();
    let mut table = ScoreTable::new();
    for i in 0..400 {
        let faithful = rng.gen_bool(0.5);
        let p_faith: f64 = if faithful {
            rng.gen_range(0.7..=1.0)
        } else {
            rng.gen_range(0.0..=0.3)
        };
        let s_faith: f64 = rng.gen_range(0.0..=1.0);
        let s_unfaith: f64 = rng.gen_range(0.0..=1.0);
        let p_true = if faithful {
            0.15 + 0.8 * s_faith
        } else {
            0.05 + 0.6 * s_unfaith
        };
        let truthful = rng.gen_bool(p_true);
        let split = if i < 300 { Split::Train } else { Split::Test };
        let rec = record(i, p_faith, truthful, split);
        table.insert("claim_prob", &rec.record_id, &rec.claims[0].claim_id, s_faith)?;
        table.insert(
            "parametric_knowledge",
            &rec.record_id,
            &rec.claims[0].claim_id,
            s_unfaith,
        )?;
        records.push(rec);
    }
    let data = Dataset::new(records, TaskMode::LongForm)?;

    for strategy in [Strategy::None, Strategy::Calibrated, Strategy::ConditionCalibrated] {
        let cfg = FranqConfig {
            strategy,
            ..FranqConfig::long_form_default()
        };
        let fitted = fit_franq(&data, &table, &cfg)?;
        let scores: std::collections::BTreeMap<String, f64> = score_dataset(&fitted, &data, &table)?
            .into_iter()
            .map(|(_, claim_id, score)| (claim_id, score))
            .collect();
        // Mean P(true) among actually-true vs actually-false test claims:
        // a fitted mixture should separate them.
        let (mut sum_t, mut n_t, mut sum_f, mut n_f) = (0.0, 0usize, 0.0, 0usize);
        for rec in data.split_records(Split::Test) {
            let claim = &rec.claims[0];
            let p = scores[&claim.claim_id];
            if claim.factuality_label == FactualityLabel::True {
                sum_t += p;
                n_t += 1;
            } else {
                sum_f += p;
                n_f += 1;
            }
        }
        println!(
            "{:<22} mean P(true): true claims {:.3} ({n_t}), false claims {:.3} ({n_f})",
            format!("{strategy:?}"),
            sum_t / n_t as f64,
            sum_f / n_f as f64,
        );
        if !fitted.notes.is_empty() {
            println!("  fit notes: {:?}", fitted.notes);
        }
    }
    Ok(())
}
