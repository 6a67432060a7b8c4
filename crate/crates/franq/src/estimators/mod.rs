//! Estimator registry and the claim-level score table.
//!
//! Estimators are addressed by short stable names (the same strings used in
//! scores.csv and reports). Each name has a fixed polarity: `confidence`
//! scores rise with expected correctness, `uncertainty` scores rise with
//! expected error. Scores computed here are *native*; names such as `ccp` or
//! `xgb_all` exist in the registry so externally produced scores can be
//! ingested and evaluated side by side, but the crate does not compute them.

pub mod logprob;
pub mod ptrue;
pub mod sampling;
pub mod spectral;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::calibration::Polarity;
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Canonical estimator names.
pub mod names {
    pub const MSP: &str = "msp";
    pub const CLAIM_PROB: &str = "claim_prob";
    pub const PERPLEXITY: &str = "perplexity";
    pub const MEAN_TOKEN_ENTROPY: &str = "mean_token_entropy";
    pub const MAX_TOKEN_ENTROPY: &str = "max_token_entropy";
    pub const PTRUE: &str = "ptrue";
    pub const CCP: &str = "ccp";
    pub const PARAMETRIC_KNOWLEDGE: &str = "parametric_knowledge";
    pub const ALIGNSCORE: &str = "alignscore";
    pub const LEXSIM: &str = "lexsim";
    pub const DEGMAT: &str = "degmat";
    pub const EIGV: &str = "eigv";
    pub const SEMANTIC_ENTROPY: &str = "semantic_entropy";
    pub const SENTENCE_SAR: &str = "sentence_sar";
    pub const XGB_ALL: &str = "xgb_all";
    pub const XGB_FRANQ: &str = "xgb_franq";
    pub const FRANQ: &str = "franq";
}

/// Every registered estimator with its polarity and whether this crate can
/// compute it natively.
pub const REGISTRY: &[(&str, Polarity, bool)] = &[
    (names::MSP, Polarity::Confidence, true),
    (names::CLAIM_PROB, Polarity::Confidence, true),
    (names::PERPLEXITY, Polarity::Uncertainty, true),
    (names::MEAN_TOKEN_ENTROPY, Polarity::Uncertainty, true),
    (names::MAX_TOKEN_ENTROPY, Polarity::Uncertainty, true),
    (names::PTRUE, Polarity::Confidence, true),
    (names::CCP, Polarity::Uncertainty, false),
    (names::PARAMETRIC_KNOWLEDGE, Polarity::Confidence, true),
    (names::ALIGNSCORE, Polarity::Confidence, true),
    (names::LEXSIM, Polarity::Confidence, true),
    (names::DEGMAT, Polarity::Uncertainty, true),
    (names::EIGV, Polarity::Uncertainty, true),
    (names::SEMANTIC_ENTROPY, Polarity::Uncertainty, true),
    (names::SENTENCE_SAR, Polarity::Uncertainty, false),
    (names::XGB_ALL, Polarity::Confidence, false),
    (names::XGB_FRANQ, Polarity::Confidence, false),
    (names::FRANQ, Polarity::Confidence, true),
];

/// Default polarity for a registered estimator name.
pub fn default_polarity(name: &str) -> Option<Polarity> {
    REGISTRY
        .iter()
        .find(|(n, _, _)| *n == name)
        .map(|(_, p, _)| *p)
}

/// True if the crate computes this estimator itself (as opposed to ingesting
/// scores produced elsewhere).
pub fn is_native(name: &str) -> bool {
    REGISTRY
        .iter()
        .any(|(n, _, native)| *n == name && *native)
}

/// Names of the estimators this crate computes natively, in registry order.
pub fn native_estimators() -> Vec<&'static str> {
    REGISTRY
        .iter()
        .filter(|(_, _, native)| *native)
        .map(|(n, _, _)| *n)
        .collect()
}

fn polarity_label(p: Polarity) -> &'static str {
    match p {
        Polarity::Confidence => "confidence",
        Polarity::Uncertainty => "uncertainty",
    }
}

fn parse_polarity(s: &str) -> Option<Polarity> {
    match s {
        "confidence" => Some(Polarity::Confidence),
        "uncertainty" => Some(Polarity::Uncertainty),
        _ => None,
    }
}

const CSV_HEADER: &str = "record_id,claim_id,estimator,score,polarity";

/// Claim-level scores keyed by `(estimator, claim_id)`, with the record each
/// claim belongs to and a polarity per estimator. Iteration order (and hence
/// the CSV serialization) is fully deterministic.
#[derive(Debug, Clone, Default)]
pub struct ScoreTable {
    scores: BTreeMap<(String, String), f64>,
    claim_records: BTreeMap<String, String>,
    polarities: BTreeMap<String, Polarity>,
}

impl ScoreTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declare the polarity of an estimator name that is not in the
    /// registry (or confirm a registered one). Conflicts with the registry
    /// are rejected so a CSV cannot silently flip a known estimator.
    pub fn set_polarity(&mut self, estimator: &str, polarity: Polarity) -> Result<()> {
        if let Some(default) = default_polarity(estimator) {
            if default != polarity {
                return Err(Error::UnknownPolarity(format!(
                    "{estimator} is registered as {}, cannot redeclare as {}",
                    polarity_label(default),
                    polarity_label(polarity)
                )));
            }
        }
        if let Some(existing) = self.polarities.get(estimator) {
            if *existing != polarity {
                return Err(Error::UnknownPolarity(format!(
                    "{estimator} already declared as {}",
                    polarity_label(*existing)
                )));
            }
        }
        self.polarities.insert(estimator.to_string(), polarity);
        Ok(())
    }

    /// Polarity of an estimator, from explicit declarations or the registry.
    pub fn polarity(&self, estimator: &str) -> Result<Polarity> {
        self.polarities
            .get(estimator)
            .copied()
            .or_else(|| default_polarity(estimator))
            .ok_or_else(|| Error::UnknownPolarity(estimator.to_string()))
    }

    /// Record one score. The estimator's polarity must be resolvable and the
    /// score finite.
    pub fn insert(
        &mut self,
        estimator: &str,
        record_id: &str,
        claim_id: &str,
        score: f64,
    ) -> Result<()> {
        if !score.is_finite() {
            return Err(Error::BadEvalInput(format!(
                "non-finite {estimator} score for claim {claim_id}"
            )));
        }
        let polarity = self.polarity(estimator)?;
        self.polarities.insert(estimator.to_string(), polarity);
        self.claim_records
            .insert(claim_id.to_string(), record_id.to_string());
        self.scores
            .insert((estimator.to_string(), claim_id.to_string()), score);
        Ok(())
    }

    pub fn get(&self, estimator: &str, claim_id: &str) -> Option<f64> {
        self.scores
            .get(&(estimator.to_string(), claim_id.to_string()))
            .copied()
    }

    /// Like [`get`](Self::get) but missing entries are an error; used where
    /// a pipeline stage requires the score to exist.
    pub fn require(&self, estimator: &str, claim_id: &str) -> Result<f64> {
        self.get(estimator, claim_id)
            .ok_or_else(|| Error::MissingBranchScore {
                claim_id: claim_id.to_string(),
                estimator: estimator.to_string(),
            })
    }

    /// Estimator names that have at least one score, sorted.
    pub fn estimator_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .scores
            .keys()
            .map(|(estimator, _)| estimator.clone())
            .collect();
        names.dedup();
        names
    }

    /// All `(claim_id, score)` pairs for one estimator, sorted by claim id.
    pub fn scores_for(&self, estimator: &str) -> Vec<(String, f64)> {
        self.scores
            .iter()
            .filter(|((name, _), _)| name == estimator)
            .map(|((_, claim_id), score)| (claim_id.clone(), *score))
            .collect()
    }

    pub fn record_of(&self, claim_id: &str) -> Option<&str> {
        self.claim_records.get(claim_id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Serialize to CSV (header + one row per score, deterministic order).
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for ((estimator, claim_id), score) in &self.scores {
            let record_id = self
                .claim_records
                .get(claim_id)
                .map(String::as_str)
                .unwrap_or("");
            let polarity = self
                .polarities
                .get(estimator)
                .copied()
                .or_else(|| default_polarity(estimator))
                .expect("insert guarantees a polarity");
            out.push_str(&format!(
                "{record_id},{claim_id},{estimator},{score},{}\n",
                polarity_label(polarity)
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Parse a CSV produced by [`to_csv`](Self::to_csv) (or an external tool
    /// following the same format). Rows carry their own polarity; it must be
    /// self-consistent and must not contradict the registry.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == CSV_HEADER => {}
            Some((_, header)) => {
                return Err(Error::MalformedScoreRow {
                    line: 1,
                    reason: format!("expected header {CSV_HEADER:?}, got {header:?}"),
                })
            }
            None => {
                return Err(Error::MalformedScoreRow {
                    line: 1,
                    reason: "empty file".into(),
                })
            }
        }
        let mut table = ScoreTable::new();
        for (index, line) in lines {
            let line_no = index + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(Error::MalformedScoreRow {
                    line: line_no,
                    reason: format!("expected 5 fields, got {}", fields.len()),
                });
            }
            let score: f64 = fields[3].parse().map_err(|_| Error::MalformedScoreRow {
                line: line_no,
                reason: format!("unparseable score {:?}", fields[3]),
            })?;
            let polarity =
                parse_polarity(fields[4]).ok_or_else(|| Error::MalformedScoreRow {
                    line: line_no,
                    reason: format!("unknown polarity {:?}", fields[4]),
                })?;
            table
                .set_polarity(fields[2], polarity)
                .map_err(|e| Error::MalformedScoreRow {
                    line: line_no,
                    reason: e.to_string(),
                })?;
            table
                .insert(fields[2], fields[0], fields[1], score)
                .map_err(|e| Error::MalformedScoreRow {
                    line: line_no,
                    reason: e.to_string(),
                })?;
        }
        Ok(table)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::BadPath {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_csv(&text)
    }
}

/// Copy externally produced scores out of the records' `external_scores`
/// maps into the table. Every claim in the dataset must have a score for
/// every requested estimator; names outside the registry need a prior
/// [`ScoreTable::set_polarity`] call.
pub fn ingest_external(
    table: &mut ScoreTable,
    dataset: &Dataset,
    estimators: &[String],
) -> Result<()> {
    for name in estimators {
        table.polarity(name)?;
        for record in &dataset.records {
            let per_claim = record.external_scores.get(name);
            for claim in &record.claims {
                let score = per_claim
                    .and_then(|m| m.get(&claim.claim_id))
                    .copied()
                    .ok_or_else(|| Error::MissingExternalScore {
                        estimator: name.clone(),
                        claim_id: claim.claim_id.clone(),
                    })?;
                table.insert(name, &record.record_id, &claim.claim_id, score)?;
            }
        }
    }
    Ok(())
}
