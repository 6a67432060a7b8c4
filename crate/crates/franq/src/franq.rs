//! The faithfulness-conditioned factuality mixture.
//!
//! A claim's probability of being true decomposes over its faithfulness to
//! the retrieved passages:
//!
//! ```text
//! P(true) = P(faithful) * P(true | faithful) + (1 - P(faithful)) * P(true | unfaithful)
//! ```
//!
//! Each conditional is approximated by a branch estimator chosen for that
//! regime (grounding-sensitive when faithful, parametric when not), mapped
//! into [0, 1] by a branch calibrator. Three calibration strategies exist:
//!
//! * `none` — label-free orientation + min-max squash of the raw scores;
//! * `calibrated` — isotonic regression fitted on all labeled training claims;
//! * `condition_calibrated` — isotonic regression fitted per branch, on the
//!   training claims partitioned into faithful/unfaithful subsets.

use serde::{Deserialize, Serialize};

use crate::calibration::{fit_isotonic, BranchCalibrator, MinMaxNorm, Polarity};
use crate::data::{Dataset, Split, TaskMode};
use crate::error::{Error, Result};
use crate::estimators::{names, ScoreTable};
use crate::faithfulness;

/// How branch calibrators are fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// No labels used: orient and min-max squash raw scores.
    None,
    /// One isotonic calibrator per branch, each fitted on every labeled
    /// training claim.
    Calibrated,
    /// Isotonic calibrators fitted on the faithful / unfaithful partitions
    /// of the training claims.
    ConditionCalibrated,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::Calibrated => "calibrated",
            Strategy::ConditionCalibrated => "condition_calibrated",
        }
    }
}

/// What defines the training partition for condition calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionSignal {
    /// Faithful iff the claim's alignment probability exceeds T. Needs no
    /// gold faithfulness labels at fit time.
    AlignscoreThreshold,
    /// Faithful iff the gold faithfulness annotation says so; claims without
    /// a gold label are skipped. Available for ablations.
    GoldFaithfulness,
}

/// Full configuration of a mixture run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FranqConfig {
    pub task: TaskMode,
    /// Branch estimator for the faithful regime (raw score name).
    pub uq_faith: String,
    /// Branch estimator for the unfaithful regime.
    pub uq_unfaith: String,
    pub strategy: Strategy,
    pub partition_signal: PartitionSignal,
    /// Faithfulness threshold T for partitioning and for binary mode.
    pub threshold: f64,
    /// Replace p_faith with the hard indicator `p_faith > T` when mixing.
    pub binary_faithfulness: bool,
}

impl FranqConfig {
    /// Long-form default: claim probability on the faithful branch,
    /// parametric knowledge on the unfaithful branch.
    pub fn long_form_default() -> Self {
        FranqConfig {
            task: TaskMode::LongForm,
            uq_faith: names::CLAIM_PROB.to_string(),
            uq_unfaith: names::PARAMETRIC_KNOWLEDGE.to_string(),
            strategy: Strategy::ConditionCalibrated,
            partition_signal: PartitionSignal::AlignscoreThreshold,
            threshold: faithfulness::DEFAULT_THRESHOLD,
            binary_faithfulness: false,
        }
    }

    /// Short-form default: semantic entropy on the faithful branch, sum of
    /// Laplacian eigenvalues on the unfaithful branch.
    pub fn short_form_default() -> Self {
        FranqConfig {
            task: TaskMode::ShortForm,
            uq_faith: names::SEMANTIC_ENTROPY.to_string(),
            uq_unfaith: names::EIGV.to_string(),
            strategy: Strategy::ConditionCalibrated,
            partition_signal: PartitionSignal::AlignscoreThreshold,
            threshold: faithfulness::DEFAULT_THRESHOLD,
            binary_faithfulness: false,
        }
    }

    /// Default for the given task mode.
    pub fn for_task(task: TaskMode) -> Self {
        match task {
            TaskMode::LongForm => Self::long_form_default(),
            TaskMode::ShortForm => Self::short_form_default(),
        }
    }

    /// Configuration for corrupted-retrieval regimes: when passages can no
    /// longer be trusted, parametric knowledge is the strongest faithful-
    /// branch signal, so it replaces the short-form default there.
    pub fn corrupted_regime() -> Self {
        FranqConfig {
            uq_faith: names::PARAMETRIC_KNOWLEDGE.to_string(),
            ..Self::short_form_default()
        }
    }
}

/// A fitted mixture: the configuration plus one calibrator per branch.
/// `notes` records fit-time fallbacks (e.g. an empty partition side) so the
/// run manifest can surface them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FranqModel {
    pub config: FranqConfig,
    pub cal_faith: BranchCalibrator,
    pub cal_unfaith: BranchCalibrator,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// One training claim's view: branch scores, faithfulness, factuality.
struct TrainClaim {
    s_faith: f64,
    s_unfaith: f64,
    faithful: Option<bool>,
    label: u8,
}

/// Records eligible for fitting: the train split if one is assigned,
/// otherwise every record (callers that pre-filter pass unassigned data).
fn fit_records(data: &Dataset) -> Vec<&crate::data::GenerationRecord> {
    if data.has_train_split() {
        data.records
            .iter()
            .filter(|r| r.split == Split::Train)
            .collect()
    } else {
        data.records.iter().collect()
    }
}

fn collect_train_claims(
    data: &Dataset,
    table: &ScoreTable,
    cfg: &FranqConfig,
) -> Result<Vec<TrainClaim>> {
    let mut out = Vec::new();
    for record in fit_records(data) {
        for claim in &record.claims {
            let Some(label) = claim.factuality_label.as_binary() else {
                continue; // unverifiable / unlabeled claims cannot supervise
            };
            let s_faith = table.require(&cfg.uq_faith, &claim.claim_id)?;
            let s_unfaith = table.require(&cfg.uq_unfaith, &claim.claim_id)?;
            let faithful = match cfg.partition_signal {
                PartitionSignal::AlignscoreThreshold => claim
                    .faithfulness_score
                    .map(|p| faithfulness::binarize(p, cfg.threshold) == 1.0),
                PartitionSignal::GoldFaithfulness => {
                    claim.faithfulness_label.as_binary().map(|b| b == 1)
                }
            };
            out.push(TrainClaim {
                s_faith,
                s_unfaith,
                faithful,
                label,
            });
        }
    }
    Ok(out)
}

/// Fit one branch on its partition, falling back to the full pool when the
/// partition holds fewer than two labeled claims.
fn fit_branch_conditioned(
    branch: &str,
    partition: &[(f64, u8)],
    full: &[(f64, u8)],
    polarity: Polarity,
    notes: &mut Vec<String>,
) -> Result<BranchCalibrator> {
    if partition.len() >= 2 {
        Ok(BranchCalibrator::Isotonic(fit_isotonic(
            partition, polarity,
        )?))
    } else {
        log::warn!(
            "{branch} partition has {} labeled claims; falling back to the full training pool",
            partition.len()
        );
        notes.push(format!(
            "{branch} partition had {} labeled claims; fitted on the full training pool instead",
            partition.len()
        ));
        Ok(BranchCalibrator::Isotonic(fit_isotonic(full, polarity)?))
    }
}

/// Fit the mixture on a dataset's training claims.
///
/// Strategy `none` needs no labels but does need at least one claim with
/// both branch scores, to bound the min-max squash. The calibrated
/// strategies need at least two claims with binary factuality labels; under
/// condition calibration a partition side with fewer than two labeled claims
/// falls back to the full pool for that branch (recorded in `notes`).
pub fn fit_franq(data: &Dataset, table: &ScoreTable, cfg: &FranqConfig) -> Result<FranqModel> {
    let pol_faith = table.polarity(&cfg.uq_faith)?;
    let pol_unfaith = table.polarity(&cfg.uq_unfaith)?;
    let mut notes = Vec::new();

    let (cal_faith, cal_unfaith) = match cfg.strategy {
        Strategy::None => {
            // Label-free: pool every train claim that has branch scores.
            let mut pool_faith = Vec::new();
            let mut pool_unfaith = Vec::new();
            for record in fit_records(data) {
                for claim in &record.claims {
                    pool_faith.push(table.require(&cfg.uq_faith, &claim.claim_id)?);
                    pool_unfaith.push(table.require(&cfg.uq_unfaith, &claim.claim_id)?);
                }
            }
            (
                BranchCalibrator::Normalizer(MinMaxNorm::fit(&pool_faith, pol_faith)?),
                BranchCalibrator::Normalizer(MinMaxNorm::fit(&pool_unfaith, pol_unfaith)?),
            )
        }
        Strategy::Calibrated => {
            let claims = collect_train_claims(data, table, cfg)?;
            let pairs_faith: Vec<(f64, u8)> =
                claims.iter().map(|c| (c.s_faith, c.label)).collect();
            let pairs_unfaith: Vec<(f64, u8)> =
                claims.iter().map(|c| (c.s_unfaith, c.label)).collect();
            (
                BranchCalibrator::Isotonic(fit_isotonic(&pairs_faith, pol_faith)?),
                BranchCalibrator::Isotonic(fit_isotonic(&pairs_unfaith, pol_unfaith)?),
            )
        }
        Strategy::ConditionCalibrated => {
            let claims = collect_train_claims(data, table, cfg)?;
            let mut d_faith: Vec<(f64, u8)> = Vec::new();
            let mut d_unfaith: Vec<(f64, u8)> = Vec::new();
            let mut full_faith: Vec<(f64, u8)> = Vec::new();
            let mut full_unfaith: Vec<(f64, u8)> = Vec::new();
            for c in &claims {
                full_faith.push((c.s_faith, c.label));
                full_unfaith.push((c.s_unfaith, c.label));
                match c.faithful {
                    Some(true) => d_faith.push((c.s_faith, c.label)),
                    Some(false) => d_unfaith.push((c.s_unfaith, c.label)),
                    None => {} // no partition signal for this claim
                }
            }
            (
                fit_branch_conditioned(
                    "faithful",
                    &d_faith,
                    &full_faith,
                    pol_faith,
                    &mut notes,
                )?,
                fit_branch_conditioned(
                    "unfaithful",
                    &d_unfaith,
                    &full_unfaith,
                    pol_unfaith,
                    &mut notes,
                )?,
            )
        }
    };

    Ok(FranqModel {
        config: cfg.clone(),
        cal_faith,
        cal_unfaith,
        notes,
    })
}

impl FranqModel {
    /// Evaluate the mixture for one claim from its faithfulness probability
    /// and raw branch scores.
    ///
    /// The endpoints are exact: `p_faith = 1` returns the calibrated
    /// faithful branch bit-for-bit, `p_faith = 0` the unfaithful branch. In
    /// between, the result is clamped into `[min(c_f, c_u), max(c_f, c_u)]`
    /// so the convexity invariant survives floating-point rounding.
    pub fn score(&self, p_faith: f64, s_faith: f64, s_unfaith: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p_faith) {
            return Err(Error::ProbabilityOutOfRange(p_faith));
        }
        let p = if self.config.binary_faithfulness {
            faithfulness::binarize(p_faith, self.config.threshold)
        } else {
            p_faith
        };
        let c_faith = self.cal_faith.apply(s_faith);
        let c_unfaith = self.cal_unfaith.apply(s_unfaith);
        if p == 1.0 {
            return Ok(c_faith);
        }
        if p == 0.0 {
            return Ok(c_unfaith);
        }
        let mixed = p * c_faith + (1.0 - p) * c_unfaith;
        Ok(mixed.clamp(c_faith.min(c_unfaith), c_faith.max(c_unfaith)))
    }
}

/// Score every claim in the dataset. Returns `(record_id, claim_id, score)`
/// triples in dataset order; every claim needs a faithfulness probability
/// and both branch scores.
pub fn score_dataset(
    model: &FranqModel,
    data: &Dataset,
    table: &ScoreTable,
) -> Result<Vec<(String, String, f64)>> {
    let mut out = Vec::with_capacity(data.total_claims());
    for record in &data.records {
        for claim in &record.claims {
            let p_faith = claim
                .faithfulness_score
                .ok_or_else(|| Error::MissingFaithfulness(claim.claim_id.clone()))?;
            let s_faith = table.require(&model.config.uq_faith, &claim.claim_id)?;
            let s_unfaith = table.require(&model.config.uq_unfaith, &claim.claim_id)?;
            let score = model.score(p_faith, s_faith, s_unfaith)?;
            out.push((record.record_id.clone(), claim.claim_id.clone(), score));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::IsotonicModel;

    fn identity_model(binary: bool) -> FranqModel {
        let mut config = FranqConfig::long_form_default();
        config.strategy = Strategy::None;
        config.binary_faithfulness = binary;
        FranqModel {
            config,
            cal_faith: BranchCalibrator::Normalizer(MinMaxNorm {
                orientation: Polarity::Confidence,
                lo: 0.0,
                hi: 1.0,
            }),
            cal_unfaith: BranchCalibrator::Normalizer(MinMaxNorm {
                orientation: Polarity::Confidence,
                lo: 0.0,
                hi: 1.0,
            }),
            notes: vec![],
        }
    }

    #[test]
    fn hand_computed_mixture() {
        let model = identity_model(false);
        let out = model.score(0.6, 0.9, 0.5).unwrap();
        assert!((out - 0.74).abs() < 1e-12);
    }

    #[test]
    fn endpoint_identities_are_exact() {
        let model = identity_model(false);
        assert_eq!(model.score(1.0, 0.37, 0.91).unwrap(), 0.37);
        assert_eq!(model.score(0.0, 0.37, 0.91).unwrap(), 0.91);
    }

    #[test]
    fn binary_mode_emits_only_branch_values() {
        let model = identity_model(true);
        // Above threshold -> faithful branch exactly.
        assert_eq!(model.score(0.51, 0.37, 0.91).unwrap(), 0.37);
        // At or below threshold -> unfaithful branch exactly.
        assert_eq!(model.score(0.5, 0.37, 0.91).unwrap(), 0.91);
        assert_eq!(model.score(0.49, 0.37, 0.91).unwrap(), 0.91);
    }

    #[test]
    fn out_of_range_faithfulness_rejected() {
        let model = identity_model(false);
        assert!(matches!(
            model.score(1.2, 0.5, 0.5),
            Err(Error::ProbabilityOutOfRange(_))
        ));
        assert!(model.score(-0.1, 0.5, 0.5).is_err());
    }

    #[test]
    fn monotone_in_p_faith_when_faithful_branch_wins() {
        let model = identity_model(false);
        let mut last = -1.0;
        for step in 0..=10 {
            let p = step as f64 / 10.0;
            let out = model.score(p, 0.9, 0.2).unwrap();
            assert!(out > last, "not strictly increasing at p={p}");
            last = out;
        }
    }

    #[test]
    fn equal_branches_make_p_faith_irrelevant() {
        let model = identity_model(false);
        for step in 0..=10 {
            let p = step as f64 / 10.0;
            let out = model.score(p, 0.6, 0.6).unwrap();
            assert!((out - 0.6).abs() < 1e-15);
        }
    }

    #[test]
    fn defaults_match_task_modes() {
        let long = FranqConfig::long_form_default();
        assert_eq!(long.uq_faith, "claim_prob");
        assert_eq!(long.uq_unfaith, "parametric_knowledge");
        let short = FranqConfig::short_form_default();
        assert_eq!(short.uq_faith, "semantic_entropy");
        assert_eq!(short.uq_unfaith, "eigv");
        let corrupted = FranqConfig::corrupted_regime();
        assert_eq!(corrupted.task, TaskMode::ShortForm);
        assert_eq!(corrupted.uq_faith, "parametric_knowledge");
        assert_eq!(corrupted.uq_unfaith, "eigv");
        assert_eq!(corrupted.threshold, 0.5);
    }

    // ---- fitting on a small synthetic dataset ----

    use crate::data::{
        Claim, FactualityLabel, FaithfulnessLabel, GenerationRecord, Passage, TokenInfo,
    };
    use std::collections::BTreeMap;

    /// One record per claim; each claim carries a faithfulness score and a
    /// factuality label, with branch scores supplied separately.
    fn synthetic_dataset(claims: &[(f64, u8)]) -> (Dataset, ScoreTable) {
        let mut records = Vec::new();
        let mut table = ScoreTable::new();
        for (i, &(p_faith, label)) in claims.iter().enumerate() {
            let claim_id = format!("c{i}");
            let record_id = format!("r{i}");
            records.push(GenerationRecord {
                record_id: record_id.clone(),
                question: "q".into(),
                passages: vec![Passage {
                    title: String::new(),
                    content: "ctx".into(),
                    source_id: String::new(),
                }],
                answer_text: " a".into(),
                tokens: vec![TokenInfo {
                    text: " a".into(),
                    logprob: -0.5,
                    alternatives: vec![(" a".into(), -0.5)],
                }],
                samples: vec![],
                claims: vec![Claim {
                    claim_id: claim_id.clone(),
                    text: "a".into(),
                    span: vec![0],
                    factuality_label: if label == 1 {
                        FactualityLabel::True
                    } else {
                        FactualityLabel::False
                    },
                    faithfulness_label: FaithfulnessLabel::Unknown,
                    faithfulness_score: Some(p_faith),
                }],
                external_scores: BTreeMap::new(),
                gold_answer: None,
                split: Split::Unassigned,
                schema: crate::data::SCHEMA_VERSION,
                original_passages: None,
            });
            // Faithful-branch score tracks the label on faithful claims and
            // anti-tracks it on unfaithful ones; unfaithful-branch score is
            // informative only on unfaithful claims.
            let s_f = if label == 1 { 0.8 } else { 0.3 };
            let s_u = if label == 1 { 0.7 } else { 0.2 };
            table.insert("claim_prob", &record_id, &claim_id, s_f).unwrap();
            table
                .insert("parametric_knowledge", &record_id, &claim_id, s_u)
                .unwrap();
        }
        (Dataset::new(records, TaskMode::LongForm).unwrap(), table)
    }

    #[test]
    fn strategy_none_builds_normalizers() {
        let (data, table) = synthetic_dataset(&[(0.9, 1), (0.1, 0), (0.8, 1), (0.2, 0)]);
        let mut cfg = FranqConfig::long_form_default();
        cfg.strategy = Strategy::None;
        let model = fit_franq(&data, &table, &cfg).unwrap();
        assert!(matches!(model.cal_faith, BranchCalibrator::Normalizer(_)));
        assert!(model.notes.is_empty());
    }

    #[test]
    fn condition_calibration_partitions_by_threshold() {
        let (data, table) = synthetic_dataset(&[
            (0.9, 1),
            (0.9, 0),
            (0.8, 1),
            (0.7, 0),
            (0.2, 1),
            (0.1, 0),
            (0.3, 1),
            (0.2, 0),
        ]);
        let cfg = FranqConfig::long_form_default();
        let model = fit_franq(&data, &table, &cfg).unwrap();
        assert!(model.notes.is_empty(), "both partitions were populated");
        assert!(matches!(model.cal_faith, BranchCalibrator::Isotonic(_)));
    }

    #[test]
    fn empty_partition_falls_back_to_full_pool() {
        // Every claim faithful: the unfaithful side is empty.
        let (data, table) = synthetic_dataset(&[(0.9, 1), (0.8, 0), (0.9, 1), (0.7, 0)]);
        let cfg = FranqConfig::long_form_default();
        let model = fit_franq(&data, &table, &cfg).unwrap();
        assert_eq!(model.notes.len(), 1);
        assert!(model.notes[0].contains("unfaithful"));
        // The fallback calibrator is fitted, not identity.
        assert!(matches!(model.cal_unfaith, BranchCalibrator::Isotonic(_)));
    }

    #[test]
    fn gold_partition_skips_unlabeled_claims() {
        let (mut data, table) = synthetic_dataset(&[(0.9, 1), (0.1, 0), (0.9, 1), (0.1, 0)]);
        // Give two claims gold faithfulness labels, leave two unknown.
        data.records[0].claims[0].faithfulness_label = FaithfulnessLabel::Faithful;
        data.records[1].claims[0].faithfulness_label = FaithfulnessLabel::UnfaithfulContra;
        let mut cfg = FranqConfig::long_form_default();
        cfg.partition_signal = PartitionSignal::GoldFaithfulness;
        let model = fit_franq(&data, &table, &cfg).unwrap();
        // Each side has one labeled claim -> both fall back.
        assert_eq!(model.notes.len(), 2);
    }

    #[test]
    fn score_dataset_applies_model_per_claim() {
        let (data, table) = synthetic_dataset(&[(0.9, 1), (0.1, 0), (0.8, 1), (0.3, 0)]);
        let mut cfg = FranqConfig::long_form_default();
        cfg.strategy = Strategy::None;
        let model = fit_franq(&data, &table, &cfg).unwrap();
        let scores = score_dataset(&model, &data, &table).unwrap();
        assert_eq!(scores.len(), 4);
        for (_, _, s) in &scores {
            assert!((0.0..=1.0).contains(s));
        }
        // Determinism: identical rerun.
        let again = score_dataset(&model, &data, &table).unwrap();
        assert_eq!(scores, again);
    }

    #[test]
    fn missing_faithfulness_is_loud() {
        let (mut data, table) = synthetic_dataset(&[(0.9, 1), (0.1, 0)]);
        data.records[0].claims[0].faithfulness_score = None;
        let mut cfg = FranqConfig::long_form_default();
        cfg.strategy = Strategy::None;
        let model = fit_franq(&data, &table, &cfg).unwrap();
        assert!(matches!(
            score_dataset(&model, &data, &table),
            Err(Error::MissingFaithfulness(_))
        ));
    }

    #[test]
    fn missing_branch_score_is_loud() {
        let (data, mut table) = synthetic_dataset(&[(0.9, 1), (0.1, 0)]);
        table = {
            // Rebuild the table without the unfaithful branch.
            let mut t = ScoreTable::new();
            for (claim_id, score) in table.scores_for("claim_prob") {
                let record = table.record_of(&claim_id).unwrap().to_string();
                t.insert("claim_prob", &record, &claim_id, score).unwrap();
            }
            t
        };
        let cfg = FranqConfig::long_form_default();
        assert!(matches!(
            fit_franq(&data, &table, &cfg),
            Err(Error::MissingBranchScore { .. })
        ));
    }

    #[test]
    fn model_survives_json_roundtrip() {
        let model = FranqModel {
            config: FranqConfig::short_form_default(),
            cal_faith: BranchCalibrator::Isotonic(IsotonicModel {
                orientation: Polarity::Uncertainty,
                breakpoints: vec![-1.0, 0.0],
                values: vec![0.2, 0.8],
            }),
            cal_unfaith: BranchCalibrator::Normalizer(MinMaxNorm {
                orientation: Polarity::Uncertainty,
                lo: -2.0,
                hi: 0.0,
            }),
            notes: vec!["note".into()],
        };
        let json = serde_json::to_string(&model).unwrap();
        let back: FranqModel = serde_json::from_str(&json).unwrap();
        assert_eq!(model, back);
    }
}
