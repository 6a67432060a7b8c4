//! Error-detection metrics.
//!
//! Detection treats *factually false* claims as the positive class, so every
//! ranking metric here consumes detection scores where higher means "more
//! likely wrong". [`to_detection_scores`] produces that orientation:
//! uncertainty scores pass through, confidence scores are negated.
//!
//! Tie handling is centralized here and deterministic: PR-AUC processes tied
//! scores as one threshold group, AUROC gives tied pairs half credit, and the
//! rejection curve inside PRR uses the expected accuracy under random tie
//! breaking (so a constant detector scores exactly zero). No metric depends
//! on input order or on a sampling seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::Polarity;
use crate::error::{Error, Result};

/// Default cap on the rejection fraction swept by PRR.
pub const DEFAULT_MAX_REJECT: f64 = 0.5;
/// Default number of equal-width ECE bins.
pub const DEFAULT_ECE_BINS: usize = 10;
/// Default number of bootstrap resamples.
pub const DEFAULT_RESAMPLES: usize = 1000;

/// Paired scores and binary labels for one evaluation run.
///
/// For the ranking metrics (`pr_auc`, `auroc`, `prr`) the scores are
/// detection scores and label 1 marks a factually false claim. For `ece` the
/// scores are probabilities of truth and label 1 marks a factually true
/// claim.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalInput {
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

impl EvalInput {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if scores.is_empty() || scores.len() != labels.len() {
            return Err(Error::BadEvalInput(format!(
                "need equal-length non-empty vectors, got {} scores / {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
            return Err(Error::BadEvalInput(format!("non-finite score {s}")));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::BadEvalInput("labels must be 0 or 1".into()));
        }
        Ok(EvalInput { scores, labels })
    }

    fn positives(&self) -> usize {
        self.labels.iter().map(|&l| usize::from(l)).sum()
    }
}

/// Convert raw estimator scores into detection scores (higher = more likely
/// wrong): confidence and probability-of-truth scores are negated,
/// uncertainty scores pass through unchanged.
pub fn to_detection_scores(scores: &[f64], polarity: Polarity) -> Vec<f64> {
    match polarity {
        Polarity::Confidence => scores.iter().map(|s| -s).collect(),
        Polarity::Uncertainty => scores.to_vec(),
    }
}

/// Indices of `scores` sorted descending, grouped by exact score ties.
fn descending_tie_groups(scores: &[f64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for idx in order {
        match groups.last_mut() {
            Some(g) if scores[g[0]] == scores[idx] => g.push(idx),
            _ => groups.push(vec![idx]),
        }
    }
    groups
}

/// Area under the precision-recall curve by average-precision summation over
/// a descending score sweep. Tied scores enter as one group, so precision and
/// recall move once per distinct score. Requires at least one positive.
pub fn pr_auc(input: &EvalInput) -> Result<f64> {
    let n_pos = input.positives();
    if n_pos == 0 {
        return Err(Error::NoPositives);
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for group in descending_tie_groups(&input.scores) {
        for idx in group {
            if input.labels[idx] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(ap)
}

/// Area under the ROC curve via the rank-sum (Mann-Whitney) statistic with
/// average ranks, which gives tied positive/negative pairs half credit.
/// Requires both classes.
pub fn auroc(input: &EvalInput) -> Result<f64> {
    let n_pos = input.positives();
    let n_neg = input.labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..input.scores.len()).collect();
    order.sort_by(|&a, &b| input.scores[a].total_cmp(&input.scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && input.scores[order[j]] == input.scores[order[i]] {
            j += 1;
        }
        // 1-based average rank of the tied run [i, j).
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if input.labels[idx] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Expected accuracy-vs-rejection curve of a detector, evaluated at rejection
/// counts 0..=k_max. Rejects highest detection scores first; within a tie
/// group the expected number of rejected positives grows linearly (random tie
/// breaking in expectation). `accuracy(k)` is the fraction of retained claims
/// with label 0.
fn rejection_curve(input: &EvalInput, k_max: usize) -> Vec<f64> {
    let n = input.labels.len();
    let n_pos = input.positives() as f64;
    let n_neg = n as f64 - n_pos;

    // expected_rejected_pos[k] after rejecting the k highest-scored claims.
    let mut expected_rejected_pos = Vec::with_capacity(k_max + 1);
    expected_rejected_pos.push(0.0);
    let mut rejected = 0.0;
    'outer: for group in descending_tie_groups(&input.scores) {
        let g = group.len() as f64;
        let p: f64 = group.iter().map(|&i| f64::from(input.labels[i])).sum();
        for _ in 0..group.len() {
            rejected += p / g;
            expected_rejected_pos.push(rejected);
            if expected_rejected_pos.len() > k_max {
                break 'outer;
            }
        }
    }

    (0..=k_max)
        .map(|k| {
            let rejected_neg = k as f64 - expected_rejected_pos[k];
            (n_neg - rejected_neg) / (n - k) as f64
        })
        .collect()
}

/// Trapezoidal area of an accuracy curve sampled at rejection fractions
/// k/n for k = 0..=k_max.
fn curve_area(acc: &[f64], n: usize) -> f64 {
    let mut area = 0.0;
    for w in acc.windows(2) {
        area += (w[0] + w[1]) / 2.0 / n as f64;
    }
    area
}

/// Prediction-rejection ratio.
///
/// Sweeps the rejection fraction over {0, 1/n, ..., floor(max_reject*n)/n},
/// rejecting the highest detection scores first, and compares the trapezoidal
/// area of the detector's accuracy curve against an oracle that rejects the
/// factually false claims first and a random baseline whose accuracy stays
/// constant at the base rate:
///
/// ```text
/// PRR = (A_method - A_random) / (A_oracle - A_random)
/// ```
///
/// 1.0 means oracle-equivalent ordering, 0.0 random, negative worse than
/// random. Requires both classes.
pub fn prr(input: &EvalInput, max_reject: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&max_reject) || max_reject <= 0.0 {
        return Err(Error::BadEvalInput(format!(
            "max_reject must be in (0, 1), got {max_reject}"
        )));
    }
    let n = input.labels.len();
    let n_pos = input.positives();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let k_max = (max_reject * n as f64).floor() as usize;

    let a_method = curve_area(&rejection_curve(input, k_max), n);

    // Oracle: reject true positives first; accuracy hits 1.0 once all
    // positives are gone.
    let oracle_acc: Vec<f64> = (0..=k_max)
        .map(|k| {
            let rejected_pos = k.min(n_pos);
            let rejected_neg = (k - rejected_pos) as f64;
            (n_neg as f64 - rejected_neg) / (n - k) as f64
        })
        .collect();
    let a_oracle = curve_area(&oracle_acc, n);

    // Random baseline: constant accuracy at the base rate.
    let a_random = (n_neg as f64 / n as f64) * (k_max as f64 / n as f64);

    if a_oracle == a_random {
        return Err(Error::DegenerateOracle);
    }
    Ok((a_method - a_random) / (a_oracle - a_random))
}

/// Expected calibration error over equal-width probability bins.
///
/// `probs` are probabilities of truth and label 1 marks a factually true
/// claim. Bins cover [0, 0.1), [0.1, 0.2), ..., [0.9, 1.0] (the last bin
/// includes 1.0); empty bins are skipped.
pub fn ece(probs: &[f64], labels_true: &[u8], bins: usize) -> Result<f64> {
    let input = EvalInput::new(probs.to_vec(), labels_true.to_vec())?;
    if bins == 0 {
        return Err(Error::BadEvalInput("ece needs at least one bin".into()));
    }
    for &p in &input.scores {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::ProbabilityOutOfRange(p));
        }
    }
    let mut count = vec![0usize; bins];
    let mut conf_sum = vec![0.0f64; bins];
    let mut acc_sum = vec![0.0f64; bins];
    for (&p, &y) in input.scores.iter().zip(&input.labels) {
        let b = ((p * bins as f64) as usize).min(bins - 1);
        count[b] += 1;
        conf_sum[b] += p;
        acc_sum[b] += f64::from(y);
    }
    let n = input.scores.len() as f64;
    let mut total = 0.0;
    for b in 0..bins {
        if count[b] == 0 {
            continue;
        }
        let w = count[b] as f64;
        total += (w / n) * (conf_sum[b] / w - acc_sum[b] / w).abs();
    }
    Ok(total)
}

/// Metric identifiers as they appear on the command line and in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    PrAuc,
    Auroc,
    Prr,
    Ece,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::PrAuc, Metric::Auroc, Metric::Prr, Metric::Ece];

    pub fn id(self) -> &'static str {
        match self {
            Metric::PrAuc => "pr_auc",
            Metric::Auroc => "auroc",
            Metric::Prr => "prr",
            Metric::Ece => "ece",
        }
    }

    /// Human-facing column header.
    pub fn display_name(self) -> &'static str {
        match self {
            Metric::PrAuc => "PR-AUC",
            Metric::Auroc => "AUROC",
            Metric::Prr => "PRR",
            Metric::Ece => "ECE",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pr_auc" => Ok(Metric::PrAuc),
            "auroc" => Ok(Metric::Auroc),
            "prr" => Ok(Metric::Prr),
            "ece" => Ok(Metric::Ece),
            other => Err(Error::UnknownMetric(other.to_string())),
        }
    }

    /// Compute the metric on paired scores and labels. Ranking metrics expect
    /// detection scores with label 1 = false; ECE expects probabilities of
    /// truth with label 1 = true (see [`EvalInput`]).
    pub fn compute(self, scores: &[f64], labels: &[u8], params: &MetricParams) -> Result<f64> {
        match self {
            Metric::PrAuc => pr_auc(&EvalInput::new(scores.to_vec(), labels.to_vec())?),
            Metric::Auroc => auroc(&EvalInput::new(scores.to_vec(), labels.to_vec())?),
            Metric::Prr => prr(
                &EvalInput::new(scores.to_vec(), labels.to_vec())?,
                params.max_reject,
            ),
            Metric::Ece => ece(scores, labels, params.bins),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

/// Tunables shared by the metric suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    pub max_reject: f64,
    pub bins: usize,
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams {
            max_reject: DEFAULT_MAX_REJECT,
            bins: DEFAULT_ECE_BINS,
        }
    }
}

/// Standard error of a metric under claim-level bootstrap resampling with
/// replacement, deterministic per seed. Resamples on which the metric is
/// undefined (for example a single-class draw) are skipped; at least two
/// valid resamples are required.
pub fn bootstrap_stderr(
    metric: Metric,
    scores: &[f64],
    labels: &[u8],
    params: &MetricParams,
    resamples: usize,
    seed: u64,
) -> Result<f64> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(Error::BadEvalInput(
            "bootstrap needs equal-length non-empty vectors".into(),
        ));
    }
    let n = scores.len();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(resamples);
    let mut s = Vec::with_capacity(n);
    let mut l = Vec::with_capacity(n);
    for _ in 0..resamples {
        s.clear();
        l.clear();
        for _ in 0..n {
            let idx = rng.gen_range(0..n);
            s.push(scores[idx]);
            l.push(labels[idx]);
        }
        if let Ok(v) = metric.compute(&s, &l, params) {
            values.push(v);
        }
    }
    if values.len() < 2 {
        return Err(Error::BadEvalInput(format!(
            "only {} of {resamples} bootstrap resamples produced a defined metric",
            values.len()
        )));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
    Ok(var.sqrt())
}
