//! Score orientation and isotonic calibration.
//!
//! Estimators disagree about direction: some emit confidence (higher means
//! more likely true), others emit uncertainty (higher means more likely
//! wrong). Everything downstream of this module works on *oriented* scores,
//! where higher always means more likely true.
//!
//! Calibration maps an oriented score to a probability of factual truth by
//! isotonic regression: the least-squares non-decreasing step function
//! through the (score, 0/1 label) training pairs, fitted with the
//! pool-adjacent-violators algorithm. Tied scores are pooled into a single
//! weighted point before fitting so the result is invariant to the order the
//! training pairs arrive in. Prediction clamps instead of extrapolating:
//! scores below the smallest breakpoint get the first block value, scores
//! above the largest get the last.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Direction of a raw score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// Higher score means more likely true. Confidence scores live in [0, 1].
    Confidence,
    /// Higher score means more likely wrong.
    Uncertainty,
}

/// Orient a raw score so that higher always means more likely true:
/// confidence scores pass through, uncertainty scores are negated.
pub fn orient(score: f64, polarity: Polarity) -> f64 {
    match polarity {
        Polarity::Confidence => score,
        Polarity::Uncertainty => -score,
    }
}

/// A fitted isotonic regression: a non-decreasing step function over oriented
/// scores, stored as ordered (breakpoint, value) pairs. `breakpoints` are the
/// distinct oriented training scores in increasing order; `values[i]` is the
/// fitted probability for any score in `[breakpoints[i], breakpoints[i+1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotonicModel {
    pub orientation: Polarity,
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

/// Fit isotonic regression on (raw score, binary label) pairs. Labels use the
/// convention 1 = factually true, so the fitted values are probabilities of
/// truth.
///
/// A single-class training pool degenerates to a constant model at the class
/// rate; that is allowed but logged, because a constant calibrator carries no
/// ranking information.
pub fn fit_isotonic(pairs: &[(f64, u8)], polarity: Polarity) -> Result<IsotonicModel> {
    if pairs.len() < 2 {
        return Err(Error::InsufficientTrainingData(pairs.len()));
    }
    if pairs.iter().all(|&(_, y)| y == pairs[0].1) {
        log::warn!(
            "isotonic training pool is single-class (all {}); fitting a constant model",
            pairs[0].1
        );
    }

    // Orient, sort, and pool exact ties into weighted points.
    let mut oriented: Vec<(f64, f64)> = pairs
        .iter()
        .map(|&(s, y)| (orient(s, polarity), f64::from(y)))
        .collect();
    oriented.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut breakpoints: Vec<f64> = Vec::new();
    let mut means: Vec<f64> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for (s, y) in oriented {
        if breakpoints.last() == Some(&s) {
            let w = weights.last_mut().unwrap();
            let m = means.last_mut().unwrap();
            *m = (*m * *w + y) / (*w + 1.0);
            *w += 1.0;
        } else {
            breakpoints.push(s);
            means.push(y);
            weights.push(1.0);
        }
    }

    // Pool adjacent violators over the weighted points. Each block tracks its
    // weighted mean and how many consecutive points it covers.
    struct Block {
        value: f64,
        weight: f64,
        len: usize,
    }
    let mut blocks: Vec<Block> = Vec::with_capacity(means.len());
    for (&value, &weight) in means.iter().zip(&weights) {
        blocks.push(Block {
            value,
            weight,
            len: 1,
        });
        while blocks.len() >= 2 {
            let last = blocks.len() - 1;
            if blocks[last - 1].value > blocks[last].value {
                let b = blocks.pop().unwrap();
                let a = blocks.last_mut().unwrap();
                a.value = (a.value * a.weight + b.value * b.weight) / (a.weight + b.weight);
                a.weight += b.weight;
                a.len += b.len;
            } else {
                break;
            }
        }
    }

    let mut values = Vec::with_capacity(breakpoints.len());
    for block in &blocks {
        values.extend(std::iter::repeat(block.value).take(block.len));
    }
    debug_assert_eq!(values.len(), breakpoints.len());
    Ok(IsotonicModel {
        orientation: polarity,
        breakpoints,
        values,
    })
}

/// Evaluate a fitted model at a raw score via the predecessor rule: the value
/// of the last breakpoint at or below the oriented score. Scores below every
/// breakpoint clamp to the first value.
pub fn apply_isotonic(model: &IsotonicModel, score: f64) -> f64 {
    let oriented = orient(score, model.orientation);
    // partition_point gives the count of breakpoints <= oriented.
    let idx = model.breakpoints.partition_point(|&b| b <= oriented);
    if idx == 0 {
        model.values[0]
    } else {
        model.values[idx - 1]
    }
}

/// Label-free squash used by the uncalibrated mixture strategy: orient, then
/// min-max rescale to [0, 1] over the training pool of oriented scores.
/// Confidence scores already live in [0, 1], so they pass through unscaled
/// (clamped); uncertainty scores are negated and rescaled so the mixture
/// always combines confidence-like quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxNorm {
    pub orientation: Polarity,
    pub lo: f64,
    pub hi: f64,
}

impl MinMaxNorm {
    /// Fit normalization bounds over the training pool of raw scores.
    pub fn fit(scores: &[f64], polarity: Polarity) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::InsufficientTrainingData(0));
        }
        match polarity {
            Polarity::Confidence => Ok(MinMaxNorm {
                orientation: polarity,
                lo: 0.0,
                hi: 1.0,
            }),
            Polarity::Uncertainty => {
                let oriented: Vec<f64> = scores.iter().map(|&s| orient(s, polarity)).collect();
                let lo = oriented.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = oriented.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Ok(MinMaxNorm {
                    orientation: polarity,
                    lo,
                    hi,
                })
            }
        }
    }

    /// Map a raw score into [0, 1]. A degenerate fitted range (all training
    /// scores equal) maps everything to 0.5.
    pub fn apply(&self, score: f64) -> f64 {
        let oriented = orient(score, self.orientation);
        if self.hi <= self.lo {
            return 0.5;
        }
        ((oriented - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }
}

/// A branch calibrator: either the label-free normalizer (strategy `none`)
/// or a fitted isotonic model. Both map a raw branch score to a value in
/// [0, 1] with orientation handled internally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BranchCalibrator {
    Normalizer(MinMaxNorm),
    Isotonic(IsotonicModel),
}

impl BranchCalibrator {
    pub fn apply(&self, raw_score: f64) -> f64 {
        match self {
            BranchCalibrator::Normalizer(n) => n.apply(raw_score),
            BranchCalibrator::Isotonic(m) => apply_isotonic(m, raw_score),
        }
    }

    pub fn orientation(&self) -> Polarity {
        match self {
            BranchCalibrator::Normalizer(n) => n.orientation,
            BranchCalibrator::Isotonic(m) => m.orientation,
        }
    }
}
