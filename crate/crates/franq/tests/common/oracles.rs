//! Brute-force reference implementations for the acceptance suite.
//!
//! Everything here is written with the most naive algorithm available —
//! repeated full scans, pairwise enumeration, direct counting — so the
//! results can be trusted as ground truth against the optimized library
//! code. None of it shares code with the crate under test.

/// O(n²) pool-adjacent-violators. Pools exact score ties into weighted
/// points, then repeatedly rescans the whole block list merging the first
/// adjacent violation, until the sequence is non-decreasing. Returns the
/// fitted probability for each input pair, in input order. Scores are
/// treated as already oriented (higher = more likely true, label 1 = true).
pub fn pava_fitted_values(pairs: &[(f64, u8)]) -> Vec<f64> {
    // Distinct scores ascending, each with the mean label and tie weight.
    let mut xs: Vec<f64> = pairs.iter().map(|&(s, _)| s).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    // Block = (covered scores, mean value, weight).
    let mut blocks: Vec<(Vec<f64>, f64, f64)> = xs
        .iter()
        .map(|&x| {
            let ys: Vec<f64> = pairs
                .iter()
                .filter(|&&(s, _)| s == x)
                .map(|&(_, y)| f64::from(y))
                .collect();
            let w = ys.len() as f64;
            (vec![x], ys.iter().sum::<f64>() / w, w)
        })
        .collect();
    loop {
        let mut merged = false;
        for i in 0..blocks.len().saturating_sub(1) {
            if blocks[i].1 > blocks[i + 1].1 {
                let (covered, mean, weight) = blocks.remove(i + 1);
                let a = &mut blocks[i];
                a.1 = (a.1 * a.2 + mean * weight) / (a.2 + weight);
                a.2 += weight;
                a.0.extend(covered);
                merged = true;
                break;
            }
        }
        if !merged {
            break;
        }
    }
    pairs
        .iter()
        .map(|&(s, _)| {
            blocks
                .iter()
                .find(|b| b.0.contains(&s))
                .map(|b| b.1)
                .expect("every score belongs to a block")
        })
        .collect()
}

fn count_pos(labels: &[u8]) -> usize {
    labels.iter().filter(|&&l| l == 1).count()
}

/// Average precision by rescanning the whole input at every distinct
/// threshold (descending). `None` when undefined (no positives).
pub fn pr_auc_oracle(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let n_pos = count_pos(labels);
    if scores.is_empty() || n_pos == 0 {
        return None;
    }
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.reverse();
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for &t in &thresholds {
        let tp = scores
            .iter()
            .zip(labels)
            .filter(|&(&s, &l)| s >= t && l == 1)
            .count();
        let predicted = scores.iter().filter(|&&s| s >= t).count();
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / predicted as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Some(ap)
}

/// Pairwise AUROC: fraction of (positive, negative) pairs ranked correctly,
/// ties worth half. `None` when undefined (single class).
pub fn auroc_oracle(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let n_pos = count_pos(labels);
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut wins = 0.0;
    for (i, (&sp, &lp)) in scores.iter().zip(labels).enumerate() {
        if lp != 1 {
            continue;
        }
        for (j, (&sn, &ln)) in scores.iter().zip(labels).enumerate() {
            if i == j || ln != 0 {
                continue;
            }
            if sp > sn {
                wins += 1.0;
            } else if sp == sn {
                wins += 0.5;
            }
        }
    }
    Some(wins / (n_pos as f64 * n_neg as f64))
}

/// Prediction-rejection ratio by direct curve construction. The expected
/// accuracy after rejecting the k highest scores is computed from scratch
/// for every k by counting scores above the cut and taking the expectation
/// over the tie group straddling it (random tie breaking). `None` when
/// undefined (single class or degenerate oracle area).
pub fn prr_oracle(scores: &[f64], labels: &[u8], max_reject: f64) -> Option<f64> {
    let n = scores.len();
    let n_pos = count_pos(labels);
    let n_neg = n - n_pos;
    if n == 0 || n_pos == 0 || n_neg == 0 {
        return None;
    }
    let k_max = (max_reject * n as f64).floor() as usize;

    let expected_rejected_pos = |k: usize| -> f64 {
        if k == 0 {
            return 0.0;
        }
        let mut sorted: Vec<f64> = scores.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let cut = sorted[k - 1];
        let above_pos = scores
            .iter()
            .zip(labels)
            .filter(|&(&s, &l)| s > cut && l == 1)
            .count() as f64;
        let above = scores.iter().filter(|&&s| s > cut).count();
        let group_size = scores.iter().filter(|&&s| s == cut).count() as f64;
        let group_pos = scores
            .iter()
            .zip(labels)
            .filter(|&(&s, &l)| s == cut && l == 1)
            .count() as f64;
        above_pos + (k - above) as f64 * group_pos / group_size
    };
    let method_acc = |k: usize| -> f64 {
        let rejected_neg = k as f64 - expected_rejected_pos(k);
        (n_neg as f64 - rejected_neg) / (n - k) as f64
    };
    let oracle_acc = |k: usize| -> f64 {
        let rejected_neg = (k - k.min(n_pos)) as f64;
        (n_neg as f64 - rejected_neg) / (n - k) as f64
    };
    let area = |f: &dyn Fn(usize) -> f64| -> f64 {
        (0..k_max).map(|k| (f(k) + f(k + 1)) / 2.0 / n as f64).sum()
    };
    let a_method = area(&method_acc);
    let a_oracle = area(&oracle_acc);
    let a_random = (n_neg as f64 / n as f64) * (k_max as f64 / n as f64);
    if a_oracle == a_random {
        return None;
    }
    Some((a_method - a_random) / (a_oracle - a_random))
}
