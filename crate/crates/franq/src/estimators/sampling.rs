//! Sampling-diversity estimators: lexical similarity, entailment-based
//! clustering, and semantic entropy.
//!
//! All of these operate on a *diversity pool*: the stochastic samples for a
//! record with the greedy answer appended as the final member, so the scored
//! answer always participates in the diversity measurement.

use crate::backends::AlignBackend;
use crate::data::{GenerationRecord, SampleInfo};
use crate::error::{Error, Result};
use crate::estimators::spectral::SimilarityMatrix;

/// Pairwise similarity source for diversity estimators.
pub enum SimilarityProvider<'a> {
    /// LCS-based lexical F-measure; symmetric, needs no backend.
    Lexical,
    /// Entailment scores from an alignment backend, averaged over both
    /// directions to symmetrize.
    Nli(&'a dyn AlignBackend),
}

impl SimilarityProvider<'_> {
    fn score(&self, premise: &str, hypothesis: &str) -> Result<f64> {
        match self {
            SimilarityProvider::Lexical => Ok(lexical_similarity(premise, hypothesis)),
            SimilarityProvider::Nli(backend) => backend.score(premise, hypothesis),
        }
    }
}

/// Longest-common-subsequence F-measure over whitespace tokens:
/// `2 * LCS(a, b) / (|a| + |b|)`. Two empty strings are fully similar.
pub fn lexical_similarity(a: &str, b: &str) -> f64 {
    let ta: Vec<&str> = a.split_whitespace().collect();
    let tb: Vec<&str> = b.split_whitespace().collect();
    if ta.is_empty() && tb.is_empty() {
        return 1.0;
    }
    if ta.is_empty() || tb.is_empty() {
        return 0.0;
    }
    let lcs = lcs_length(&ta, &tb);
    2.0 * lcs as f64 / (ta.len() + tb.len()) as f64
}

/// Classic two-row dynamic program for LCS length.
fn lcs_length(a: &[&str], b: &[&str]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for &wa in a {
        for (j, &wb) in b.iter().enumerate() {
            cur[j + 1] = if wa == wb {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// The diversity pool for a record: samples followed by the greedy answer
/// (rebuilt from the recorded tokens). Errors with [`Error::TooFewSamples`]
/// if the pool would hold fewer than two members.
pub fn sample_pool(record: &GenerationRecord) -> Result<Vec<SampleInfo>> {
    if record.tokens.is_empty() {
        return Err(Error::NoTokens(record.record_id.clone()));
    }
    let mut pool = record.samples.clone();
    pool.push(SampleInfo {
        text: record.answer_text.clone(),
        total_logprob: record.tokens.iter().map(|t| t.logprob).sum(),
        token_count: record.tokens.len(),
    });
    if pool.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            have: pool.len(),
        });
    }
    Ok(pool)
}

/// Pairwise similarity matrix over a set of texts.
pub fn pairwise_similarity(
    texts: &[&str],
    provider: &SimilarityProvider<'_>,
) -> Result<SimilarityMatrix> {
    SimilarityMatrix::from_fn(texts.len(), |i, j| provider.score(texts[i], texts[j]))
}

/// Lexical-similarity confidence: mean off-diagonal LCS F-measure over the
/// diversity pool. High when the model keeps producing the same words.
pub fn lexsim(record: &GenerationRecord) -> Result<f64> {
    let pool = sample_pool(record)?;
    let texts: Vec<&str> = pool.iter().map(|s| s.text.as_str()).collect();
    let w = pairwise_similarity(&texts, &SimilarityProvider::Lexical)?;
    Ok(w.mean_off_diagonal())
}

/// Greedy semantic clustering: each text joins the first existing cluster
/// whose representative (first member) it mutually entails above
/// `threshold`, else it opens a new cluster. Returns index sets; every input
/// lands in exactly one non-empty cluster.
pub fn cluster_samples(
    texts: &[&str],
    provider: &SimilarityProvider<'_>,
    threshold: f64,
) -> Result<Vec<Vec<usize>>> {
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (i, &text) in texts.iter().enumerate() {
        let mut placed = false;
        for cluster in clusters.iter_mut() {
            let rep = texts[cluster[0]];
            let forward = provider.score(rep, text)?;
            let backward = provider.score(text, rep)?;
            if forward > threshold && backward > threshold {
                cluster.push(i);
                placed = true;
                break;
            }
        }
        if !placed {
            clusters.push(vec![i]);
        }
    }
    Ok(clusters)
}

/// Length-normalized sample mass: `exp(total_logprob / token_count)`,
/// i.e. the geometric-mean token probability. Zero-token samples get the
/// minimal positive mass via `exp(total_logprob)` with count clamped to 1.
fn sample_mass(sample: &SampleInfo) -> f64 {
    let count = sample.token_count.max(1) as f64;
    (sample.total_logprob / count).exp()
}

/// Semantic entropy over clustered samples: renormalize the
/// length-normalized sample masses, sum them per cluster, and return
/// `-sum_C p(C) ln p(C)`. One cluster gives exactly 0; `m` equally likely
/// singleton clusters give `ln m`.
pub fn semantic_entropy(pool: &[SampleInfo], clusters: &[Vec<usize>]) -> Result<f64> {
    if pool.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            have: pool.len(),
        });
    }
    let masses: Vec<f64> = pool.iter().map(sample_mass).collect();
    let total: f64 = masses.iter().sum();
    let mut entropy = 0.0;
    for cluster in clusters {
        if cluster.is_empty() {
            return Err(Error::EmptyCluster);
        }
        let p: f64 = cluster.iter().map(|&i| masses[i] / total).sum();
        if p > 0.0 {
            entropy -= p * p.ln();
        }
    }
    Ok(entropy)
}

/// Semantic entropy of a record's diversity pool, clustering with the given
/// provider and entailment threshold.
pub fn semantic_entropy_of_record(
    record: &GenerationRecord,
    provider: &SimilarityProvider<'_>,
    threshold: f64,
) -> Result<f64> {
    let pool = sample_pool(record)?;
    let texts: Vec<&str> = pool.iter().map(|s| s.text.as_str()).collect();
    let clusters = cluster_samples(&texts, provider, threshold)?;
    semantic_entropy(&pool, &clusters)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(text: &str, total_logprob: f64, token_count: usize) -> SampleInfo {
        SampleInfo {
            text: text.into(),
            total_logprob,
            token_count,
        }
    }

    #[test]
    fn lexical_similarity_known_values() {
        assert_eq!(lexical_similarity("a b c", "a b c"), 1.0);
        assert_eq!(lexical_similarity("a b", "c d"), 0.0);
        // LCS("a b c", "a c") = 2 -> 2*2/(3+2) = 0.8.
        assert!((lexical_similarity("a b c", "a c") - 0.8).abs() < 1e-15);
        assert_eq!(lexical_similarity("", ""), 1.0);
        assert_eq!(lexical_similarity("a", ""), 0.0);
    }

    #[test]
    fn lexical_similarity_is_order_sensitive_but_symmetric() {
        let s1 = lexical_similarity("paris is the capital", "the capital is paris");
        let s2 = lexical_similarity("the capital is paris", "paris is the capital");
        assert!((s1 - s2).abs() < 1e-15);
        assert!(s1 < 1.0);
    }

    #[test]
    fn clustering_groups_identical_texts() {
        let texts = ["the sky is blue", "the sky is blue", "grass is green"];
        let clusters =
            cluster_samples(&texts, &SimilarityProvider::Lexical, 0.9).unwrap();
        assert_eq!(clusters, vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn clustering_requires_mutual_entailment() {
        // Asymmetric provider: always entails forward, never backward.
        struct OneWay;
        impl AlignBackend for OneWay {
            fn score(&self, premise: &str, _hypothesis: &str) -> Result<f64> {
                Ok(if premise == "a" { 1.0 } else { 0.0 })
            }
        }
        let texts = ["a", "b"];
        let clusters =
            cluster_samples(&texts, &SimilarityProvider::Nli(&OneWay), 0.5).unwrap();
        assert_eq!(clusters.len(), 2);
    }

    #[test]
    fn semantic_entropy_single_cluster_is_zero() {
        let pool = vec![sample("x", -1.0, 2), sample("x", -3.0, 4)];
        let se = semantic_entropy(&pool, &[vec![0, 1]]).unwrap();
        assert_eq!(se, 0.0);
    }

    #[test]
    fn semantic_entropy_uniform_singletons_is_ln_m() {
        for m in 2..=6 {
            let pool: Vec<SampleInfo> =
                (0..m).map(|i| sample(&format!("t{i}"), -2.0, 2)).collect();
            let clusters: Vec<Vec<usize>> = (0..m).map(|i| vec![i]).collect();
            let se = semantic_entropy(&pool, &clusters).unwrap();
            assert!((se - (m as f64).ln()).abs() < 1e-12, "m={m} gave {se}");
        }
    }

    #[test]
    fn semantic_entropy_frozen_three_quarters_split() {
        // Masses 3x and 1x -> p = {0.75, 0.25};
        // -0.75 ln 0.75 - 0.25 ln 0.25 = 0.5623351446188083.
        let heavy = 3.0f64.ln(); // mass exp(ln 3)/1 token = 3
        let pool = vec![sample("a", heavy, 1), sample("b", 0.0, 1)];
        let se = semantic_entropy(&pool, &[vec![0], vec![1]]).unwrap();
        assert!((se - 0.5623351446188083).abs() < 1e-15);
    }

    #[test]
    fn semantic_entropy_uses_length_normalized_mass() {
        // Same total logprob, different lengths: longer sample has higher
        // geometric-mean probability, so the split is not uniform.
        let pool = vec![sample("a", -2.0, 1), sample("b", -2.0, 4)];
        let se = semantic_entropy(&pool, &[vec![0], vec![1]]).unwrap();
        assert!(se < 2.0f64.ln());
        assert!(se > 0.0);
    }

    #[test]
    fn empty_cluster_is_rejected() {
        let pool = vec![sample("a", -1.0, 1), sample("b", -1.0, 1)];
        assert!(matches!(
            semantic_entropy(&pool, &[vec![0, 1], vec![]]),
            Err(Error::EmptyCluster)
        ));
    }

    #[test]
    fn pool_appends_greedy_answer_last() {
        use crate::data::{Passage, Split, TokenInfo};
        use std::collections::BTreeMap;
        let record = GenerationRecord {
            record_id: "r".into(),
            question: "q".into(),
            passages: vec![Passage {
                title: String::new(),
                content: "c".into(),
                source_id: String::new(),
            }],
            answer_text: " hi".into(),
            tokens: vec![TokenInfo {
                text: " hi".into(),
                logprob: -0.5,
                alternatives: vec![(" hi".into(), -0.5)],
            }],
            samples: vec![sample("other", -1.0, 1)],
            claims: vec![],
            external_scores: BTreeMap::new(),
            gold_answer: None,
            split: Split::Unassigned,
            schema: crate::data::SCHEMA_VERSION,
            original_passages: None,
        };
        let pool = sample_pool(&record).unwrap();
        assert_eq!(pool.len(), 2);
        assert_eq!(pool[1].text, " hi");
        assert_eq!(pool[1].total_logprob, -0.5);
        // No stochastic samples -> pool of one -> too few.
        let mut lonely = record.clone();
        lonely.samples.clear();
        assert!(matches!(
            sample_pool(&lonely),
            Err(Error::TooFewSamples { needed: 2, have: 1 })
        ));
    }

    #[test]
    fn lexsim_on_identical_pool_is_one() {
        use crate::data::{Passage, Split, TokenInfo};
        use std::collections::BTreeMap;
        let record = GenerationRecord {
            record_id: "r".into(),
            question: "q".into(),
            passages: vec![Passage {
                title: String::new(),
                content: "c".into(),
                source_id: String::new(),
            }],
            answer_text: "same answer".into(),
            tokens: vec![TokenInfo {
                text: "same answer".into(),
                logprob: -0.5,
                alternatives: vec![("same answer".into(), -0.5)],
            }],
            samples: vec![sample("same answer", -1.0, 2); 3],
            claims: vec![],
            external_scores: BTreeMap::new(),
            gold_answer: None,
            split: Split::Unassigned,
            schema: crate::data::SCHEMA_VERSION,
            original_passages: None,
        };
        assert!((lexsim(&record).unwrap() - 1.0).abs() < 1e-15);
    }
}
