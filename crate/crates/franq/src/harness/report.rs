//! Evaluation and reporting: metric tables over scored datasets, grouped by
//! method family, with bootstrap standard errors and reproducible artifacts.

use sha2::{Digest, Sha256};
use std::path::Path;

use crate::calibration::Polarity;
use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::estimators::{names, ScoreTable};
use crate::harness::{digest_bytes, RunManifest};
use crate::metrics::{bootstrap_stderr, to_detection_scores, Metric, MetricParams};

/// Knobs for the evaluation stage.
#[derive(Debug, Clone)]
pub struct EvalParams {
    pub metrics: Vec<Metric>,
    pub metric_params: MetricParams,
    /// Bootstrap resamples per cell; below 2 the stderr column is omitted.
    pub resamples: usize,
    pub seed: u64,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            metrics: Metric::ALL.to_vec(),
            metric_params: MetricParams::default(),
            resamples: 200,
            seed: 0,
        }
    }
}

/// One cell of the evaluation table.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub group: String,
    pub method: String,
    pub metric: Metric,
    pub value: f64,
    pub stderr: Option<f64>,
}

/// Evaluation results in render order.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

/// Section order for reports.
pub const GROUP_ORDER: [&str; 4] = [
    "General Baselines",
    "RAG-Specific Baselines",
    "XGBoost (ingested)",
    "FRANQ",
];

/// Method-family group a method is reported under.
pub fn group_of(method: &str) -> &'static str {
    if method == names::FRANQ {
        "FRANQ"
    } else if method.starts_with("xgb_") {
        "XGBoost (ingested)"
    } else if method == names::ALIGNSCORE || method == names::PARAMETRIC_KNOWLEDGE {
        "RAG-Specific Baselines"
    } else {
        "General Baselines"
    }
}

/// Per-cell bootstrap seed, derived from the base seed and the cell identity
/// so every (method, metric) pair resamples independently yet reproducibly.
fn derived_seed(base: u64, method: &str, metric: Metric) -> u64 {
    let digest = Sha256::digest(format!("{method}/{}", metric.id()).as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    base ^ u64::from_be_bytes(bytes)
}

/// Evaluate each method on the labeled claims of the evaluation split (the
/// test records when a train split exists, all records otherwise).
///
/// Ranking metrics run on detection scores (positive class = factually
/// false). ECE runs on the raw scores of confidence-polarity methods only;
/// uncertainty scores are not probabilities, so their ECE cells are skipped.
pub fn evaluate_methods(
    data: &Dataset,
    table: &ScoreTable,
    methods: &[String],
    params: &EvalParams,
) -> Result<Report> {
    let use_test = data.has_train_split();
    let eligible: Vec<(&str, u8)> = data
        .records
        .iter()
        .filter(|r| !use_test || r.split == Split::Test)
        .flat_map(|r| r.claims.iter())
        .filter_map(|c| c.factuality_label.as_binary().map(|b| (c.claim_id.as_str(), b)))
        .collect();
    if eligible.is_empty() {
        return Err(Error::BadEvalInput(
            "no labeled claims in the evaluation split".into(),
        ));
    }

    let mut rows = Vec::new();
    for method in methods {
        let polarity = table.polarity(method)?;
        let mut raw = Vec::with_capacity(eligible.len());
        for (claim_id, _) in &eligible {
            raw.push(table.require(method, claim_id)?);
        }
        let truth: Vec<u8> = eligible.iter().map(|&(_, b)| b).collect();
        let detect_scores = to_detection_scores(&raw, polarity);
        let detect_labels: Vec<u8> = truth.iter().map(|&b| 1 - b).collect();
        for &metric in &params.metrics {
            let (scores, labels): (&[f64], &[u8]) = match metric {
                Metric::Ece => {
                    if polarity != Polarity::Confidence {
                        continue;
                    }
                    (&raw, &truth)
                }
                _ => (&detect_scores, &detect_labels),
            };
            let value = metric.compute(scores, labels, &params.metric_params)?;
            let stderr = if params.resamples >= 2 {
                Some(bootstrap_stderr(
                    metric,
                    scores,
                    labels,
                    &params.metric_params,
                    params.resamples,
                    derived_seed(params.seed, method, metric),
                )?)
            } else {
                None
            };
            rows.push(ReportRow {
                group: group_of(method).to_string(),
                method: method.clone(),
                metric,
                value,
                stderr,
            });
        }
    }
    // Stable sort: section order first, method/metric order preserved inside.
    rows.sort_by_key(|r| {
        GROUP_ORDER
            .iter()
            .position(|g| *g == r.group)
            .unwrap_or(GROUP_ORDER.len())
    });
    Ok(Report { rows })
}

impl Report {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("group,method,metric,value,stderr\n");
        for row in &self.rows {
            let stderr = match row.stderr {
                Some(s) => format!("{s:.3}"),
                None => String::new(),
            };
            out.push_str(&format!(
                "{},{},{},{:.3},{}\n",
                row.group,
                row.method,
                row.metric.id(),
                row.value,
                stderr
            ));
        }
        out
    }

    /// Parse a `report.csv` produced by [`Report::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "group,method,metric,value,stderr")) => {}
            other => {
                return Err(Error::MalformedLine {
                    line: 1,
                    reason: format!("expected report header, got {:?}", other.map(|(_, l)| l)),
                })
            }
        }
        let mut rows = Vec::new();
        for (index, line) in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let malformed = |reason: String| Error::MalformedLine {
                line: index + 1,
                reason,
            };
            if fields.len() != 5 {
                return Err(malformed(format!("expected 5 fields, got {}", fields.len())));
            }
            let value: f64 = fields[3]
                .parse()
                .map_err(|e| malformed(format!("bad value: {e}")))?;
            let stderr = if fields[4].is_empty() {
                None
            } else {
                Some(
                    fields[4]
                        .parse()
                        .map_err(|e| malformed(format!("bad stderr: {e}")))?,
                )
            };
            rows.push(ReportRow {
                group: fields[0].to_string(),
                method: fields[1].to_string(),
                metric: Metric::parse(fields[2])?,
                value,
                stderr,
            });
        }
        Ok(Report { rows })
    }

    /// Plain-text table, one section per group, one method per line, metric
    /// columns in first-appearance order. Skipped cells render as `-`.
    pub fn to_text(&self) -> String {
        let mut metrics: Vec<Metric> = Vec::new();
        for row in &self.rows {
            if !metrics.contains(&row.metric) {
                metrics.push(row.metric);
            }
        }
        let method_width = self
            .rows
            .iter()
            .map(|r| r.method.len())
            .chain(std::iter::once("method".len()))
            .max()
            .unwrap_or(6);
        let mut out = String::new();
        for group in GROUP_ORDER {
            let section: Vec<&ReportRow> =
                self.rows.iter().filter(|r| r.group == group).collect();
            if section.is_empty() {
                continue;
            }
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(&format!("== {group} ==\n"));
            out.push_str(&format!("{:<method_width$}", "method"));
            for metric in &metrics {
                out.push_str(&format!("{:>10}", metric.display_name()));
            }
            out.push('\n');
            let mut methods: Vec<&str> = Vec::new();
            for row in &section {
                if !methods.contains(&row.method.as_str()) {
                    methods.push(&row.method);
                }
            }
            for method in methods {
                out.push_str(&format!("{method:<method_width$}"));
                for metric in &metrics {
                    let cell = section
                        .iter()
                        .find(|r| r.method == method && r.metric == *metric)
                        .map(|r| format!("{:.3}", r.value))
                        .unwrap_or_else(|| "-".to_string());
                    out.push_str(&format!("{cell:>10}"));
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Evaluate and write the full artifact set into `out_dir`: `report.csv`,
/// `report.txt`, and `manifest.json` with content digests of the dataset and
/// score table. Output bytes are a pure function of the inputs, so reruns
/// are byte-identical.
pub fn cmd_eval(
    data: &Dataset,
    table: &ScoreTable,
    methods: &[String],
    params: &EvalParams,
    out_dir: &Path,
    mut manifest: RunManifest,
) -> Result<Report> {
    let report = evaluate_methods(data, table, methods, params)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::BadPath {
        path: out_dir.display().to_string(),
        reason: e.to_string(),
    })?;
    let mut dataset_bytes = Vec::new();
    for record in &data.records {
        serde_json::to_writer(&mut dataset_bytes, record)?;
        dataset_bytes.push(b'\n');
    }
    manifest.dataset_sha256 = Some(digest_bytes(&dataset_bytes));
    manifest.scores_sha256 = Some(digest_bytes(table.to_csv().as_bytes()));
    manifest
        .param("resamples", params.resamples)
        .param("metrics", params.metrics.iter().map(|m| m.id()).collect::<Vec<_>>().join("+"));
    std::fs::write(out_dir.join("report.csv"), report.to_csv())?;
    std::fs::write(out_dir.join("report.txt"), report.to_text())?;
    manifest.write(&out_dir.join("manifest.json"))?;
    Ok(report)
}
