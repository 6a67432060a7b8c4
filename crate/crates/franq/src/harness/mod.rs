//! End-to-end orchestration: generation, scoring, corruption experiments,
//! evaluation, and report emission — the batch pipeline behind the CLI.

pub mod corrupt;
pub mod pipeline;
pub mod report;

pub use corrupt::{corrupt_factual, shuffle_retrievals};
pub use pipeline::{
    annotate_claims, cmd_fit, cmd_generate, cmd_score, judge_dataset, judge_short_form,
    load_questions, score_franq, GenerateParams, QuestionInput, ScoreResources,
};
pub use report::{cmd_eval, evaluate_methods, group_of, EvalParams, Report, ReportRow};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

use crate::error::Result;
use crate::franq::{FranqConfig, FranqModel};

/// Everything needed to reproduce a run bit-exactly with a warm replay
/// cache: tool version, seed, configuration, input digests, and the fitted
/// calibrators. Deliberately carries no timestamps or host details so that
/// reruns of the same inputs write byte-identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dataset_sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scores_sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config: Option<FranqConfig>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub model: Option<FranqModel>,
    /// Free-form scalar parameters (metric caps, resample counts, ...).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, String>,
    /// Fit-time fallbacks and other warnings worth surfacing.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        RunManifest {
            tool: "franq".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            dataset_sha256: None,
            scores_sha256: None,
            config: None,
            model: None,
            params: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.params.insert(key.into(), value.to_string());
        self
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Hex SHA-256 of arbitrary bytes, used for manifest input digests.
pub fn digest_bytes(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}
