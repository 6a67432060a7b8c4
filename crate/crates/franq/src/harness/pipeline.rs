//! Pipeline stages behind the CLI: answer generation, claim construction,
//! estimator scoring, short-form judging, and mixture fitting.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::io::BufRead;
use std::path::Path;

use crate::backends::{
    generate_answer, map_concurrent, sample_answers, AlignBackend, DecodeParams, LlmBackend,
};
use crate::calibration::Polarity;
use crate::data::{
    split_dataset, Claim, Dataset, FactualityLabel, GenerationRecord, Passage, Split, TaskMode,
};
use crate::error::{Error, Result};
use crate::estimators::sampling::SimilarityProvider;
use crate::estimators::{self, ingest_external, names, ScoreTable};
use crate::faithfulness;
use crate::franq::{fit_franq, score_dataset, FranqConfig, FranqModel};
use crate::prompts::{self, JudgeVerdict};

/// One generation request: a question with its retrieved passages.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionInput {
    pub question: String,
    #[serde(default)]
    pub passages: Vec<Passage>,
    #[serde(default)]
    pub gold_answer: Option<String>,
}

/// Load generation inputs from JSONL, one question per line.
pub fn load_questions(path: &Path) -> Result<Vec<QuestionInput>> {
    let file = std::fs::File::open(path).map_err(|e| Error::BadPath {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (index, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let q: QuestionInput =
            serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
                line: index + 1,
                reason: e.to_string(),
            })?;
        out.push(q);
    }
    Ok(out)
}

/// Knobs for the generation stage.
#[derive(Debug, Clone)]
pub struct GenerateParams {
    /// Stochastic samples per question for the diversity pool.
    pub samples: usize,
    pub sample_temperature: f64,
    /// Long-form only: decompose the answer into claims and map spans.
    pub decompose: bool,
    /// Annotate claims with faithfulness/factuality labels via the LLM.
    pub annotate: bool,
    pub concurrency: usize,
}

impl Default for GenerateParams {
    fn default() -> Self {
        GenerateParams {
            samples: 10,
            sample_temperature: 1.0,
            decompose: true,
            annotate: false,
            concurrency: 8,
        }
    }
}

/// Decompose an answer into atomic claims and map each claim to its token
/// span. Claims whose span cannot be located are dropped with a warning, so
/// the returned list may be shorter than the decomposition.
fn decompose_record_claims(
    backend: &dyn LlmBackend,
    record_id: &str,
    answer_text: &str,
    tokens: &[crate::data::TokenInfo],
) -> Result<Vec<Claim>> {
    let greedy = DecodeParams::default();
    let prompt = prompts::render_claim_decomposition(answer_text)?;
    let response = backend.complete(&prompt, &greedy)?.text;
    let texts = prompts::parse_claim_response(&response)?;
    let mut claims = Vec::with_capacity(texts.len());
    let mut kept = 0;
    for text in texts {
        let span_prompt = prompts::render_span_identification(answer_text, &text)?;
        let span_response = backend.complete(&span_prompt, &greedy)?.text;
        match prompts::parse_span_response(&span_response, tokens) {
            Ok(span) => {
                claims.push(Claim {
                    claim_id: format!("{record_id}-c{kept}"),
                    text,
                    span,
                    factuality_label: FactualityLabel::Unknown,
                    faithfulness_label: crate::data::FaithfulnessLabel::Unknown,
                    faithfulness_score: None,
                });
                kept += 1;
            }
            Err(Error::NoSpanFound) => {
                log::warn!("record {record_id}: dropping claim with no identifiable span: {text:?}");
            }
            Err(e) => return Err(e),
        }
    }
    Ok(claims)
}

/// Generate one record per question: greedy answer with token logprobs, a
/// sampled diversity pool, and (long-form) decomposed claims with spans.
pub fn cmd_generate(
    questions: &[QuestionInput],
    task: TaskMode,
    backend: &dyn LlmBackend,
    params: &GenerateParams,
) -> Result<Dataset> {
    let template = prompts::generation_template(task);
    let indexed: Vec<(usize, &QuestionInput)> = questions.iter().enumerate().collect();
    let results = map_concurrent(&indexed, params.concurrency, |&(index, q)| {
        let record_id = format!("r{index:04}");
        let greedy = DecodeParams::default();
        let (answer_text, tokens) =
            generate_answer(backend, &q.question, &q.passages, template, &greedy)?;
        let samples = sample_answers(
            backend,
            &q.question,
            &q.passages,
            template,
            &DecodeParams::sampling(params.sample_temperature),
            params.samples,
        )?;
        let claims = match task {
            TaskMode::ShortForm => vec![Claim {
                claim_id: format!("{record_id}-c0"),
                text: answer_text.trim().to_string(),
                span: (0..tokens.len()).collect(),
                factuality_label: FactualityLabel::Unknown,
                faithfulness_label: crate::data::FaithfulnessLabel::Unknown,
                faithfulness_score: None,
            }],
            TaskMode::LongForm => {
                if params.decompose {
                    decompose_record_claims(backend, &record_id, &answer_text, &tokens)?
                } else {
                    Vec::new()
                }
            }
        };
        Ok(GenerationRecord {
            record_id,
            question: q.question.clone(),
            passages: q.passages.clone(),
            answer_text,
            tokens,
            samples,
            claims,
            external_scores: Default::default(),
            gold_answer: q.gold_answer.clone(),
            split: Split::Unassigned,
            schema: crate::data::SCHEMA_VERSION,
            original_passages: None,
        })
    });
    let mut records = Vec::with_capacity(results.len());
    for r in results {
        records.push(r?);
    }
    let data = Dataset::new(records, task)?;
    if params.annotate {
        annotate_claims(backend, &data)
    } else {
        Ok(data)
    }
}

/// Label every claim via the annotation prompt: faithfulness against the
/// record's retrievals and context-independent factuality.
pub fn annotate_claims(backend: &dyn LlmBackend, data: &Dataset) -> Result<Dataset> {
    let greedy = DecodeParams::default();
    let mut out = data.clone();
    for record in &mut out.records {
        if record.claims.is_empty() {
            continue;
        }
        let context = faithfulness::passage_context(record)?;
        for claim in &mut record.claims {
            let prompt = prompts::render_annotation(&context, &claim.text)?;
            let response = backend.complete(&prompt, &greedy)?.text;
            let (faith, fact) = prompts::parse_annotation_response(&response)?;
            claim.faithfulness_label = faith;
            claim.factuality_label = fact;
        }
    }
    Ok(out)
}

/// Judge a short-form answer against the gold answer. An exact match (after
/// trimming) is correct without consulting any backend; everything else goes
/// through the judge prompt.
pub fn judge_short_form(
    backend: Option<&dyn LlmBackend>,
    question: &str,
    generated: &str,
    gold: &str,
) -> Result<JudgeVerdict> {
    if generated.trim() == gold.trim() {
        return Ok(JudgeVerdict::Correct);
    }
    let backend = backend.ok_or_else(|| {
        Error::BackendUnreachable("short-form judging needs an LLM backend".into())
    })?;
    let prompt = prompts::render_judge(question, gold, generated)?;
    let response = backend.complete(&prompt, &DecodeParams::default())?.text;
    prompts::parse_judge_response(&response)
}

/// Set short-form factuality labels from the judge: correct → true,
/// incorrect → false, not attempted → unverifiable (excluded from
/// evaluation). Records without a gold answer are left unlabeled.
pub fn judge_dataset(backend: Option<&dyn LlmBackend>, data: &Dataset) -> Result<Dataset> {
    let mut out = data.clone();
    for record in &mut out.records {
        let Some(gold) = record.gold_answer.clone() else {
            log::warn!("record {} has no gold answer; leaving it unlabeled", record.record_id);
            continue;
        };
        let verdict = judge_short_form(backend, &record.question, &record.answer_text, &gold)?;
        let label = match verdict {
            JudgeVerdict::Correct => FactualityLabel::True,
            JudgeVerdict::Incorrect => FactualityLabel::False,
            JudgeVerdict::NotAttempted => FactualityLabel::Unverifiable,
        };
        for claim in &mut record.claims {
            claim.factuality_label = label;
        }
    }
    Ok(out)
}

/// Backends and knobs available to the scoring stage.
pub struct ScoreResources<'a> {
    pub llm: Option<&'a dyn LlmBackend>,
    pub align: Option<&'a dyn AlignBackend>,
    /// Mutual-entailment threshold for semantic clustering.
    pub entail_threshold: f64,
    pub concurrency: usize,
}

impl Default for ScoreResources<'_> {
    fn default() -> Self {
        ScoreResources {
            llm: None,
            align: None,
            entail_threshold: 0.5,
            concurrency: 8,
        }
    }
}

impl<'a> ScoreResources<'a> {
    fn need_llm(&self, what: &str) -> Result<&'a dyn LlmBackend> {
        self.llm
            .ok_or_else(|| Error::BackendUnreachable(format!("{what} needs an LLM backend")))
    }

    /// Similarity provider for diversity estimators: NLI entailment when an
    /// alignment backend is configured, lexical overlap otherwise.
    fn provider(&self) -> SimilarityProvider<'a> {
        match self.align {
            Some(align) => SimilarityProvider::Nli(align),
            None => SimilarityProvider::Lexical,
        }
    }
}

/// Estimators that don't need samples, spans beyond the record, or backends:
/// computable from the recorded tokens alone.
pub const OFFLINE_ESTIMATORS: [&str; 5] = [
    names::MSP,
    names::CLAIM_PROB,
    names::PERPLEXITY,
    names::MEAN_TOKEN_ENTROPY,
    names::MAX_TOKEN_ENTROPY,
];

fn compute_record_scores(
    record: &GenerationRecord,
    task: TaskMode,
    wanted: &BTreeSet<&str>,
    resources: &ScoreResources<'_>,
) -> Result<Vec<(String, String, f64)>> {
    let mut out: Vec<(String, String, f64)> = Vec::new();
    let record_level = |name: &str, value: f64, out: &mut Vec<(String, String, f64)>| {
        for claim in &record.claims {
            out.push((name.to_string(), claim.claim_id.clone(), value));
        }
    };

    // --- token-logprob family ---
    if wanted.contains(names::MSP) {
        let v = estimators::logprob::max_sequence_probability(record)?;
        record_level(names::MSP, v, &mut out);
    }
    for claim in &record.claims {
        if wanted.contains(names::CLAIM_PROB) {
            out.push((
                names::CLAIM_PROB.into(),
                claim.claim_id.clone(),
                estimators::logprob::claim_probability(record, claim)?,
            ));
        }
        if wanted.contains(names::PERPLEXITY) {
            out.push((
                names::PERPLEXITY.into(),
                claim.claim_id.clone(),
                estimators::logprob::perplexity(record, Some(claim))?,
            ));
        }
        if wanted.contains(names::MEAN_TOKEN_ENTROPY) {
            out.push((
                names::MEAN_TOKEN_ENTROPY.into(),
                claim.claim_id.clone(),
                estimators::logprob::token_entropy(
                    record,
                    Some(claim),
                    estimators::logprob::EntropyAgg::Mean,
                )?,
            ));
        }
        if wanted.contains(names::MAX_TOKEN_ENTROPY) {
            out.push((
                names::MAX_TOKEN_ENTROPY.into(),
                claim.claim_id.clone(),
                estimators::logprob::token_entropy(
                    record,
                    Some(claim),
                    estimators::logprob::EntropyAgg::Max,
                )?,
            ));
        }
    }

    // --- backend-assisted claim-level estimators ---
    if wanted.contains(names::PTRUE) {
        let llm = resources.need_llm(names::PTRUE)?;
        for claim in &record.claims {
            out.push((
                names::PTRUE.into(),
                claim.claim_id.clone(),
                estimators::ptrue::p_true(llm, &record.question, &claim.text)?,
            ));
        }
    }
    if wanted.contains(names::PARAMETRIC_KNOWLEDGE) {
        let llm = resources.need_llm(names::PARAMETRIC_KNOWLEDGE)?;
        let logprobs = estimators::logprob::parametric_token_logprobs(llm, record, task)?;
        for claim in &record.claims {
            out.push((
                names::PARAMETRIC_KNOWLEDGE.into(),
                claim.claim_id.clone(),
                estimators::logprob::parametric_knowledge_from_logprobs(&logprobs, claim)?,
            ));
        }
    }
    if wanted.contains(names::ALIGNSCORE) {
        for claim in &record.claims {
            let p = faithfulness::faithfulness_probability(record, claim, task, resources.align)?;
            out.push((names::ALIGNSCORE.into(), claim.claim_id.clone(), p));
        }
    }

    // --- sampling-diversity estimators (record level) ---
    let wants_matrix = wanted.contains(names::DEGMAT) || wanted.contains(names::EIGV);
    if wanted.contains(names::LEXSIM) {
        record_level(names::LEXSIM, estimators::sampling::lexsim(record)?, &mut out);
    }
    if wants_matrix || wanted.contains(names::SEMANTIC_ENTROPY) {
        let provider = resources.provider();
        let pool = estimators::sampling::sample_pool(record)?;
        let texts: Vec<&str> = pool.iter().map(|s| s.text.as_str()).collect();
        if wants_matrix {
            let w = estimators::sampling::pairwise_similarity(&texts, &provider)?;
            if wanted.contains(names::DEGMAT) {
                record_level(
                    names::DEGMAT,
                    estimators::spectral::degree_matrix_uncertainty(&w),
                    &mut out,
                );
            }
            if wanted.contains(names::EIGV) {
                record_level(
                    names::EIGV,
                    estimators::spectral::sum_of_eigenvalues(&w)?,
                    &mut out,
                );
            }
        }
        if wanted.contains(names::SEMANTIC_ENTROPY) {
            let clusters = estimators::sampling::cluster_samples(
                &texts,
                &provider,
                resources.entail_threshold,
            )?;
            record_level(
                names::SEMANTIC_ENTROPY,
                estimators::sampling::semantic_entropy(&pool, &clusters)?,
                &mut out,
            );
        }
    }
    Ok(out)
}

/// Compute the requested estimators for every claim.
///
/// Native estimators are computed here; registered external estimators
/// (`ccp`, `sentence_sar`, `xgb_*`) are ingested from the records'
/// `external_scores` maps. When `alignscore` is requested the returned
/// dataset carries the alignment probabilities as `faithfulness_score` on
/// every claim (computing them only once).
pub fn cmd_score(
    data: &Dataset,
    estimator_list: &[String],
    resources: &ScoreResources<'_>,
) -> Result<(Dataset, ScoreTable)> {
    let mut native: BTreeSet<&str> = BTreeSet::new();
    let mut external: Vec<String> = Vec::new();
    for name in estimator_list {
        match estimators::default_polarity(name) {
            None => return Err(Error::UnknownEstimator(name.clone())),
            Some(_) if name == names::FRANQ => {
                return Err(Error::UnknownEstimator(
                    "franq is produced by fit + score-franq, not by score".into(),
                ))
            }
            Some(_) if estimators::is_native(name) => {
                native.insert(name.as_str());
            }
            Some(_) => external.push(name.clone()),
        }
    }

    // Fill faithfulness scores once if alignment scoring is involved.
    let data = if native.contains(names::ALIGNSCORE)
        && data.claims().any(|(_, c)| c.faithfulness_score.is_none())
    {
        let align = resources.align.ok_or_else(|| {
            Error::AlignmentUnavailable("alignscore needs an alignment backend".into())
        })?;
        faithfulness::annotate_faithfulness(data, align)?
    } else {
        data.clone()
    };

    let results = map_concurrent(&data.records, resources.concurrency, |record| {
        compute_record_scores(record, data.task_mode, &native, resources)
    });
    let mut table = ScoreTable::new();
    for (record, result) in data.records.iter().zip(results) {
        for (estimator, claim_id, score) in result? {
            table.insert(&estimator, &record.record_id, &claim_id, score)?;
        }
    }
    ingest_external(&mut table, &data, &external)?;
    Ok((data, table))
}

/// Split (when `train_count` is given) and fit the mixture. Returns the
/// fitted model together with the dataset whose split assignment it was
/// fitted under, so evaluation can use the complementary test records.
pub fn cmd_fit(
    data: Dataset,
    table: &ScoreTable,
    cfg: &FranqConfig,
    train_count: Option<usize>,
    seed: u64,
) -> Result<(FranqModel, Dataset)> {
    let data = match train_count {
        Some(count) => split_dataset(data, count, seed)?,
        None => data,
    };
    let model = fit_franq(&data, table, cfg)?;
    Ok((model, data))
}

/// Apply a fitted model to every claim and store the result in the table
/// under the `franq` estimator name.
pub fn score_franq(model: &FranqModel, data: &Dataset, table: &mut ScoreTable) -> Result<()> {
    let scores = score_dataset(model, data, table)?;
    for (record_id, claim_id, score) in scores {
        table.insert(names::FRANQ, &record_id, &claim_id, score)?;
    }
    Ok(())
}

/// Detection-score conversion for one estimator over an explicit claim set:
/// `(detection_scores, labels_false)` for ranking metrics.
pub fn detection_inputs(
    table: &ScoreTable,
    claims: &[(&GenerationRecord, &Claim)],
    estimator: &str,
) -> Result<(Vec<f64>, Vec<u8>)> {
    let polarity = table.polarity(estimator)?;
    let mut scores = Vec::with_capacity(claims.len());
    let mut labels = Vec::with_capacity(claims.len());
    for (_, claim) in claims {
        let Some(binary) = claim.factuality_label.as_binary() else {
            continue;
        };
        let raw = table.require(estimator, &claim.claim_id)?;
        scores.push(match polarity {
            Polarity::Confidence => -raw,
            Polarity::Uncertainty => raw,
        });
        labels.push(1 - binary); // positive class = factually false
    }
    Ok((scores, labels))
}
