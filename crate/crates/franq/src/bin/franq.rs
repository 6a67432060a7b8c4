//! Thin command-line front end over the library pipeline.
//!
//! Every subcommand maps onto one library entry point and writes its
//! fixed-name artifacts (`records.jsonl`, `scores.csv`, `model.json`,
//! `report.csv`, `report.txt`, `manifest.json`) into `--out-dir`. Backend
//! connection settings come from the environment (`FRANQ_LLM_BASE_URL`,
//! `FRANQ_LLM_API_KEY`, `FRANQ_ALIGN_BASE_URL`); `--cache` plus `--offline`
//! replay a previous run byte-for-byte without network access.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use franq::backends::{
    align_base_url_from_env, BackendConfig, HttpAlignClient, HttpLlmClient, ReplayCache,
};
use franq::data::{load_records, save_records, Dataset, TaskMode};
use franq::estimators::{names, ScoreTable};
use franq::franq::{FranqConfig, PartitionSignal, Strategy};
use franq::harness::{
    cmd_eval, cmd_fit, cmd_generate, cmd_score, corrupt_factual, judge_dataset, load_questions,
    score_franq, shuffle_retrievals, EvalParams, GenerateParams, Report, RunManifest,
    ScoreResources,
};
use franq::metrics::{Metric, MetricParams};

#[derive(Parser)]
#[command(
    name = "franq",
    version,
    about = "Faithfulness-conditioned factual-error detection for RAG outputs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Long,
    Short,
}

impl From<TaskArg> for TaskMode {
    fn from(value: TaskArg) -> Self {
        match value {
            TaskArg::Long => TaskMode::LongForm,
            TaskArg::Short => TaskMode::ShortForm,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    None,
    Calibrated,
    Condition,
}

impl From<StrategyArg> for Strategy {
    fn from(value: StrategyArg) -> Self {
        match value {
            StrategyArg::None => Strategy::None,
            StrategyArg::Calibrated => Strategy::Calibrated,
            StrategyArg::Condition => Strategy::ConditionCalibrated,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PartitionArg {
    Alignscore,
    Gold,
}

impl From<PartitionArg> for PartitionSignal {
    fn from(value: PartitionArg) -> Self {
        match value {
            PartitionArg::Alignscore => PartitionSignal::AlignscoreThreshold,
            PartitionArg::Gold => PartitionSignal::GoldFaithfulness,
        }
    }
}

/// Connection and replay settings shared by backend-using subcommands.
#[derive(Args)]
struct BackendArgs {
    /// Replay-cache file (JSONL, append-only). Reused caches replay runs
    /// byte-for-byte.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Never touch the network; a request missing from the cache is an error.
    #[arg(long)]
    offline: bool,
    /// Model identifier sent with every LLM request.
    #[arg(long, default_value = "default")]
    model: String,
}

struct Backends {
    llm: Option<HttpLlmClient>,
    align: Option<HttpAlignClient>,
}

impl BackendArgs {
    fn connect(&self) -> Result<Backends> {
        let cache = Arc::new(match &self.cache {
            Some(path) => ReplayCache::open(path)?,
            None => ReplayCache::in_memory(),
        });
        let mut config = BackendConfig::from_env();
        config.offline = self.offline;
        config.model = self.model.clone();
        // With a cache in offline mode the clients work without any URL, so
        // construct them whenever they could possibly answer.
        let llm = if !config.base_url.is_empty() || self.offline {
            Some(HttpLlmClient::new(config.clone(), Arc::clone(&cache))?)
        } else {
            None
        };
        let align_url = align_base_url_from_env();
        let align = if !align_url.is_empty() || self.offline {
            Some(HttpAlignClient::new(config, align_url, Arc::clone(&cache))?)
        } else {
            None
        };
        Ok(Backends { llm, align })
    }
}

impl Backends {
    fn resources(&self, entail_threshold: f64, concurrency: usize) -> ScoreResources<'_> {
        ScoreResources {
            llm: self.llm.as_ref().map(|b| b as _),
            align: self.align.as_ref().map(|b| b as _),
            entail_threshold,
            concurrency,
        }
    }

    fn require_llm(&self) -> Result<&HttpLlmClient> {
        self.llm.as_ref().context(
            "no LLM backend: set FRANQ_LLM_BASE_URL or pass --offline with a warm --cache",
        )
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate answers (greedy + samples) and claims for a question file.
    Generate {
        /// Input questions, one JSON object per line:
        /// {"question", "passages": [...], "gold_answer"?}.
        #[arg(long)]
        questions: PathBuf,
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Stochastic samples per question for the diversity pool.
        #[arg(long, default_value_t = 10)]
        samples: usize,
        #[arg(long, default_value_t = 1.0)]
        sample_temperature: f64,
        /// Long-form: skip claim decomposition (records carry no claims).
        #[arg(long)]
        no_decompose: bool,
        /// Label claims (faithfulness + factuality) with the LLM annotator.
        #[arg(long)]
        annotate: bool,
        /// Short-form: set factuality labels by judging against gold answers.
        #[arg(long)]
        judge: bool,
        #[arg(long, default_value_t = 8)]
        concurrency: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Compute estimator scores for every claim of a record file.
    Score {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Comma-separated estimator names. Default: everything computable
        /// without a backend.
        #[arg(long, value_delimiter = ',')]
        estimators: Option<Vec<String>>,
        /// Mutual-entailment threshold for semantic clustering.
        #[arg(long, default_value_t = 0.5)]
        entail_threshold: f64,
        #[arg(long, default_value_t = 8)]
        concurrency: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Fit the faithfulness-conditioned mixture and score every claim with it.
    Fit {
        #[arg(long)]
        records: PathBuf,
        /// scores.csv with the branch estimators (and alignscore-backed
        /// faithfulness already on the records).
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value = "condition")]
        strategy: StrategyArg,
        /// Branch estimator for faithful claims (default: task-specific).
        #[arg(long)]
        uq_faith: Option<String>,
        /// Branch estimator for unfaithful claims (default: task-specific).
        #[arg(long)]
        uq_unfaith: Option<String>,
        /// Faithfulness threshold T for partitioning and binary mode.
        #[arg(long = "T", default_value_t = 0.5)]
        threshold: f64,
        /// Replace p_faith with the hard indicator p_faith > T when mixing.
        #[arg(long)]
        binary_faith: bool,
        /// Partition signal for the condition strategy.
        #[arg(long, value_enum, default_value = "alignscore")]
        partition: PartitionArg,
        /// Records assigned to the train split before fitting; the rest
        /// become the test split. Default: fit on all records.
        #[arg(long)]
        train_count: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Corrupt retrievals to probe estimator robustness.
    Corrupt {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Replace passages of corrupted records with another record's
        /// (disjoint) retrievals.
        #[arg(long, conflicts_with = "factual")]
        shuffle: bool,
        /// Rewrite passages of corrupted records with subtle factual errors
        /// (needs an LLM backend).
        #[arg(long)]
        factual: bool,
        /// Fraction of records to corrupt.
        #[arg(long, default_value_t = 0.5)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Evaluate methods on labeled claims and write report artifacts.
    Eval {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Comma-separated method names. Default: every estimator present in
        /// the score table.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        /// Comma-separated metric ids (pr_auc, auroc, prr, ece).
        #[arg(long, value_delimiter = ',')]
        metrics: Option<Vec<String>>,
        /// Bootstrap resamples per cell (0 disables the stderr column).
        #[arg(long, default_value_t = 200)]
        resamples: usize,
        /// Rejection cap for PRR.
        #[arg(long)]
        max_reject: Option<f64>,
        /// Bin count for ECE.
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Render the text table from an existing report.csv to stdout.
    Report {
        #[arg(long, default_value = ".")]
        dir: PathBuf,
    },
}

fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

fn prepare_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))
}

fn manifest_for(command: &str, seed: u64) -> RunManifest {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let mut manifest = RunManifest::new(command, seed);
    manifest.param("argv", argv.join(" "));
    manifest
}

fn write_records_with_manifest(
    data: &Dataset,
    out_dir: &Path,
    mut manifest: RunManifest,
) -> Result<()> {
    prepare_out_dir(out_dir)?;
    let records_path = out_path(out_dir, "records.jsonl");
    save_records(data, &records_path)?;
    manifest.dataset_sha256 = Some(franq::harness::digest_bytes(&std::fs::read(&records_path)?));
    manifest.write(&out_path(out_dir, "manifest.json"))?;
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Generate {
            questions,
            task,
            out_dir,
            samples,
            sample_temperature,
            no_decompose,
            annotate,
            judge,
            concurrency,
            seed,
            backend,
        } => {
            let task: TaskMode = task.into();
            let inputs = load_questions(&questions)?;
            let backends = backend.connect()?;
            let llm = backends.require_llm()?;
            let params = GenerateParams {
                samples,
                sample_temperature,
                decompose: !no_decompose,
                annotate,
                concurrency,
            };
            let mut data = cmd_generate(&inputs, task, llm, &params)?;
            if judge {
                data = judge_dataset(Some(llm), &data)?;
            }
            let mut manifest = manifest_for("generate", seed);
            manifest
                .param("task", if task == TaskMode::LongForm { "long" } else { "short" })
                .param("samples", samples)
                .param("sample_temperature", sample_temperature);
            write_records_with_manifest(&data, &out_dir, manifest)?;
            println!(
                "generated {} records ({} claims) -> {}",
                data.records.len(),
                data.total_claims(),
                out_path(&out_dir, "records.jsonl").display()
            );
            Ok(())
        }
        Command::Score {
            records,
            task,
            out_dir,
            estimators,
            entail_threshold,
            concurrency,
            seed,
            backend,
        } => {
            let task: TaskMode = task.into();
            let data = load_records(&records, task)?;
            let backends = backend.connect()?;
            let resources = backends.resources(entail_threshold, concurrency);
            let list = estimators.unwrap_or_else(|| {
                [
                    names::MSP,
                    names::CLAIM_PROB,
                    names::PERPLEXITY,
                    names::MEAN_TOKEN_ENTROPY,
                    names::MAX_TOKEN_ENTROPY,
                    names::LEXSIM,
                    names::DEGMAT,
                    names::EIGV,
                    names::SEMANTIC_ENTROPY,
                ]
                .iter()
                .map(|s| s.to_string())
                .collect()
            });
            let (data, table) = cmd_score(&data, &list, &resources)?;
            prepare_out_dir(&out_dir)?;
            table.write_csv(&out_path(&out_dir, "scores.csv"))?;
            let mut manifest = manifest_for("score", seed);
            manifest
                .param("estimators", list.join("+"))
                .param("entail_threshold", entail_threshold);
            manifest.scores_sha256 = Some(franq::harness::digest_bytes(table.to_csv().as_bytes()));
            write_records_with_manifest(&data, &out_dir, manifest)?;
            println!(
                "scored {} estimators over {} claims -> {}",
                table.estimator_names().len(),
                data.total_claims(),
                out_path(&out_dir, "scores.csv").display()
            );
            Ok(())
        }
        Command::Fit {
            records,
            scores,
            task,
            out_dir,
            strategy,
            uq_faith,
            uq_unfaith,
            threshold,
            binary_faith,
            partition,
            train_count,
            seed,
        } => {
            let task: TaskMode = task.into();
            let data = load_records(&records, task)?;
            let mut table = ScoreTable::read_csv(&scores)?;
            let mut cfg = FranqConfig::for_task(task);
            if let Some(name) = uq_faith {
                cfg.uq_faith = name;
            }
            if let Some(name) = uq_unfaith {
                cfg.uq_unfaith = name;
            }
            cfg.strategy = strategy.into();
            cfg.partition_signal = partition.into();
            cfg.threshold = threshold;
            cfg.binary_faithfulness = binary_faith;
            let (model, data) = cmd_fit(data, &table, &cfg, train_count, seed)?;
            score_franq(&model, &data, &mut table)?;
            prepare_out_dir(&out_dir)?;
            let model_json = serde_json::to_string_pretty(&model)? + "\n";
            std::fs::write(out_path(&out_dir, "model.json"), model_json)?;
            table.write_csv(&out_path(&out_dir, "scores.csv"))?;
            for note in &model.notes {
                log::warn!("{note}");
            }
            let mut manifest = manifest_for("fit", seed);
            manifest.config = Some(model.config.clone());
            manifest.notes = model.notes.clone();
            if let Some(count) = train_count {
                manifest.param("train_count", count);
            }
            manifest.scores_sha256 = Some(franq::harness::digest_bytes(table.to_csv().as_bytes()));
            write_records_with_manifest(&data, &out_dir, manifest)?;
            println!(
                "fitted {} strategy; franq scores for {} claims -> {}",
                model.config.strategy.as_str(),
                data.total_claims(),
                out_path(&out_dir, "scores.csv").display()
            );
            Ok(())
        }
        Command::Corrupt {
            records,
            task,
            out_dir,
            shuffle,
            factual,
            fraction,
            seed,
            backend,
        } => {
            let task: TaskMode = task.into();
            let data = load_records(&records, task)?;
            let corrupted = if shuffle {
                shuffle_retrievals(&data, fraction, seed)?
            } else if factual {
                let backends = backend.connect()?;
                corrupt_factual(&data, fraction, backends.require_llm()?, seed)?
            } else {
                bail!("corrupt needs --shuffle or --factual");
            };
            let mut manifest = manifest_for("corrupt", seed);
            manifest
                .param("mode", if shuffle { "shuffle" } else { "factual" })
                .param("fraction", fraction);
            write_records_with_manifest(&corrupted, &out_dir, manifest)?;
            let touched = corrupted
                .records
                .iter()
                .filter(|r| r.original_passages.is_some())
                .count();
            println!(
                "corrupted {touched}/{} records -> {}",
                corrupted.records.len(),
                out_path(&out_dir, "records.jsonl").display()
            );
            Ok(())
        }
        Command::Eval {
            records,
            scores,
            task,
            out_dir,
            methods,
            metrics,
            resamples,
            max_reject,
            bins,
            seed,
        } => {
            let task: TaskMode = task.into();
            let data = load_records(&records, task)?;
            let table = ScoreTable::read_csv(&scores)?;
            let methods = methods.unwrap_or_else(|| table.estimator_names());
            let mut params = EvalParams {
                resamples,
                seed,
                ..EvalParams::default()
            };
            if let Some(list) = metrics {
                params.metrics = list
                    .iter()
                    .map(|id| Metric::parse(id))
                    .collect::<franq::Result<Vec<_>>>()?;
            }
            let mut metric_params = MetricParams::default();
            if let Some(cap) = max_reject {
                metric_params.max_reject = cap;
            }
            if let Some(bins) = bins {
                metric_params.bins = bins;
            }
            params.metric_params = metric_params;
            let report = cmd_eval(
                &data,
                &table,
                &methods,
                &params,
                &out_dir,
                manifest_for("eval", seed),
            )?;
            print!("{}", report.to_text());
            Ok(())
        }
        Command::Report { dir } => {
            let csv_path = out_path(&dir, "report.csv");
            let text = std::fs::read_to_string(&csv_path)
                .with_context(|| format!("reading {}", csv_path.display()))?;
            let report = Report::from_csv(&text)?;
            print!("{}", report.to_text());
            Ok(())
        }
    }
}
