//! Corpus-level summarize and evaluate stages.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sumleak_core::corpus::{CorpusSplit, Document, SplitName};
use sumleak_core::detect::{detect_model, detect_rules, filter_rare_categories, RulePack};
use sumleak_core::gateway::ChatBackend;
use sumleak_core::pipeline::{run_method, select_icl, MethodSpec, RunOptions, StepTranscript, SummaryRecord};
use sumleak_core::report::{evaluate_group, EvalItem, EvaluationReport};
use sumleak_core::span::PiiSpan;

use crate::backend::build_backend;
use crate::config::{RunConfig, SpanSource};
use crate::io::{load_rule_pack, load_templates, read_corpus, read_jsonl, write_json, write_jsonl, write_text, IoError};

/// A document that could not be processed, with whatever steps completed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEntry {
    pub doc_id: String,
    pub backend: String,
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub partial: Vec<StepTranscript>,
}

/// A summary record as written to disk, stamped with the run identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryLine {
    pub config_hash: String,
    pub seed: u64,
    #[serde(flatten)]
    pub record: SummaryRecord,
}

#[derive(Debug, Default)]
pub struct Summaries {
    pub records: Vec<SummaryRecord>,
    pub errors: Vec<ErrorEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{failed} of {total} documents failed, above the threshold {threshold}")]
    TooManyFailures { failed: usize, total: usize, threshold: f64 },
}

fn pool(parallelism: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .expect("thread pool")
}

/// Runs one method over every document of `split`, in parallel. Output
/// order follows the corpus.
pub fn summarize_split(
    split: &CorpusSplit,
    spec: &MethodSpec,
    backend: &dyn ChatBackend,
    opts: &RunOptions,
    parallelism: usize,
) -> Summaries {
    let results: Vec<_> = pool(parallelism).install(|| {
        split
            .documents
            .par_iter()
            .map(|doc| {
                let t = Instant::now();
                run_method(spec, doc, backend, opts).map(|mut r| {
                    r.elapsed_ms = t.elapsed().as_millis() as u64;
                    r
                })
            })
            .collect()
    });
    let mut out = Summaries::default();
    for (doc, r) in split.documents.iter().zip(results) {
        match r {
            Ok(rec) => out.records.push(rec),
            Err(e) => out.errors.push(ErrorEntry {
                doc_id: doc.id.clone(),
                backend: backend.id().to_string(),
                method: spec.label(),
                step: match &e {
                    sumleak_core::pipeline::PipelineError::Backend { step, .. }
                    | sumleak_core::pipeline::PipelineError::EmptyCompletion { step, .. } => Some(*step),
                    _ => None,
                },
                message: e.to_string(),
                partial: e.partial().to_vec(),
            }),
        }
    }
    out
}

pub struct Prepared {
    pub pack: Arc<RulePack>,
    pub backends: Vec<Arc<dyn ChatBackend>>,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared, RunError> {
    let pack = Arc::new(match &cfg.rule_pack {
        Some(dir) => load_rule_pack(dir)?,
        None => RulePack::builtin(),
    });
    let backends = cfg
        .backends
        .iter()
        .map(|b| build_backend(b, pack.clone()).map_err(|e| RunError::Config(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Prepared { pack, backends })
}

pub fn run_options(cfg: &RunConfig, pack: Arc<RulePack>, model: String) -> Result<RunOptions, RunError> {
    let icl_samples = match &cfg.corpus.train {
        Some(p) => {
            let train = read_corpus(p, SplitName::Train)?;
            let k = cfg.method_specs().iter().map(|m| m.icl_sample_count).max().unwrap_or(0);
            select_icl(&train, k, cfg.seed)
        }
        None => Vec::new(),
    };
    Ok(RunOptions {
        model,
        max_input_tokens: cfg.max_input_tokens,
        max_output_tokens: cfg.max_output_tokens,
        temperature: cfg.temperature,
        templates: load_templates(cfg.templates.as_deref())?,
        icl_samples,
        rule_pack: Some(pack),
    })
}

/// Summarizes the test split with every configured backend and method and
/// writes `summaries.jsonl` and `errors.jsonl` to the output directory.
pub fn run_summarize(cfg: &RunConfig) -> Result<Summaries, RunError> {
    let split = read_corpus(&cfg.corpus.test, SplitName::Test)?;
    let prep = prepare(cfg)?;
    let mut all = Summaries::default();
    for (bcfg, backend) in cfg.backends.iter().zip(&prep.backends) {
        let model = bcfg.model.clone().unwrap_or_else(|| bcfg.id.clone());
        let opts = run_options(cfg, prep.pack.clone(), model)?;
        for spec in cfg.method_specs() {
            let s = summarize_split(&split, &spec, backend.as_ref(), &opts, cfg.parallelism);
            all.records.extend(s.records);
            all.errors.extend(s.errors);
        }
    }
    let hash = cfg.hash();
    let lines: Vec<SummaryLine> = all
        .records
        .iter()
        .map(|r| SummaryLine { config_hash: hash.clone(), seed: cfg.seed, record: r.clone() })
        .collect();
    write_jsonl(&cfg.output_dir.join("summaries.jsonl"), &lines)?;
    write_jsonl(&cfg.output_dir.join("errors.jsonl"), &all.errors)?;
    let total = all.records.len() + all.errors.len();
    check_failures(all.errors.len(), total, cfg.failure_threshold)?;
    Ok(all)
}

pub fn check_failures(failed: usize, total: usize, threshold: f64) -> Result<(), RunError> {
    if total > 0 && failed as f64 / total as f64 > threshold {
        return Err(RunError::TooManyFailures { failed, total, threshold });
    }
    Ok(())
}

/// Private spans for each document according to `source`.
pub fn document_spans(
    split: &CorpusSplit,
    source: SpanSource,
    pack: &RulePack,
    detector: Option<(&dyn ChatBackend, &str)>,
    parallelism: usize,
) -> (BTreeMap<String, Vec<PiiSpan>>, Vec<ErrorEntry>) {
    let found: Vec<Result<Vec<PiiSpan>, String>> = pool(parallelism).install(|| {
        split
            .documents
            .par_iter()
            .map(|d: &Document| match (source, detector) {
                (SpanSource::Corpus, _) => Ok(d.pii_spans.clone()),
                (SpanSource::Rules, _) | (SpanSource::Model, None) => Ok(detect_rules(&d.body, pack)),
                (SpanSource::Model, Some((b, model))) => {
                    detect_model(&d.body, b, model).map(|m| m.spans).map_err(|e| e.to_string())
                }
            })
            .collect()
    });
    let mut spans = BTreeMap::new();
    let mut errors = Vec::new();
    for (d, r) in split.documents.iter().zip(found) {
        match r {
            Ok(s) => {
                spans.insert(d.id.clone(), s);
            }
            Err(message) => errors.push(ErrorEntry {
                doc_id: d.id.clone(),
                backend: detector.map(|(b, _)| b.id().to_string()).unwrap_or_default(),
                method: "detect".into(),
                step: None,
                message,
                partial: Vec::new(),
            }),
        }
    }
    (spans, errors)
}

/// Scores summaries against the corpus. Rows follow the config's backend
/// and method order.
pub fn build_report(
    cfg: &RunConfig,
    split: &CorpusSplit,
    spans: &BTreeMap<String, Vec<PiiSpan>>,
    records: &[SummaryRecord],
) -> EvaluationReport {
    let with_spans = CorpusSplit {
        name: split.name,
        documents: split
            .documents
            .iter()
            .filter_map(|d| {
                spans.get(&d.id).map(|s| {
                    let mut d = d.clone();
                    d.pii_spans = s.clone();
                    d
                })
            })
            .collect(),
    };
    let active = filter_rare_categories(std::slice::from_ref(&with_spans), cfg.min_category_count);
    let mut rows = Vec::new();
    for b in &cfg.backends {
        for spec in cfg.method_specs() {
            let label = spec.label();
            let items: Vec<EvalItem> = records
                .iter()
                .filter(|r| r.backend_id == b.id && r.method == label)
                .filter_map(|r| {
                    let doc = split.get(&r.doc_id)?;
                    Some(EvalItem {
                        doc_id: r.doc_id.clone(),
                        spans: spans.get(&r.doc_id)?.clone(),
                        summary: r.summary.clone(),
                        reference: doc.reference_summary.clone(),
                    })
                })
                .collect();
            if !items.is_empty() {
                rows.push(evaluate_group(&b.id, &label, &items, &active, cfg.tpr_mode, cfg.averaging));
            }
        }
    }
    EvaluationReport {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        tpr_mode: cfg.tpr_mode,
        averaging: cfg.averaging,
        active_categories: sumleak_core::report::ordered(&active),
        rows,
    }
}

/// Reads summaries (default: `summaries.jsonl` in the output directory),
/// scores them and writes the report files.
pub fn run_evaluate(cfg: &RunConfig, summaries: Option<&Path>) -> Result<EvaluationReport, RunError> {
    let split = read_corpus(&cfg.corpus.test, SplitName::Test)?;
    let default = cfg.output_dir.join("summaries.jsonl");
    let lines: Vec<SummaryLine> = read_jsonl(summaries.unwrap_or(&default))?;
    let records: Vec<SummaryRecord> = lines.into_iter().map(|l| l.record).collect();
    let prep = prepare(cfg)?;
    let detector = match (&cfg.detector_backend, cfg.spans) {
        (Some(id), SpanSource::Model) => {
            let i = cfg.backends.iter().position(|b| &b.id == id).expect("validated");
            let model = cfg.backends[i].model.clone().unwrap_or_else(|| id.clone());
            Some((prep.backends[i].clone(), model))
        }
        _ => None,
    };
    let (spans, errors) = document_spans(
        &split,
        cfg.spans,
        &prep.pack,
        detector.as_ref().map(|(b, m)| (b.as_ref(), m.as_str())),
        cfg.parallelism,
    );
    let report = build_report(cfg, &split, &spans, &records);
    write_report(&cfg.output_dir, &report)?;
    write_jsonl(&cfg.output_dir.join("eval_errors.jsonl"), &errors)?;
    check_failures(errors.len(), split.len(), cfg.failure_threshold)?;
    Ok(report)
}

pub fn write_report(dir: &Path, report: &EvaluationReport) -> Result<(), IoError> {
    write_json(&dir.join("report.json"), report)?;
    write_text(&dir.join("report.tsv"), &report.to_tsv())?;
    write_text(&dir.join("report.md"), &report.to_markdown())?;
    #[derive(Serialize)]
    struct Breakdown<'a> {
        config_hash: &'a str,
        seed: u64,
        records: Vec<sumleak_core::report::BreakdownRecord>,
    }
    write_json(
        &dir.join("breakdown.json"),
        &Breakdown { config_hash: &report.config_hash, seed: report.seed, records: report.breakdown() },
    )?;
    write_text(&dir.join("breakdown.tsv"), &report.breakdown_tsv())
}
