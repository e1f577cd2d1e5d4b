//! The six prompting methods as one- or two-step chains, plus instruction
//! fine-tuning export.

mod ift;
mod template;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusSplit, Document};
use crate::detect::{scrub, RulePack, REDACTED};
use crate::gateway::{BackendError, ChatBackend, ChatRequest, StepRole, Usage};

pub use ift::{export_ift, IftExport, IftMeta, IftRecord};
pub use template::{render, slots_in, RenderError, Slot, TemplateId, Templates};

pub const DEFAULT_ICL_COUNT: usize = 2;
pub const DEFAULT_MAX_INPUT_TOKENS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PromptMethod {
    ZeroShotSummary,
    ZeroShotPrivate,
    FewShotPrivate,
    AnonymizeThenSummarize,
    SummarizeThenAnonymize,
    CotPrivate,
}

impl PromptMethod {
    pub const ALL: [PromptMethod; 6] = [
        PromptMethod::ZeroShotSummary,
        PromptMethod::ZeroShotPrivate,
        PromptMethod::FewShotPrivate,
        PromptMethod::AnonymizeThenSummarize,
        PromptMethod::SummarizeThenAnonymize,
        PromptMethod::CotPrivate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptMethod::ZeroShotSummary => "zero-shot-summary",
            PromptMethod::ZeroShotPrivate => "zero-shot-private",
            PromptMethod::FewShotPrivate => "few-shot-private",
            PromptMethod::AnonymizeThenSummarize => "anonymize-then-summarize",
            PromptMethod::SummarizeThenAnonymize => "summarize-then-anonymize",
            PromptMethod::CotPrivate => "cot-private",
        }
    }

    /// Steps in execution order.
    pub fn steps(self) -> Vec<PromptStep> {
        use Binding::*;
        let step = |template, role, bindings: &[(Slot, Binding)]| PromptStep {
            template,
            role,
            bindings: bindings.to_vec(),
        };
        match self {
            PromptMethod::ZeroShotSummary => vec![step(
                TemplateId::Summarize,
                StepRole::Summarize,
                &[(Slot::Document, Source)],
            )],
            PromptMethod::ZeroShotPrivate => vec![step(
                TemplateId::PrivateSummary,
                StepRole::Summarize,
                &[(Slot::IclSamples, Nothing), (Slot::Document, Source)],
            )],
            PromptMethod::FewShotPrivate => vec![step(
                TemplateId::PrivateSummary,
                StepRole::Summarize,
                &[(Slot::IclSamples, Samples), (Slot::Document, Source)],
            )],
            PromptMethod::AnonymizeThenSummarize => vec![
                step(
                    TemplateId::Anonymize,
                    StepRole::Anonymize,
                    &[(Slot::IclSamples, Samples), (Slot::Document, Source)],
                ),
                step(
                    TemplateId::Summarize,
                    StepRole::Summarize,
                    &[(Slot::Document, Prior)],
                ),
            ],
            PromptMethod::SummarizeThenAnonymize => vec![
                step(
                    TemplateId::Summarize,
                    StepRole::Summarize,
                    &[(Slot::Document, Source)],
                ),
                step(
                    TemplateId::Anonymize,
                    StepRole::Anonymize,
                    &[(Slot::IclSamples, Samples), (Slot::Document, Prior)],
                ),
            ],
            PromptMethod::CotPrivate => vec![
                step(
                    TemplateId::CotQuestions,
                    StepRole::AnswerQuestions,
                    &[(Slot::Document, Source)],
                ),
                step(
                    TemplateId::CotSummary,
                    StepRole::Summarize,
                    &[(Slot::ChainOfThoughtOutput, Prior), (Slot::Document, Source)],
                ),
            ],
        }
    }
}

impl FromStr for PromptMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        PromptMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == key)
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

/// Where a slot's text comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binding {
    /// The (truncated) source document.
    Source,
    /// The previous step's completion.
    Prior,
    /// In-context example summaries; empty when none are configured.
    Samples,
    /// Always empty.
    Nothing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptStep {
    pub template: TemplateId,
    pub role: StepRole,
    pub bindings: Vec<(Slot, Binding)>,
}

/// A method plus its settings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub method: PromptMethod,
    pub icl_sample_count: usize,
    /// Replace the model's first anonymization step with the rule scrubber.
    #[serde(default)]
    pub prescrub: bool,
}

impl MethodSpec {
    pub fn new(method: PromptMethod) -> Self {
        let icl_sample_count = if method == PromptMethod::FewShotPrivate {
            DEFAULT_ICL_COUNT
        } else {
            0
        };
        MethodSpec {
            method,
            icl_sample_count,
            prescrub: false,
        }
    }

    pub fn with_icl(mut self, n: usize) -> Self {
        self.icl_sample_count = n;
        self
    }

    /// The rule-scrubbed variant of anonymize-then-summarize.
    pub fn scrub_and_summarize() -> Self {
        MethodSpec {
            prescrub: true,
            ..MethodSpec::new(PromptMethod::AnonymizeThenSummarize)
        }
    }

    pub fn label(&self) -> String {
        let mut s = String::from(self.method.as_str());
        if self.prescrub {
            s = String::from("scrub-then-summarize");
        }
        if self.icl_sample_count > 0 && self.method != PromptMethod::FewShotPrivate {
            s.push_str(&format!("+icl{}", self.icl_sample_count));
        }
        s
    }

    pub fn steps(&self) -> Vec<PromptStep> {
        self.method.steps()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepTranscript {
    pub template: TemplateId,
    pub role: StepRole,
    pub backend_id: String,
    pub prompt: String,
    pub completion: String,
    pub usage: Usage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub doc_id: String,
    pub method: String,
    pub backend_id: String,
    pub steps: Vec<StepTranscript>,
    pub summary: String,
    pub usage: Usage,
    #[serde(default)]
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error("step {step} failed: {source}")]
    Backend {
        step: usize,
        source: BackendError,
        partial: Vec<StepTranscript>,
    },
    #[error("step {step} returned an empty completion")]
    EmptyCompletion {
        step: usize,
        partial: Vec<StepTranscript>,
    },
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("prescrub needs a rule pack")]
    MissingRulePack,
}

impl PipelineError {
    pub fn partial(&self) -> &[StepTranscript] {
        match self {
            PipelineError::Backend { partial, .. } | PipelineError::EmptyCompletion { partial, .. } => {
                partial
            }
            _ => &[],
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub model: String,
    pub max_input_tokens: usize,
    pub max_output_tokens: u32,
    pub temperature: f32,
    pub templates: Templates,
    pub icl_samples: Vec<String>,
    pub rule_pack: Option<Arc<RulePack>>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            model: String::from("default"),
            max_input_tokens: DEFAULT_MAX_INPUT_TOKENS,
            max_output_tokens: 512,
            temperature: 0.0,
            templates: Templates::default(),
            icl_samples: Vec::new(),
            rule_pack: None,
        }
    }
}

/// The first `max_words` whitespace-separated words of `text`, keeping the
/// original spacing.
pub fn truncate_words(text: &str, max_words: usize) -> &str {
    let mut seen = 0;
    let mut in_word = false;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if in_word {
                seen += 1;
                in_word = false;
                if seen == max_words {
                    return &text[..i];
                }
            }
        } else {
            in_word = true;
        }
    }
    if max_words == 0 {
        ""
    } else {
        text
    }
}

/// `k` reference summaries from `train`, picked by a seeded shuffle.
pub fn select_icl(train: &CorpusSplit, k: usize, seed: u64) -> Vec<String> {
    let mut pool: Vec<&str> = train
        .documents
        .iter()
        .filter_map(|d| d.reference_summary.as_deref())
        .filter(|s| !s.trim().is_empty())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    pool.into_iter().take(k).map(String::from).collect()
}

pub fn format_icl(samples: &[String]) -> String {
    samples.join("\n\n")
}

/// Prompt for one step given the texts available to it.
pub fn render_step(
    step: &PromptStep,
    templates: &Templates,
    source: &str,
    prior: Option<&str>,
    samples: &str,
) -> Result<String, RenderError> {
    render(templates.get(step.template), &step_bindings(step, source, prior, samples))
}

fn step_bindings(step: &PromptStep, source: &str, prior: Option<&str>, samples: &str) -> BTreeMap<Slot, String> {
    let mut b = BTreeMap::new();
    for &(slot, from) in &step.bindings {
        let v = match from {
            Binding::Source => Some(source),
            Binding::Prior => prior,
            Binding::Samples => Some(samples),
            Binding::Nothing => Some(""),
        };
        if let Some(v) = v {
            b.insert(slot, v.to_string());
        }
    }
    b
}

fn add_usage(total: &mut Usage, u: Usage) {
    total.prompt_tokens += u.prompt_tokens;
    total.completion_tokens += u.completion_tokens;
}

/// Run every step of `spec` on `doc`, in order.
pub fn run_method(
    spec: &MethodSpec,
    doc: &Document,
    backend: &dyn ChatBackend,
    opts: &RunOptions,
) -> Result<SummaryRecord, PipelineError> {
    let source = truncate_words(&doc.body, opts.max_input_tokens);
    let k = spec.icl_sample_count.min(opts.icl_samples.len());
    let samples = format_icl(&opts.icl_samples[..k]);
    let steps = spec.steps();
    let mut transcripts: Vec<StepTranscript> = Vec::with_capacity(steps.len());
    let mut total = Usage::default();
    let mut prior: Option<String> = None;

    for (i, step) in steps.iter().enumerate() {
        let bindings = step_bindings(step, source, prior.as_deref(), &samples);
        let document = bindings.get(&Slot::Document).cloned().unwrap_or_default();

        if spec.prescrub && i == 0 && step.role == StepRole::Anonymize {
            let pack = opts.rule_pack.as_ref().ok_or(PipelineError::MissingRulePack)?;
            let out = scrub(&document, pack, REDACTED);
            transcripts.push(StepTranscript {
                template: step.template,
                role: step.role,
                backend_id: String::from("rule-scrubber"),
                prompt: document,
                completion: out.clone(),
                usage: Usage::default(),
            });
            prior = Some(out);
            continue;
        }

        let prompt = render(opts.templates.get(step.template), &bindings)?;
        let mut req = ChatRequest::user(opts.model.clone(), prompt.clone())
            .with_document(document)
            .with_role(step.role)
            .with_request_id(format!("{}:{}:{}", doc.id, spec.label(), i));
        req.max_tokens = opts.max_output_tokens;
        req.temperature = opts.temperature;

        let completion = match backend.chat(&req) {
            Ok(c) => c,
            Err(e) => {
                return Err(PipelineError::Backend {
                    step: i,
                    source: e,
                    partial: transcripts,
                })
            }
        };
        if completion.text.trim().is_empty() {
            return Err(PipelineError::EmptyCompletion {
                step: i,
                partial: transcripts,
            });
        }
        add_usage(&mut total, completion.usage);
        transcripts.push(StepTranscript {
            template: step.template,
            role: step.role,
            backend_id: backend.id().to_string(),
            prompt,
            completion: completion.text.clone(),
            usage: completion.usage,
        });
        prior = Some(completion.text);
    }

    Ok(SummaryRecord {
        doc_id: doc.id.clone(),
        method: spec.label(),
        backend_id: backend.id().to_string(),
        summary: prior.unwrap_or_default(),
        steps: transcripts,
        usage: total,
        elapsed_ms: 0,
    })
}
