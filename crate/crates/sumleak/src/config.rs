//! Run configuration for the summarize and evaluate stages.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sumleak_core::detect::DEFAULT_MIN_COUNT;
use sumleak_core::metrics::{Averaging, TprMode};
use sumleak_core::pipeline::{MethodSpec, PromptMethod, DEFAULT_MAX_INPUT_TOKENS};

use crate::backend::BackendConfig;
use crate::io::read_text;

/// Where evaluation takes a document's private spans from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpanSource {
    /// The spans stored in the corpus (ground truth for pseudonymized data).
    #[default]
    Corpus,
    /// The rule detector run over each document.
    Rules,
    /// The model detector, through `detector_backend`.
    Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusPaths {
    pub test: PathBuf,
    #[serde(default)]
    pub train: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    pub corpus: CorpusPaths,
    pub methods: Vec<String>,
    pub backends: Vec<BackendConfig>,
    #[serde(default)]
    pub spans: SpanSource,
    #[serde(default)]
    pub detector_backend: Option<String>,
    #[serde(default)]
    pub rule_pack: Option<PathBuf>,
    #[serde(default)]
    pub templates: Option<PathBuf>,
    #[serde(default)]
    pub tpr_mode: TprMode,
    #[serde(default)]
    pub averaging: Averaging,
    #[serde(default = "default_min_count")]
    pub min_category_count: usize,
    #[serde(default = "default_max_input")]
    pub max_input_tokens: usize,
    #[serde(default = "default_max_output")]
    pub max_output_tokens: u32,
    #[serde(default)]
    pub temperature: f32,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Share of failed documents tolerated before a run exits nonzero.
    #[serde(default)]
    pub failure_threshold: f64,
}

fn default_min_count() -> usize {
    DEFAULT_MIN_COUNT
}
fn default_max_input() -> usize {
    DEFAULT_MAX_INPUT_TOKENS
}
fn default_max_output() -> u32 {
    512
}
fn default_parallelism() -> usize {
    4
}

/// Parses a method label: a method name, optionally suffixed `+iclN`, or
/// `scrub-then-summarize`.
pub fn parse_method(label: &str) -> Result<MethodSpec, String> {
    if label == "scrub-then-summarize" {
        return Ok(MethodSpec::scrub_and_summarize());
    }
    let (name, icl) = match label.split_once("+icl") {
        Some((n, k)) => (n, Some(k.parse::<usize>().map_err(|_| format!("bad ICL count in `{label}`"))?)),
        None => (label, None),
    };
    let spec = MethodSpec::new(name.parse::<PromptMethod>()?);
    Ok(match icl {
        Some(k) => spec.with_icl(k),
        None => spec,
    })
}

impl RunConfig {
    /// Reads a TOML config; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = read_text(path).map_err(|e| e.to_string())?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        fix(&mut self.corpus.test);
        self.corpus.train.iter_mut().for_each(fix);
        self.rule_pack.iter_mut().for_each(fix);
        self.templates.iter_mut().for_each(fix);
        for b in &mut self.backends {
            b.transcript.iter_mut().for_each(fix);
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.methods.is_empty() {
            return Err("at least one method is required".into());
        }
        if self.backends.is_empty() {
            return Err("at least one backend is required".into());
        }
        for m in &self.methods {
            parse_method(m)?;
        }
        let mut ids = std::collections::BTreeSet::new();
        for b in &self.backends {
            b.validate()?;
            if !ids.insert(b.id.as_str()) {
                return Err(format!("duplicate backend id `{}`", b.id));
            }
        }
        if self.spans == SpanSource::Model {
            match &self.detector_backend {
                Some(id) if ids.contains(id.as_str()) => {}
                Some(id) => return Err(format!("detector backend `{id}` is not configured")),
                None => return Err("spans = \"model\" needs detector_backend".into()),
            }
        }
        if !(0.0..=1.0).contains(&self.failure_threshold) {
            return Err("failure_threshold must lie in [0, 1]".into());
        }
        Ok(())
    }

    pub fn method_specs(&self) -> Vec<MethodSpec> {
        self.methods.iter().filter_map(|m| parse_method(m).ok()).collect()
    }

    /// SHA-256 of the config's canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).unwrap_or_default();
        hex(&Sha256::digest(json.as_bytes()))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
