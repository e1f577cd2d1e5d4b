//! Pseudonymization: put synthetic identifiers back into redacted documents
//! and keep only outputs that stay close to the original.

mod bleu;
mod slots;

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Document;
use crate::gateway::{BackendError, ChatBackend, ChatRequest, StepRole};
use crate::profile::{Profile, ProfileAttribute};
use crate::span::PiiSpan;
use crate::text::{char_len, placeholder_runs};

pub use bleu::{bleu, bleu_tokens, modified_precision, BleuError};
pub use slots::{SlotRule, SlotSide, SlotTable, SlotTableError, DEFAULT_SLOTS};

pub const PSEUDONYMIZE_TEMPLATE: &str = include_str!("../../data/templates/pseudonymize.txt");

pub const DEFAULT_THRESHOLD: f64 = 0.20;
pub const DEFAULT_MAX_N: usize = 4;

/// Attributes used for placeholders whose context names nothing. Ages are
/// left out because a bare number carries no cue for any detector.
pub const FALLBACK_ORDER: [ProfileAttribute; 9] = [
    ProfileAttribute::FullName,
    ProfileAttribute::BirthDate,
    ProfileAttribute::City,
    ProfileAttribute::Region,
    ProfileAttribute::Race,
    ProfileAttribute::Gender,
    ProfileAttribute::PostalCode,
    ProfileAttribute::BirthLocation,
    ProfileAttribute::Coordinates,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InjectionMode {
    #[default]
    Template,
    Model,
}

/// One placeholder replacement. `span` is ground truth in the new body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    pub placeholder: String,
    pub attribute: ProfileAttribute,
    pub inferred: bool,
    pub span: PiiSpan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoDocument {
    pub original_id: String,
    pub body: String,
    pub profile: Profile,
    pub injection_mode: InjectionMode,
    pub bleu_vs_original: f64,
    pub accepted: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub injections: Vec<Injection>,
}

impl PseudoDocument {
    pub fn ground_truth(&self) -> Vec<PiiSpan> {
        self.injections.iter().map(|i| i.span.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PseudoError {
    #[error("document {0} has no redaction placeholders")]
    NoPlaceholders(String),
    #[error(transparent)]
    Bleu(#[from] BleuError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("backend returned an empty completion for {0}")]
    EmptyCompletion(String),
}

/// Replace every placeholder with a profile attribute chosen from its
/// surroundings. Unresolved slots cycle through attributes not used yet.
pub fn inject_template(
    doc: &Document,
    profile: &Profile,
    table: &SlotTable,
) -> Result<PseudoDocument, PseudoError> {
    let body = &doc.body;
    let runs = placeholder_runs(body);
    if runs.is_empty() {
        return Err(PseudoError::NoPlaceholders(doc.id.clone()));
    }

    let mut chosen: Vec<Option<ProfileAttribute>> = Vec::with_capacity(runs.len());
    for (k, &(s, e)) in runs.iter().enumerate() {
        let prev_end = if k == 0 { 0 } else { runs[k - 1].1 };
        let next_start = runs.get(k + 1).map_or(body.len(), |r| r.0);
        chosen.push(table.infer(&body[prev_end..s], &body[e..next_start]));
    }

    let mut used: Vec<ProfileAttribute> = chosen.iter().flatten().copied().collect();
    let mut cursor = 0usize;
    let mut next_fallback = |used: &mut Vec<ProfileAttribute>| {
        let n = FALLBACK_ORDER.len();
        for step in 0..n {
            let a = FALLBACK_ORDER[(cursor + step) % n];
            if !used.contains(&a) {
                cursor = (cursor + step + 1) % n;
                used.push(a);
                return a;
            }
        }
        let a = FALLBACK_ORDER[cursor % n];
        cursor = (cursor + 1) % n;
        a
    };

    let mut out = String::with_capacity(body.len() + runs.len() * 8);
    let mut injections = Vec::with_capacity(runs.len());
    let mut last = 0usize;
    let mut chars = 0usize;
    for (k, &(s, e)) in runs.iter().enumerate() {
        let gap = &body[last..s];
        out.push_str(gap);
        chars += char_len(gap);
        let (attribute, inferred) = match chosen[k] {
            Some(a) => (a, true),
            None => (next_fallback(&mut used), false),
        };
        let value = profile.attribute(attribute);
        let len = char_len(&value);
        out.push_str(&value);
        injections.push(Injection {
            placeholder: String::from(&body[s..e]),
            attribute,
            inferred,
            span: PiiSpan::new(chars, chars + len, attribute.category(), value),
        });
        chars += len;
        last = e;
    }
    out.push_str(&body[last..]);

    Ok(PseudoDocument {
        original_id: doc.id.clone(),
        body: out,
        profile: profile.clone(),
        injection_mode: InjectionMode::Template,
        bleu_vs_original: 0.0,
        accepted: false,
        injections,
    })
}

pub fn render_pseudonymize_prompt(doc: &Document, profile: &Profile) -> String {
    let t = PSEUDONYMIZE_TEMPLATE
        .strip_suffix('\n')
        .unwrap_or(PSEUDONYMIZE_TEMPLATE);
    let (head, tail) = t.split_once("{Document}").expect("template has a document slot");
    let mut out = head.replace("{Fake_Profile}", &profile.render_fake_profile());
    out.push_str(&doc.body);
    out.push_str(tail);
    out
}

/// Ask a model to fill the placeholders. Spans are not known afterwards;
/// run a detector over the body to recover them.
pub fn inject_model(
    doc: &Document,
    profile: &Profile,
    backend: &dyn ChatBackend,
    model: &str,
) -> Result<PseudoDocument, PseudoError> {
    let req = ChatRequest::user(model, render_pseudonymize_prompt(doc, profile))
        .with_document(doc.body.clone())
        .with_role(StepRole::Pseudonymize)
        .with_request_id(doc.id.clone());
    let completion = backend.chat(&req)?;
    if completion.text.trim().is_empty() {
        return Err(PseudoError::EmptyCompletion(doc.id.clone()));
    }
    Ok(PseudoDocument {
        original_id: doc.id.clone(),
        body: completion.text,
        profile: profile.clone(),
        injection_mode: InjectionMode::Model,
        bleu_vs_original: 0.0,
        accepted: false,
        injections: Vec::new(),
    })
}

/// Undo a template injection by writing each placeholder back.
pub fn restore_placeholders(pd: &PseudoDocument) -> String {
    let mut out = String::with_capacity(pd.body.len());
    let mut pos = 0usize;
    let offsets: Vec<usize> = pd
        .body
        .char_indices()
        .map(|(b, _)| b)
        .chain(core::iter::once(pd.body.len()))
        .collect();
    for inj in &pd.injections {
        let s = offsets[inj.span.start];
        let e = offsets[inj.span.end];
        out.push_str(&pd.body[pos..s]);
        out.push_str(&inj.placeholder);
        pos = e;
    }
    out.push_str(&pd.body[pos..]);
    out
}

pub fn accept(score: f64, threshold: f64) -> bool {
    score >= threshold
}

/// Score `pd` against the original body and set the acceptance flag.
pub fn verify(
    mut pd: PseudoDocument,
    original: &Document,
    threshold: f64,
) -> Result<PseudoDocument, PseudoError> {
    let score = bleu(&pd.body, &original.body, DEFAULT_MAX_N)?;
    pd.bleu_vs_original = score;
    pd.accepted = accept(score, threshold);
    Ok(pd)
}
