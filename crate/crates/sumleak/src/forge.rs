//! Corpus-level profile generation and pseudonymization.

use sumleak_core::corpus::{CorpusSplit, Document};
use sumleak_core::detect::{detect_rules, RulePack};
use sumleak_core::gateway::ChatBackend;
use sumleak_core::profile::{generate_profile, LocaleSet, Profile, ProfileConfig, ProfileError};
use sumleak_core::pseudo::{inject_model, inject_template, verify, PseudoDocument, PseudoError, SlotTable};
use sumleak_core::text::contains_placeholder;

use crate::run::ErrorEntry;

/// Seed for the `i`-th profile of a run.
pub fn profile_seed(seed: u64, i: usize) -> u64 {
    let mut z = seed ^ (i as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn forge_profiles(
    count: usize,
    seed: u64,
    locales: &LocaleSet,
    cfg: &ProfileConfig,
) -> Result<Vec<Profile>, ProfileError> {
    (0..count).map(|i| generate_profile(profile_seed(seed, i), locales, cfg)).collect()
}

pub enum Injector<'a> {
    Template(&'a SlotTable),
    Model { backend: &'a dyn ChatBackend, model: &'a str, pack: &'a RulePack },
}

#[derive(Debug, Default)]
pub struct PseudoOutcome {
    /// Accepted documents with ground-truth (template) or detected (model)
    /// spans.
    pub corpus: CorpusSplit,
    /// Every injected document, accepted or not.
    pub log: Vec<PseudoDocument>,
    pub errors: Vec<ErrorEntry>,
}

fn error(doc: &Document, e: impl ToString) -> ErrorEntry {
    ErrorEntry {
        doc_id: doc.id.clone(),
        backend: String::new(),
        method: "pseudonymize".into(),
        step: None,
        message: e.to_string(),
        partial: Vec::new(),
    }
}

/// Fills the placeholders of every document with one synthetic profile per
/// document and keeps those passing the BLEU gate. A reference summary with
/// placeholders is filled from the same profile.
pub fn pseudonymize_split(
    split: &CorpusSplit,
    locales: &LocaleSet,
    profile_cfg: &ProfileConfig,
    injector: &Injector,
    seed: u64,
    threshold: f64,
) -> PseudoOutcome {
    let mut out = PseudoOutcome { corpus: CorpusSplit { name: split.name, documents: Vec::new() }, ..Default::default() };
    for (i, doc) in split.documents.iter().enumerate() {
        let profile = match generate_profile(profile_seed(seed, i), locales, profile_cfg) {
            Ok(p) => p,
            Err(e) => {
                out.errors.push(error(doc, e));
                continue;
            }
        };
        let injected = match injector {
            Injector::Template(table) => inject_template(doc, &profile, table),
            Injector::Model { backend, model, .. } => inject_model(doc, &profile, *backend, model),
        };
        let pd = match injected.and_then(|pd| verify(pd, doc, threshold)) {
            Ok(pd) => pd,
            Err(e) => {
                out.errors.push(error(doc, e));
                continue;
            }
        };
        if pd.accepted {
            let spans = match injector {
                Injector::Template(_) => pd.ground_truth(),
                Injector::Model { pack, .. } => detect_rules(&pd.body, pack),
            };
            let mut new = Document::new(doc.id.clone(), pd.body.clone(), doc.source_task);
            new.reference_summary = doc.reference_summary.as_ref().map(|s| fill_summary(s, &profile, injector));
            match new.with_spans(spans) {
                Ok(d) => out.corpus.documents.push(d),
                Err(e) => out.errors.push(error(doc, e)),
            }
        }
        out.log.push(pd);
    }
    out
}

fn fill_summary(summary: &str, profile: &Profile, injector: &Injector) -> String {
    if !contains_placeholder(summary) {
        return summary.to_string();
    }
    let table = match injector {
        Injector::Template(t) => (*t).clone(),
        Injector::Model { .. } => SlotTable::builtin(),
    };
    let tmp = Document::new("summary", summary, Default::default());
    match inject_template(&tmp, profile, &table) {
        Ok(pd) => pd.body,
        Err(PseudoError::NoPlaceholders(_)) | Err(_) => summary.to_string(),
    }
}
