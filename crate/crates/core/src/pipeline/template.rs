use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::str::FromStr;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    Summarize,
    PrivateSummary,
    Anonymize,
    CotQuestions,
    CotSummary,
}

impl TemplateId {
    pub const ALL: [TemplateId; 5] = [
        TemplateId::Summarize,
        TemplateId::PrivateSummary,
        TemplateId::Anonymize,
        TemplateId::CotQuestions,
        TemplateId::CotSummary,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            TemplateId::Summarize => "summarize.txt",
            TemplateId::PrivateSummary => "private_summary.txt",
            TemplateId::Anonymize => "anonymize.txt",
            TemplateId::CotQuestions => "cot_questions.txt",
            TemplateId::CotSummary => "cot_summary.txt",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::Summarize => "summarize",
            TemplateId::PrivateSummary => "private_summary",
            TemplateId::Anonymize => "anonymize",
            TemplateId::CotQuestions => "cot_questions",
            TemplateId::CotSummary => "cot_summary",
        }
    }

    pub fn builtin(self) -> &'static str {
        let raw = match self {
            TemplateId::Summarize => include_str!("../../data/templates/summarize.txt"),
            TemplateId::PrivateSummary => include_str!("../../data/templates/private_summary.txt"),
            TemplateId::Anonymize => include_str!("../../data/templates/anonymize.txt"),
            TemplateId::CotQuestions => include_str!("../../data/templates/cot_questions.txt"),
            TemplateId::CotSummary => include_str!("../../data/templates/cot_summary.txt"),
        };
        strip_final_newline(raw)
    }
}

impl FromStr for TemplateId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

pub(crate) fn strip_final_newline(s: &str) -> &str {
    s.strip_suffix('\n').unwrap_or(s)
}

/// Template texts by id. Starts from the shipped texts; entries can be
/// replaced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    texts: BTreeMap<TemplateId, String>,
}

impl Default for Templates {
    fn default() -> Self {
        Templates {
            texts: TemplateId::ALL
                .into_iter()
                .map(|t| (t, t.builtin().to_string()))
                .collect(),
        }
    }
}

impl Templates {
    pub fn set(&mut self, id: TemplateId, text: &str) {
        self.texts.insert(id, strip_final_newline(text).to_string());
    }

    pub fn get(&self, id: TemplateId) -> &str {
        &self.texts[&id]
    }
}

/// Named holes in a template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Slot {
    Document,
    IclSamples,
    ChainOfThoughtOutput,
    PriorStepOutput,
}

impl Slot {
    pub fn name(self) -> &'static str {
        match self {
            Slot::Document => "Document",
            Slot::IclSamples => "ICL_Samples",
            Slot::ChainOfThoughtOutput => "chain_of_thought_output",
            Slot::PriorStepOutput => "prior_step_output",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        [
            Slot::Document,
            Slot::IclSamples,
            Slot::ChainOfThoughtOutput,
            Slot::PriorStepOutput,
        ]
        .into_iter()
        .find(|s| s.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("template slot {{{0}}} is not bound")]
    Unbound(String),
}

/// Slot names in order of appearance.
pub fn slots_in(template: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close)
                if close > 0
                    && after[..close]
                        .bytes()
                        .all(|b| b.is_ascii_alphanumeric() || b == b'_') =>
            {
                out.push(&after[..close]);
                rest = &after[close + 1..];
            }
            _ => rest = after,
        }
    }
    out
}

/// Substitute bindings into `template` in one pass. A line holding the
/// `{ICL_Samples}` slot is dropped when that slot is bound to nothing.
pub fn render(template: &str, bindings: &BTreeMap<Slot, String>) -> Result<String, RenderError> {
    for name in slots_in(template) {
        let bound = Slot::from_name(name).and_then(|s| bindings.get(&s));
        if bound.is_none() {
            return Err(RenderError::Unbound(name.to_string()));
        }
    }
    let icl_empty = bindings
        .get(&Slot::IclSamples)
        .is_some_and(|s| s.trim().is_empty());
    let mut out = String::with_capacity(template.len() + 64);
    let mut first = true;
    for line in template.split('\n') {
        if icl_empty && line.contains("{ICL_Samples}") {
            continue;
        }
        if !first {
            out.push('\n');
        }
        first = false;
        let mut rest = line;
        while let Some(open) = rest.find('{') {
            let after = &rest[open + 1..];
            let slot = after
                .find('}')
                .and_then(|close| Slot::from_name(&after[..close]).map(|s| (s, close)));
            match slot {
                Some((s, close)) => {
                    out.push_str(&rest[..open]);
                    out.push_str(&bindings[&s]);
                    rest = &after[close + 1..];
                }
                None => {
                    out.push_str(&rest[..=open]);
                    rest = after;
                }
            }
        }
        out.push_str(rest);
    }
    Ok(out)
}
