use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::category::PiiCategory;
use crate::gateway::{BackendError, ChatBackend, ChatRequest, StepRole};
use crate::span::PiiSpan;
use crate::text::OffsetMap;

pub const DETECT_TEMPLATE: &str = include_str!("../../data/templates/detect.txt");

/// A value the model reported that could not be placed in the text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetachedFinding {
    pub tag: String,
    pub category: Option<PiiCategory>,
    pub value: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDetection {
    pub spans: Vec<PiiSpan>,
    pub detached: Vec<DetachedFinding>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelParseError {
    #[error("could not parse detector output: {raw}")]
    Unparseable { raw: String },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

fn tag_category(tag: &str) -> Option<PiiCategory> {
    Some(match tag {
        "AGE" => PiiCategory::Age,
        "DATE" | "DATE_TIME" => PiiCategory::DateTime,
        "LOCATION" => PiiCategory::Location,
        "PERSON" | "PATIENT" | "NAME" => PiiCategory::Person,
        "GENDER" => PiiCategory::Gender,
        "RACE" | "NRP" => PiiCategory::Race,
        _ => return None,
    })
}

fn is_tag(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_uppercase() || b == b'_')
}

/// Splits one `[TAG]: value` line. Bare `TAG: value` is accepted for known
/// tags.
fn tag_line(line: &str) -> Option<(&str, &str)> {
    let line = line.trim();
    let line = line
        .strip_prefix("- ")
        .or_else(|| line.strip_prefix("* "))
        .unwrap_or(line);
    if let Some(rest) = line.strip_prefix('[') {
        let (tag, rest) = rest.split_once(']')?;
        let value = rest.trim_start().strip_prefix(':')?;
        return is_tag(tag.trim()).then(|| (tag.trim(), value.trim()));
    }
    let (tag, value) = line.split_once(':')?;
    (tag_category(tag.trim()).is_some() && is_tag(tag.trim())).then(|| (tag.trim(), value.trim()))
}

fn is_empty_answer(s: &str) -> bool {
    let t = s.trim().trim_end_matches('.').to_ascii_lowercase();
    t.is_empty() || t == "none" || t == "no pii" || t == "n/a" || t == "no pii found"
}

/// Turns tagged output into spans anchored at the first occurrence of each
/// value not already claimed by an earlier value.
pub fn parse_model_output(text: &str, output: &str) -> Result<ModelDetection, ModelParseError> {
    let mut pairs = Vec::new();
    for line in output.lines() {
        if let Some(p) = tag_line(line) {
            pairs.push(p);
        } else if line.trim_start().starts_with('[') {
            return Err(ModelParseError::Unparseable { raw: output.to_string() });
        }
    }
    if pairs.is_empty() && !is_empty_answer(output) {
        return Err(ModelParseError::Unparseable { raw: output.to_string() });
    }

    let map = OffsetMap::new(text);
    let mut claimed: Vec<(usize, usize)> = Vec::new();
    let mut det = ModelDetection::default();
    for (tag, value) in pairs {
        let category = tag_category(tag);
        let found = match (category, value.is_empty()) {
            (Some(_), false) => text
                .match_indices(value)
                .map(|(s, v)| (s, s + v.len()))
                .find(|&(s, e)| claimed.iter().all(|&(cs, ce)| e <= cs || ce <= s)),
            _ => None,
        };
        match (category, found) {
            (Some(cat), Some((s, e))) => {
                claimed.push((s, e));
                det.spans.push(PiiSpan::new(map.to_char(s), map.to_char(e), cat, value));
            }
            _ => det.detached.push(DetachedFinding {
                tag: tag.to_string(),
                category,
                value: value.to_string(),
            }),
        }
    }
    det.spans.sort_by_key(|s| (s.start, s.end));
    Ok(det)
}

/// Ask `backend` to tag PII in `text` and anchor its answers.
pub fn detect_model(
    text: &str,
    backend: &dyn ChatBackend,
    model: &str,
) -> Result<ModelDetection, ModelParseError> {
    let template = DETECT_TEMPLATE.strip_suffix('\n').unwrap_or(DETECT_TEMPLATE);
    let prompt = template.replace("{Document}", text);
    let req = ChatRequest::user(model, prompt)
        .with_document(text)
        .with_role(StepRole::Detect);
    let completion = backend.chat(&req)?;
    parse_model_output(text, &completion.text)
}
