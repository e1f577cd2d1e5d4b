//! Rule-based PII detection, a parser for model-based detection, and the
//! corpus-wide rare-category filter.

mod gazetteer;
mod matchers;
mod model;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::str::FromStr;
use thiserror::Error;

use crate::category::PiiCategory;
use crate::corpus::CorpusSplit;
use crate::span::{resolve_overlaps, PiiSpan};
use crate::text::OffsetMap;

pub use gazetteer::Gazetteer;
pub use model::{
    detect_model, parse_model_output, DetachedFinding, ModelDetection, ModelParseError,
    DETECT_TEMPLATE,
};

pub const DEFAULT_MIN_COUNT: usize = 20;
pub const REDACTED: &str = "[REDACTED]";

pub const BUILTIN_PATTERNS: &str = include_str!("../../data/rules/patterns.cfg");
pub const BUILTIN_NAMES: &str = include_str!("../../data/rules/names.txt");
pub const BUILTIN_PLACES: &str = include_str!("../../data/rules/places.txt");
pub const BUILTIN_RACES: &str = include_str!("../../data/rules/races.txt");
pub const BUILTIN_GENDER: &str = include_str!("../../data/rules/gender.txt");

/// Built-in pattern matchers that a rule pack can switch on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Matcher {
    Date,
    Age,
    PostalCode,
    Coordinates,
    HonorificName,
    LabeledName,
    SexField,
}

impl FromStr for Matcher {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "date" => Matcher::Date,
            "age" => Matcher::Age,
            "postal_code" => Matcher::PostalCode,
            "coordinates" => Matcher::Coordinates,
            "honorific_name" => Matcher::HonorificName,
            "labeled_name" => Matcher::LabeledName,
            "sex_field" => Matcher::SexField,
            _ => return Err(()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RulePackError {
    #[error("patterns.cfg line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("rule pack file `{0}` not found")]
    MissingFile(String),
}

/// Immutable detector configuration: pattern matchers plus gazetteers, each
/// bound to exactly one category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RulePack {
    matchers: Vec<(Matcher, PiiCategory)>,
    gazetteers: Vec<(String, Gazetteer)>,
    pub fold_age: bool,
}

pub(crate) struct Tok {
    pub s: usize,
    pub e: usize,
}

fn word_tokens(text: &str) -> Vec<Tok> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(s) = start.take() {
            out.push(Tok { s, e: i });
        }
    }
    if let Some(s) = start {
        out.push(Tok { s, e: text.len() });
    }
    out
}

impl RulePack {
    /// Parses `patterns.cfg`; gazetteer files named there are fetched through
    /// `read_file`.
    pub fn parse(
        patterns: &str,
        read_file: &dyn Fn(&str) -> Option<String>,
    ) -> Result<Self, RulePackError> {
        let mut matchers: Vec<(Matcher, PiiCategory)> = Vec::new();
        let mut gazetteers: Vec<(String, Gazetteer)> = Vec::new();
        let mut fold_age = false;
        for (i, raw) in patterns.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| RulePackError::Line {
                line: i + 1,
                message,
            };
            if let Some(opt) = line.strip_prefix("option ") {
                let (k, v) = opt
                    .split_once('=')
                    .ok_or_else(|| err("option needs `=`".into()))?;
                match (k.trim(), v.trim()) {
                    ("fold_age", "true") => fold_age = true,
                    ("fold_age", "false") => fold_age = false,
                    (k, v) => return Err(err(format!("bad option `{k} = {v}`"))),
                }
                continue;
            }
            let (name, cat) = line
                .split_once("=>")
                .ok_or_else(|| err("expected `rule => CATEGORY`".into()))?;
            let (name, cat) = (name.trim(), cat.trim());
            let category: PiiCategory = cat
                .parse()
                .map_err(|_| err(format!("unknown category `{cat}`")))?;
            if name.ends_with(".txt") {
                if gazetteers.iter().any(|(n, _)| n == name) {
                    return Err(err(format!("`{name}` listed twice")));
                }
                let src = read_file(name).ok_or_else(|| RulePackError::MissingFile(name.to_string()))?;
                gazetteers.push((name.to_string(), Gazetteer::parse(&src, category)));
            } else {
                let m: Matcher = name
                    .parse()
                    .map_err(|_| err(format!("unknown matcher `{name}`")))?;
                if matchers.iter().any(|(x, _)| *x == m) {
                    return Err(err(format!("`{name}` listed twice")));
                }
                matchers.push((m, category));
            }
        }
        Ok(RulePack {
            matchers,
            gazetteers,
            fold_age,
        })
    }

    pub fn builtin() -> Self {
        let read = |name: &str| {
            Some(
                match name {
                    "names.txt" => BUILTIN_NAMES,
                    "places.txt" => BUILTIN_PLACES,
                    "races.txt" => BUILTIN_RACES,
                    "gender.txt" => BUILTIN_GENDER,
                    _ => return None,
                }
                .to_string(),
            )
        };
        Self::parse(BUILTIN_PATTERNS, &read).expect("built-in rule pack parses")
    }

    pub fn with_fold_age(mut self, fold: bool) -> Self {
        self.fold_age = fold;
        self
    }

    /// Every rule with the category it reports.
    pub fn rules(&self) -> Vec<(String, PiiCategory)> {
        let mut out: Vec<(String, PiiCategory)> = self
            .matchers
            .iter()
            .map(|(m, c)| (format!("{m:?}"), *c))
            .collect();
        out.extend(self.gazetteers.iter().map(|(n, g)| (n.clone(), g.category)));
        out
    }

    pub fn gazetteer(&self, file: &str) -> Option<&Gazetteer> {
        self.gazetteers.iter().find(|(n, _)| n == file).map(|(_, g)| g)
    }
}

fn merge_adjacent(text: &str, mut ranges: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    ranges.sort_unstable();
    let mut out: Vec<(usize, usize)> = Vec::with_capacity(ranges.len());
    for (s, e) in ranges {
        if let Some(last) = out.last_mut() {
            if s >= last.1 && text[last.1..s].bytes().all(|b| b == b' ') && s - last.1 == 1 {
                last.1 = e;
                continue;
            }
        }
        out.push((s, e));
    }
    out
}

/// Rule-engine spans, sorted by start, with overlaps resolved.
pub fn detect_rules(text: &str, pack: &RulePack) -> Vec<PiiSpan> {
    if text.is_empty() {
        return Vec::new();
    }
    let toks = word_tokens(text);
    let lower: Vec<String> = toks.iter().map(|t| text[t.s..t.e].to_lowercase()).collect();
    let mut raw: Vec<(usize, usize, PiiCategory)> = Vec::new();
    for &(m, cat) in &pack.matchers {
        let found = match m {
            Matcher::Date => matchers::dates(text),
            Matcher::Age => matchers::ages(text, &toks, &lower),
            Matcher::PostalCode => matchers::postal_codes(text, &toks),
            Matcher::Coordinates => matchers::coordinates(text),
            Matcher::HonorificName => matchers::honorific_names(text, &toks, &lower),
            Matcher::LabeledName => matchers::labeled_names(text, &toks, &lower),
            Matcher::SexField => matchers::sex_fields(text, &toks, &lower),
        };
        raw.extend(found.into_iter().map(|(s, e)| (s, e, cat)));
    }
    for (_, g) in &pack.gazetteers {
        let mut found = g.find(text, &toks, &lower);
        if g.category == PiiCategory::Person {
            found = merge_adjacent(text, found);
        }
        raw.extend(found.into_iter().map(|(s, e)| (s, e, g.category)));
    }
    // Person runs found by different rules ("Name: Ethan Fraser") join up.
    let person: Vec<(usize, usize)> = raw
        .iter()
        .filter(|r| r.2 == PiiCategory::Person)
        .map(|r| (r.0, r.1))
        .collect();
    if !person.is_empty() {
        raw.retain(|r| r.2 != PiiCategory::Person);
        let merged = merge_adjacent(text, union(person));
        raw.extend(merged.into_iter().map(|(s, e)| (s, e, PiiCategory::Person)));
    }

    let map = OffsetMap::new(text);
    let candidates = raw
        .into_iter()
        .map(|(s, e, cat)| {
            PiiSpan::new(map.to_char(s), map.to_char(e), cat.folded(pack.fold_age), &text[s..e])
        })
        .collect();
    resolve_overlaps(candidates)
}

fn union(mut ranges: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    ranges.sort_unstable();
    let mut out: Vec<(usize, usize)> = Vec::new();
    for (s, e) in ranges {
        match out.last_mut() {
            Some(last) if s < last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

/// Replace every detected span with `replacement`.
pub fn scrub(text: &str, pack: &RulePack, replacement: &str) -> String {
    let spans = detect_rules(text, pack);
    let mut out = String::with_capacity(text.len());
    let offsets: Vec<usize> = text
        .char_indices()
        .map(|(b, _)| b)
        .chain(core::iter::once(text.len()))
        .collect();
    let mut pos = 0;
    for s in spans {
        out.push_str(&text[pos..offsets[s.start]]);
        out.push_str(replacement);
        pos = offsets[s.end];
    }
    out.push_str(&text[pos..]);
    out
}

/// Span counts per category over all documents of all splits.
pub fn category_counts(splits: &[CorpusSplit]) -> BTreeMap<PiiCategory, usize> {
    let mut counts = BTreeMap::new();
    for split in splits {
        for doc in &split.documents {
            for span in &doc.pii_spans {
                *counts.entry(span.category).or_insert(0) += 1;
            }
        }
    }
    counts
}

/// Categories with at least `min_count` spans corpus-wide.
pub fn filter_rare_categories(splits: &[CorpusSplit], min_count: usize) -> BTreeSet<PiiCategory> {
    category_counts(splits)
        .into_iter()
        .filter(|&(_, n)| n >= min_count)
        .map(|(c, _)| c)
        .collect()
}
