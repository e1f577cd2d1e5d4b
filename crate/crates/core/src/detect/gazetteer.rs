use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::Tok;
use crate::category::PiiCategory;

#[derive(Debug, Clone, PartialEq, Eq)]
struct Entry {
    tokens: Vec<String>,
    needs_period: bool,
}

/// Case-insensitive whole-token lexicon. Entries may span several tokens
/// joined by spaces or hyphens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gazetteer {
    pub category: PiiCategory,
    by_first: BTreeMap<String, Vec<Entry>>,
    len: usize,
}

pub(crate) fn lower_tokens(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

impl Gazetteer {
    /// One entry per line; `#` starts a comment. An entry ending in `.` only
    /// matches when the text has the period too.
    pub fn parse(src: &str, category: PiiCategory) -> Self {
        let mut by_first: BTreeMap<String, Vec<Entry>> = BTreeMap::new();
        let mut len = 0;
        for raw in src.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            let tokens = lower_tokens(line);
            if tokens.is_empty() {
                continue;
            }
            let entry = Entry {
                needs_period: line.ends_with('.'),
                tokens,
            };
            let list = by_first.entry(entry.tokens[0].clone()).or_default();
            if !list.contains(&entry) {
                list.push(entry);
                len += 1;
            }
        }
        for list in by_first.values_mut() {
            list.sort_by_key(|e| core::cmp::Reverse(e.tokens.len()));
        }
        Gazetteer {
            category,
            by_first,
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, phrase: &str) -> bool {
        let tokens = lower_tokens(phrase);
        tokens.first().is_some_and(|f| {
            self.by_first
                .get(f)
                .is_some_and(|l| l.iter().any(|e| e.tokens == tokens))
        })
    }

    /// Byte ranges of all longest matches, scanning left to right.
    pub(crate) fn find(&self, text: &str, toks: &[Tok], lower: &[String]) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < toks.len() {
            let mut hit = None;
            if let Some(entries) = self.by_first.get(&lower[i]) {
                for e in entries {
                    if let Some(end) = match_entry(text, toks, lower, i, e) {
                        hit = Some((e.tokens.len(), end));
                        break;
                    }
                }
            }
            match hit {
                Some((n, end)) => {
                    out.push((toks[i].s, end));
                    i += n;
                }
                None => i += 1,
            }
        }
        out
    }
}

fn joinable(gap: &str) -> bool {
    !gap.is_empty() && gap.len() <= 2 && gap.bytes().all(|b| matches!(b, b' ' | b'\t' | b'-'))
}

fn match_entry(text: &str, toks: &[Tok], lower: &[String], i: usize, e: &Entry) -> Option<usize> {
    let n = e.tokens.len();
    if i + n > toks.len() {
        return None;
    }
    for k in 0..n {
        if lower[i + k] != e.tokens[k] {
            return None;
        }
        if k > 0 && !joinable(&text[toks[i + k - 1].e..toks[i + k].s]) {
            return None;
        }
    }
    let end = toks[i + n - 1].e;
    if e.needs_period {
        return (text.as_bytes().get(end) == Some(&b'.')).then_some(end + 1);
    }
    Some(end)
}
