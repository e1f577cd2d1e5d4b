//! Tokenization and character-offset helpers shared by every module.

use alloc::string::String;
use alloc::vec::Vec;

/// Identifier of the tokenizer below. Reports embed it so scores from
/// different runs are only compared when it matches.
pub const TOKENIZER_VERSION: &str = "lower-alnum-v1";

/// Whitespace-token count, the unit used for document lengths.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}')
}

/// Lowercases, deletes apostrophes, turns every other non-alphanumeric
/// character into a separator and collapses runs of separators.
pub fn normalize_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars() {
        if is_apostrophe(c) {
            continue;
        }
        if c.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            for l in c.to_lowercase() {
                if l.is_alphanumeric() {
                    out.push(l);
                }
            }
        } else {
            pending_space = true;
        }
    }
    out
}

/// Tokens used by ROUGE, BLEU and leak matching.
pub fn metric_tokens(text: &str) -> Vec<String> {
    normalize_text(text)
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect()
}

/// Redaction placeholders are runs of three or more underscores or four or
/// more `X`. Returns byte ranges of each run.
pub fn placeholder_runs(text: &str) -> Vec<(usize, usize)> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        if c == b'_' || c == b'X' {
            let mut j = i;
            while j < b.len() && b[j] == c {
                j += 1;
            }
            let min = if c == b'_' { 3 } else { 4 };
            // An X-run glued to other letters is a word, not a redaction.
            let glued = c == b'X'
                && ((i > 0 && b[i - 1].is_ascii_alphanumeric())
                    || (j < b.len() && b[j].is_ascii_alphanumeric()));
            if j - i >= min && !glued {
                out.push((i, j));
            }
            i = j;
        } else {
            i += 1;
        }
    }
    out
}

pub fn contains_placeholder(text: &str) -> bool {
    !placeholder_runs(text).is_empty()
}

/// Byte offset of the `char_idx`-th character, or `None` past the end.
pub fn char_to_byte(text: &str, char_idx: usize) -> Option<usize> {
    if text.is_ascii() {
        return (char_idx <= text.len()).then_some(char_idx);
    }
    let mut count = 0;
    for (b, _) in text.char_indices() {
        if count == char_idx {
            return Some(b);
        }
        count += 1;
    }
    (count == char_idx).then_some(text.len())
}

/// Slice by character offsets (half-open).
pub fn slice_chars(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let s = char_to_byte(text, start)?;
    let e = char_to_byte(text, end)?;
    text.get(s..e)
}

pub fn char_len(text: &str) -> usize {
    if text.is_ascii() {
        text.len()
    } else {
        text.chars().count()
    }
}

/// Converts byte offsets into character offsets for one text.
pub struct OffsetMap {
    // Empty for ASCII text, where both offsets coincide.
    starts: Vec<usize>,
    len: usize,
}

impl OffsetMap {
    pub fn new(text: &str) -> Self {
        let starts = if text.is_ascii() {
            Vec::new()
        } else {
            text.char_indices().map(|(b, _)| b).collect()
        };
        OffsetMap {
            starts,
            len: text.len(),
        }
    }

    pub fn to_char(&self, byte: usize) -> usize {
        if self.starts.is_empty() {
            return byte;
        }
        if byte >= self.len {
            return self.starts.len();
        }
        match self.starts.binary_search(&byte) {
            Ok(i) | Err(i) => i,
        }
    }
}

const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "st", "jr", "sr", "no", "vs", "prof", "e.g", "i.e", "approx",
];

fn ends_with_abbreviation(prefix: &str) -> bool {
    let word = prefix
        .rsplit(|c: char| c.is_whitespace() || c == '(')
        .next()
        .unwrap_or("");
    if word.len() == 1 && word.as_bytes()[0].is_ascii_uppercase() {
        return true;
    }
    ABBREVIATIONS.iter().any(|a| word.eq_ignore_ascii_case(a))
}

/// Splits text into sentences at `.`, `!` or `?` followed by whitespace (or
/// end of text), skipping common abbreviations and initials. Newlines that end a non-empty line also close a sentence.
pub fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let terminal = matches!(b, b'.' | b'!' | b'?')
            && (i + 1 == bytes.len() || bytes[i + 1].is_ascii_whitespace())
            && !(b == b'.' && ends_with_abbreviation(&text[start..i]));
        if terminal || b == b'\n' {
            let end = if b == b'\n' { i } else { i + 1 };
            let s = text[start..end].trim();
            if !s.is_empty() {
                out.push(s);
            }
            start = i + 1;
        }
        i += 1;
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}
