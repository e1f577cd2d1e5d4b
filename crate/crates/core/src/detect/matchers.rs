use alloc::string::String;
use alloc::vec::Vec;

use super::Tok;
use crate::date::scan_dates;

type Ranges = Vec<(usize, usize)>;

fn all_digits(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

fn is_capitalized(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_uppercase()) && s.chars().count() >= 2 && cs.all(char::is_alphabetic)
}

fn gap<'a>(text: &'a str, toks: &[Tok], i: usize) -> &'a str {
    &text[toks[i].e..toks[i + 1].s]
}

pub(crate) fn dates(text: &str) -> Ranges {
    scan_dates(text).into_iter().map(|m| (m.start, m.end)).collect()
}

const AGE_UNITS: [&str; 4] = ["year", "years", "yr", "yrs"];

fn small_number(text: &str, t: &Tok) -> bool {
    let s = &text[t.s..t.e];
    s.len() <= 3 && all_digits(s) && s.parse::<u32>().is_ok_and(|v| v <= 130)
}

/// "50-year-old", "94 years old", "50 yo", "50 y/o", "12 years of age",
/// and the number after "age"/"aged".
pub(crate) fn ages(text: &str, toks: &[Tok], lower: &[String]) -> Ranges {
    let b = text.as_bytes();
    let mut out = Vec::new();
    for i in 0..toks.len() {
        let t = &toks[i];
        let digits = lower[i].bytes().take_while(u8::is_ascii_digit).count();
        if (1..=3).contains(&digits) && &lower[i][digits..] == "yo" {
            out.push((t.s, t.e));
            continue;
        }
        if !small_number(text, t) {
            continue;
        }
        if t.s > 0 && matches!(b[t.s - 1], b'.' | b',') && t.s > 1 && b[t.s - 2].is_ascii_digit() {
            continue;
        }
        let sep_ok = |k: usize| {
            let g = gap(text, toks, k);
            g.is_empty() || g == " " || g == "-"
        };
        let mut found = None;
        if i + 1 < toks.len() && sep_ok(i) {
            let unit = lower[i + 1].as_str();
            if unit == "yo" {
                found = Some(toks[i + 1].e);
            } else if unit == "y" && i + 2 < toks.len() && gap(text, toks, i + 1) == "/" && lower[i + 2] == "o" {
                found = Some(toks[i + 2].e);
            } else if AGE_UNITS.contains(&unit) && i + 2 < toks.len() && sep_ok(i + 1) {
                if lower[i + 2] == "old" {
                    found = Some(toks[i + 2].e);
                } else if lower[i + 2] == "of"
                    && i + 3 < toks.len()
                    && lower[i + 3] == "age"
                    && gap(text, toks, i + 2) == " "
                {
                    found = Some(toks[i + 3].e);
                }
            }
        }
        if found.is_none() && i > 0 {
            let label = |k: usize| lower[k] == "age" || lower[k] == "aged";
            let g = gap(text, toks, i - 1);
            let short_gap = !g.is_empty() && g.len() <= 3 && g.bytes().all(|c| matches!(c, b' ' | b':' | b'\t'));
            if (label(i - 1) && short_gap)
                || (i > 1 && lower[i - 1] == "of" && lower[i - 2] == "age" && g == " ")
            {
                found = Some(t.e);
            }
        }
        if let Some(end) = found {
            out.push((t.s, end));
        }
    }
    out
}

/// Five-digit (optionally ZIP+4) and six-digit codes, plus Canadian "A1A 1A1".
pub(crate) fn postal_codes(text: &str, toks: &[Tok]) -> Ranges {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let t = &toks[i];
        let s = &text[t.s..t.e];
        let before_ok = t.s == 0 || !matches!(b[t.s - 1], b'.' | b',' | b'$' | b'#' | b'-' | b'/' | b':');
        let after = b.get(t.e).copied();
        let after_ok = !matches!(after, Some(b'.' | b',' | b'/' | b':' | b'%')) || !b.get(t.e + 1).is_some_and(u8::is_ascii_digit);
        if all_digits(s) && (s.len() == 5 || s.len() == 6) && before_ok && after_ok {
            let mut end = t.e;
            if s.len() == 5 && after == Some(b'-') && i + 1 < toks.len() && toks[i + 1].s == t.e + 1 {
                let n = &text[toks[i + 1].s..toks[i + 1].e];
                if n.len() == 4 && all_digits(n) {
                    end = toks[i + 1].e;
                    i += 1;
                }
            }
            if after != Some(b'-') || end != t.e {
                out.push((t.s, end));
            }
        } else if i + 1 < toks.len() && canadian(s) && canadian_tail(&text[toks[i + 1].s..toks[i + 1].e]) && gap(text, toks, i) == " " {
            out.push((t.s, toks[i + 1].e));
            i += 1;
        }
        i += 1;
    }
    out
}

fn canadian(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() == 3 && b[0].is_ascii_uppercase() && b[1].is_ascii_digit() && b[2].is_ascii_uppercase()
}

fn canadian_tail(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() == 3 && b[0].is_ascii_digit() && b[1].is_ascii_uppercase() && b[2].is_ascii_digit()
}

fn decimal_at(b: &[u8], mut i: usize) -> Option<(usize, f64)> {
    let start = i;
    if b.get(i) == Some(&b'-') {
        i += 1;
    }
    let int_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    if i == int_start || i - int_start > 3 || b.get(i) != Some(&b'.') {
        return None;
    }
    i += 1;
    let frac_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    if i - frac_start < 2 {
        return None;
    }
    let v = core::str::from_utf8(&b[start..i]).ok()?.parse().ok()?;
    Some((i, v))
}

/// "29.7604, -95.3698" style latitude/longitude pairs.
pub(crate) fn coordinates(text: &str) -> Ranges {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let boundary = i == 0 || !(b[i - 1].is_ascii_alphanumeric() || b[i - 1] == b'.' || b[i - 1] == b'-');
        if boundary && (b[i].is_ascii_digit() || b[i] == b'-') {
            if let Some((j, lat)) = decimal_at(b, i) {
                let mut k = j;
                if b.get(k) == Some(&b',') {
                    k += 1;
                    while b.get(k) == Some(&b' ') {
                        k += 1;
                    }
                    if let Some((end, lon)) = decimal_at(b, k) {
                        let clean = !b.get(end).is_some_and(|c| c.is_ascii_alphanumeric());
                        if clean && libm::fabs(lat) <= 90.0 && libm::fabs(lon) <= 180.0 {
                            out.push((i, end));
                            i = end;
                            continue;
                        }
                    }
                }
            }
        }
        i += 1;
    }
    out
}

const HONORIFICS: [&str; 6] = ["mr", "mrs", "ms", "miss", "dr", "prof"];

fn name_run(text: &str, toks: &[Tok], from: usize, max: usize) -> Option<(usize, usize)> {
    if from >= toks.len() || !is_capitalized(&text[toks[from].s..toks[from].e]) {
        return None;
    }
    let mut last = from;
    while last + 1 < toks.len()
        && last + 1 - from < max
        && gap(text, toks, last) == " "
        && is_capitalized(&text[toks[last + 1].s..toks[last + 1].e])
    {
        last += 1;
    }
    Some((toks[from].s, toks[last].e))
}

/// Capitalized words right after an honorific: "Mr. Sanchez", "Dr. Jane Smith".
pub(crate) fn honorific_names(text: &str, toks: &[Tok], lower: &[String]) -> Ranges {
    let mut out = Vec::new();
    for (i, word) in lower.iter().enumerate().take(toks.len().saturating_sub(1)) {
        if !HONORIFICS.contains(&word.as_str()) {
            continue;
        }
        let g = gap(text, toks, i);
        let g = g.strip_prefix('.').unwrap_or(g);
        if g.is_empty() || !g.bytes().all(|c| c == b' ') || g.len() > 2 {
            continue;
        }
        if let Some(r) = name_run(text, toks, i + 1, 2) {
            out.push(r);
        }
    }
    out
}

const NAME_LABELS: [&str; 5] = ["name", "patient", "attending", "appellant", "applicant"];

/// Capitalized words after a "Name:" style field label on the same line.
pub(crate) fn labeled_names(text: &str, toks: &[Tok], lower: &[String]) -> Ranges {
    let mut out = Vec::new();
    for (i, word) in lower.iter().enumerate().take(toks.len().saturating_sub(1)) {
        if !NAME_LABELS.contains(&word.as_str()) {
            continue;
        }
        let g = gap(text, toks, i).trim_matches([' ', '\t']);
        if g != ":" {
            continue;
        }
        if let Some(r) = name_run(text, toks, i + 1, 3) {
            out.push(r);
        }
    }
    out
}

/// Value of a "Sex:" or "Gender:" field.
pub(crate) fn sex_fields(text: &str, toks: &[Tok], lower: &[String]) -> Ranges {
    let mut out = Vec::new();
    for i in 0..toks.len().saturating_sub(1) {
        if lower[i] != "sex" && lower[i] != "gender" {
            continue;
        }
        if gap(text, toks, i).trim_matches([' ', '\t']) != ":" {
            continue;
        }
        if matches!(lower[i + 1].as_str(), "m" | "f" | "male" | "female") {
            out.push((toks[i + 1].s, toks[i + 1].e));
        }
    }
    out
}
