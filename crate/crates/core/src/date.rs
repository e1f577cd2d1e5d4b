//! Calendar dates: civil-day arithmetic and a small scanner that finds date
//! expressions in free text and canonicalizes them to ISO form.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

/// A proleptic Gregorian calendar date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct CivilDate {
    pub year: i32,
    pub month: u8,
    pub day: u8,
}

pub fn is_leap_year(year: i32) -> bool {
    (year % 4 == 0 && year % 100 != 0) || year % 400 == 0
}

pub fn days_in_month(year: i32, month: u8) -> u8 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap_year(year) => 29,
        2 => 28,
        _ => 0,
    }
}

impl CivilDate {
    pub fn new(year: i32, month: u8, day: u8) -> Option<Self> {
        ((1..=12).contains(&month) && day >= 1 && day <= days_in_month(year, month))
            .then_some(CivilDate { year, month, day })
    }

    /// Days since 1970-01-01.
    pub fn to_days(self) -> i64 {
        let y = i64::from(self.year) - i64::from(self.month <= 2);
        let era = if y >= 0 { y } else { y - 399 } / 400;
        let yoe = y - era * 400;
        let m = i64::from(self.month);
        let doy = (153 * (if m > 2 { m - 3 } else { m + 9 }) + 2) / 5 + i64::from(self.day) - 1;
        let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        era * 146_097 + doe - 719_468
    }

    pub fn from_days(days: i64) -> Self {
        let z = days + 719_468;
        let era = if z >= 0 { z } else { z - 146_096 } / 146_097;
        let doe = z - era * 146_097;
        let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
        let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
        let mp = (5 * doy + 2) / 153;
        let day = (doy - (153 * mp + 2) / 5 + 1) as u8;
        let month = if mp < 10 { mp + 3 } else { mp - 9 } as u8;
        let year = (yoe + era * 400 + i64::from(month <= 2)) as i32;
        CivilDate { year, month, day }
    }

    /// Whole years elapsed from `self` to `on`.
    pub fn years_until(self, on: CivilDate) -> i32 {
        let mut years = on.year - self.year;
        if (on.month, on.day) < (self.month, self.day) {
            years -= 1;
        }
        years
    }

    pub fn parse_iso(s: &str) -> Option<Self> {
        let b = s.as_bytes();
        if b.len() != 10 || b[4] != b'-' || b[7] != b'-' {
            return None;
        }
        let year = parse_digits(&b[0..4])? as i32;
        let month = parse_digits(&b[5..7])? as u8;
        let day = parse_digits(&b[8..10])? as u8;
        CivilDate::new(year, month, day)
    }
}

impl fmt::Display for CivilDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

impl From<CivilDate> for String {
    fn from(d: CivilDate) -> String {
        format!("{d}")
    }
}

impl TryFrom<String> for CivilDate {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        CivilDate::parse_iso(&s).ok_or_else(|| format!("invalid ISO date `{s}`"))
    }
}

fn parse_digits(b: &[u8]) -> Option<u32> {
    if b.is_empty() || !b.iter().all(u8::is_ascii_digit) {
        return None;
    }
    Some(b.iter().fold(0u32, |acc, d| acc * 10 + u32::from(d - b'0')))
}

/// A date expression found in text. Offsets are bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DateMatch {
    pub start: usize,
    pub end: usize,
    pub canonical: String,
}

const MONTHS: [(&str, u8); 21] = [
    ("january", 1),
    ("february", 2),
    ("march", 3),
    ("april", 4),
    ("may", 5),
    ("june", 6),
    ("july", 7),
    ("august", 8),
    ("september", 9),
    ("october", 10),
    ("november", 11),
    ("december", 12),
    ("jan", 1),
    ("feb", 2),
    ("mar", 3),
    ("apr", 4),
    ("jun", 6),
    ("jul", 7),
    ("aug", 8),
    ("sept", 9),
    ("sep", 9),
];
const MONTHS_TAIL: [(&str, u8); 3] = [("oct", 10), ("nov", 11), ("dec", 12)];

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b >= 0x80
}

fn digits_at(b: &[u8], i: usize, min: usize, max: usize) -> Option<(u32, usize)> {
    let mut j = i;
    while j < b.len() && j - i < max && b[j].is_ascii_digit() {
        j += 1;
    }
    if j - i < min || (j < b.len() && b[j].is_ascii_digit()) {
        return None;
    }
    Some((parse_digits(&b[i..j])?, j))
}

fn month_at(b: &[u8], i: usize) -> Option<(u8, usize)> {
    if i >= b.len() || !b[i].is_ascii_uppercase() {
        return None;
    }
    let mut j = i;
    while j < b.len() && b[j].is_ascii_alphabetic() {
        j += 1;
    }
    let word = &b[i..j];
    let month = MONTHS
        .iter()
        .chain(MONTHS_TAIL.iter())
        .find(|(name, _)| word.eq_ignore_ascii_case(name.as_bytes()))
        .map(|&(_, m)| m)?;
    if word.len() <= 4 && j < b.len() && b[j] == b'.' {
        j += 1;
    }
    Some((month, j))
}

fn skip_ordinal(b: &[u8], i: usize) -> usize {
    if i + 2 <= b.len() {
        let suf = &b[i..i + 2];
        let ordinal = [b"st", b"nd", b"rd", b"th"].iter().any(|s| suf.eq_ignore_ascii_case(*s));
        if ordinal && (i + 2 == b.len() || !is_word_byte(b[i + 2])) {
            return i + 2;
        }
    }
    i
}

fn spaces(b: &[u8], i: usize) -> usize {
    let mut j = i;
    while j < b.len() && b[j] == b' ' {
        j += 1;
    }
    j
}

fn ends_cleanly(b: &[u8], end: usize) -> bool {
    end == b.len() || !is_word_byte(b[end])
}

fn iso_at(b: &[u8], i: usize) -> Option<(usize, String)> {
    let (year, j) = digits_at(b, i, 4, 4)?;
    if b.get(j) != Some(&b'-') {
        return None;
    }
    let (month, j) = digits_at(b, j + 1, 1, 2)?;
    if b.get(j) != Some(&b'-') {
        return None;
    }
    let (day, mut j) = digits_at(b, j + 1, 1, 2)?;
    let date = CivilDate::new(year as i32, month as u8, day as u8)?;
    // Optional time of day, kept inside the span.
    if matches!(b.get(j), Some(b' ') | Some(b'T')) {
        if let Some((h, k)) = digits_at(b, j + 1, 1, 2) {
            if h < 24 && b.get(k) == Some(&b':') {
                if let Some((_, mut k)) = digits_at(b, k + 1, 2, 2) {
                    if b.get(k) == Some(&b':') {
                        if let Some((_, k2)) = digits_at(b, k + 1, 2, 2) {
                            k = k2;
                        }
                    }
                    j = k;
                }
            }
        }
    }
    ends_cleanly(b, j).then(|| (j, format!("{date}")))
}

fn slash_at(b: &[u8], i: usize) -> Option<(usize, String)> {
    let (first, j) = digits_at(b, i, 1, 2)?;
    if b.get(j) != Some(&b'/') {
        return None;
    }
    let (second, j) = digits_at(b, j + 1, 1, 2)?;
    if b.get(j) != Some(&b'/') {
        return None;
    }
    let (year, j) = digits_at(b, j + 1, 4, 4)?;
    // Month first unless the first field cannot be a month.
    let (month, day) = if first > 12 { (second, first) } else { (first, second) };
    let date = CivilDate::new(year as i32, month as u8, day as u8)?;
    ends_cleanly(b, j).then(|| (j, format!("{date}")))
}

fn month_first_at(b: &[u8], i: usize) -> Option<(usize, String)> {
    let (month, j) = month_at(b, i)?;
    let j = spaces(b, j);
    if j == b.len() {
        return None;
    }
    if let Some((day, k)) = digits_at(b, j, 1, 2) {
        let mut k = skip_ordinal(b, k);
        if b.get(k) == Some(&b',') {
            k += 1;
        }
        let k2 = spaces(b, k);
        if k2 > k || b.get(k.wrapping_sub(1)) == Some(&b',') {
            if let Some((year, end)) = digits_at(b, k2, 4, 4) {
                let date = CivilDate::new(year as i32, month, day as u8)?;
                return ends_cleanly(b, end).then(|| (end, format!("{date}")));
            }
        }
        return None;
    }
    let mut k = j;
    if b.get(k) == Some(&b',') {
        k = spaces(b, k + 1);
    }
    let (year, end) = digits_at(b, k, 4, 4)?;
    ends_cleanly(b, end).then(|| (end, format!("{year:04}-{month:02}")))
}

fn day_first_at(b: &[u8], i: usize) -> Option<(usize, String)> {
    let (day, j) = digits_at(b, i, 1, 2)?;
    let j = skip_ordinal(b, j);
    let k = spaces(b, j);
    if k == j {
        return None;
    }
    let (month, k) = month_at(b, k)?;
    let mut k = k;
    if b.get(k) == Some(&b',') {
        k += 1;
    }
    let k2 = spaces(b, k);
    if k2 == k {
        return None;
    }
    let (year, end) = digits_at(b, k2, 4, 4)?;
    let date = CivilDate::new(year as i32, month, day as u8)?;
    ends_cleanly(b, end).then(|| (end, format!("{date}")))
}

fn bare_year_at(b: &[u8], i: usize) -> Option<(usize, String)> {
    if i > 0 && matches!(b[i - 1], b'.' | b'-' | b'/' | b':' | b'+' | b'$') {
        return None;
    }
    let (year, j) = digits_at(b, i, 4, 4)?;
    if !(1900..=2199).contains(&year) || !ends_cleanly(b, j) {
        return None;
    }
    if let Some(&next) = b.get(j) {
        let follow_digit = b.get(j + 1).is_some_and(u8::is_ascii_digit);
        if matches!(next, b'.' | b'-' | b'/' | b':' | b',') && follow_digit {
            return None;
        }
    }
    Some((j, format!("{year}")))
}

/// Finds date expressions left to right, preferring the longest expression
/// starting at each token boundary. Matches never overlap.
pub fn scan_dates(text: &str) -> Vec<DateMatch> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let at_boundary = i == 0 || !is_word_byte(b[i - 1]);
        if at_boundary && b[i].is_ascii_alphanumeric() {
            let found = [iso_at, slash_at, month_first_at, day_first_at, bare_year_at]
                .iter()
                .filter_map(|f| f(b, i))
                .max_by_key(|(end, _)| *end);
            if let Some((end, canonical)) = found {
                out.push(DateMatch {
                    start: i,
                    end,
                    canonical,
                });
                i = end;
                continue;
            }
        }
        i += 1;
    }
    out
}

fn year_month(t: &str) -> Option<String> {
    let b = t.as_bytes();
    if b.len() != 7 || b[4] != b'-' {
        return None;
    }
    let year = parse_digits(&b[..4])?;
    let month = parse_digits(&b[5..])?;
    (1..=12).contains(&month).then(|| format!("{year:04}-{month:02}"))
}

/// Canonical form of `text` when the whole string is one date expression.
pub fn canonicalize_date(text: &str) -> Option<String> {
    let t = text.trim();
    if let Some(month_form) = year_month(t) {
        return Some(month_form);
    }
    let found = scan_dates(t);
    match found.as_slice() {
        [m] if m.start == 0 && m.end == t.len() => Some(m.canonical.clone()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn civil_day_round_trip() {
        for days in [-800_000i64, -1, 0, 1, 19_000, 60_000, 2_000_000] {
            assert_eq!(CivilDate::from_days(days).to_days(), days);
        }
        assert_eq!(CivilDate::new(1970, 1, 1).unwrap().to_days(), 0);
        assert_eq!(CivilDate::new(2000, 3, 1).unwrap().to_days(), 11_017);
        assert!(CivilDate::new(2023, 2, 29).is_none());
        assert!(CivilDate::new(2024, 2, 29).is_some());
    }

    #[test]
    fn years_until_respects_birthday() {
        let b = CivilDate::new(1990, 6, 15).unwrap();
        assert_eq!(b.years_until(CivilDate::new(2020, 6, 14).unwrap()), 29);
        assert_eq!(b.years_until(CivilDate::new(2020, 6, 15).unwrap()), 30);
    }

    #[test]
    fn canonicalizes_formats() {
        for (raw, want) in [
            ("2023-09-20", "2023-09-20"),
            ("2140-05-28 12:54:00", "2140-05-28"),
            ("09/20/2023", "2023-09-20"),
            ("20/09/2023", "2023-09-20"),
            ("September 20, 2023", "2023-09-20"),
            ("Sep. 20 2023", "2023-09-20"),
            ("20th September 2023", "2023-09-20"),
            ("September 2023", "2023-09"),
            ("2020", "2020"),
        ] {
            assert_eq!(canonicalize_date(raw).as_deref(), Some(want), "{raw}");
        }
        assert_eq!(canonicalize_date("2023-09").as_deref(), Some("2023-09"));
        assert_eq!(canonicalize_date("2023-13-01"), None);
        assert_eq!(canonicalize_date("12345"), None);
        assert_eq!(canonicalize_date("may 2020 x"), None);
    }

    #[test]
    fn scans_dates_in_context() {
        let t = "admission (2023-09-20) and surgery (2020); zip 19104, coords 40.2006, -74.2010";
        let found: Vec<_> = scan_dates(t).into_iter().map(|m| &t[m.start..m.end]).collect();
        assert_eq!(found, ["2023-09-20", "2020"]);
    }
}
