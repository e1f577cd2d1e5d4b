#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sumleak::core::anno::Answer;
use sumleak::core::corpus::{CorpusSplit, Document, SourceTask, SplitName};
use sumleak::core::gateway::{BackendError, ChatBackend, ChatRequest, Completion};
use sumleak::core::{PiiCategory, PiiSpan};

/// Redacted sentences. Every placeholder sits in a context naming what it
/// held.
pub const REDACTED: &[&str] = &[
    "Name: ___ Unit No: A-17",
    "Date of Birth: ___ Sex: ___",
    "Mr. ___ is a ___ yr old man with chest pain.",
    "Admission Date: ___",
    "The patient lives in ___ and was seen by Dr. ___.",
    "Race: ___.",
    "Zip code ___ was listed on the intake form.",
    "Mrs. ___ reports dizziness since ___.",
    "Discharge Date: ___",
    "Age: ___ at presentation.",
    "Ethnicity: ___",
    "Follow up was arranged with Ms. ___ in clinic.",
];

/// Placeholder-free sentences with known gender pronouns.
pub const PRONOUN_LINES: &[(&str, &[&str])] = &[
    ("He tolerated the procedure well.", &["He"]),
    ("She was advised to rest and hydrate.", &["She"]),
    ("His symptoms improved overnight.", &["His"]),
    ("Her daughter accompanied her to the visit.", &["Her", "her"]),
    ("The team discussed the plan with him.", &["him"]),
];

/// Gender words fixed in the redacted sentences: (sentence, placeholder-free
/// fragment of it, words inside the fragment).
pub const SENTENCE_MARKERS: &[(&str, &str, &[&str])] = &[
    ("Mr. ___ is a ___ yr old man with chest pain.", "Mr. ", &["Mr."]),
    ("Mr. ___ is a ___ yr old man with chest pain.", " yr old man with chest pain.", &["man"]),
    ("Mrs. ___ reports dizziness since ___.", "Mrs. ", &["Mrs."]),
    ("Follow up was arranged with Ms. ___ in clinic.", "with Ms. ", &["Ms."]),
];

pub const FILLER: &[&str] = &[
    "Blood pressure remained stable throughout the stay.",
    "No acute distress was observed on examination.",
    "Medications were reconciled before discharge.",
    "Laboratory values were within normal limits.",
    "The wound was clean and dry without signs of infection.",
    "Physical therapy was consulted for mobility.",
    "Pain was controlled with oral analgesics.",
    "Diet was advanced as tolerated.",
];

/// A redacted document built from the sentence banks, plus the fragments
/// carrying known gender words.
pub fn redacted_doc(i: usize, rng: &mut ChaCha8Rng) -> (Document, Vec<&'static str>) {
    let mut lines: Vec<&str> = Vec::new();
    let mut pronouns = Vec::new();
    let k = rng.gen_range(3..=6);
    let mut bank: Vec<&str> = REDACTED.to_vec();
    bank.shuffle(rng);
    for s in bank.into_iter().take(k) {
        lines.push(s);
        pronouns.extend(SENTENCE_MARKERS.iter().filter(|m| m.0 == s).map(|m| m.1));
        lines.push(FILLER[rng.gen_range(0..FILLER.len())]);
    }
    let (p, _) = PRONOUN_LINES[rng.gen_range(0..PRONOUN_LINES.len())];
    lines.push(p);
    pronouns.push(p);
    lines.push(FILLER[rng.gen_range(0..FILLER.len())]);
    (Document::new(format!("doc-{i:04}"), lines.join(" "), SourceTask::Medical), pronouns)
}

pub fn redacted_corpus(n: usize, seed: u64) -> (CorpusSplit, Vec<Vec<&'static str>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (docs, pron): (Vec<_>, Vec<_>) = (0..n).map(|i| redacted_doc(i, &mut rng)).unzip();
    (CorpusSplit::new(SplitName::Test, docs).unwrap(), pron)
}

fn marker_words(fragment: &str) -> &'static [&'static str] {
    PRONOUN_LINES
        .iter()
        .find(|(l, _)| *l == fragment)
        .map(|p| p.1)
        .or_else(|| SENTENCE_MARKERS.iter().find(|m| m.1 == fragment).map(|m| m.2))
        .expect("known fragment")
}

/// GENDER spans for the known gender words of `fragments` inside `body`,
/// located by plain string search.
pub fn gender_spans(body: &str, fragments: &[&str]) -> Vec<PiiSpan> {
    let mut out = Vec::new();
    for line in fragments {
        let words = marker_words(line);
        let at = body.find(line).expect("fragment survives injection");
        let mut from = 0;
        for w in words {
            let rel = line[from..]
                .match_indices(w)
                .find(|(k, _)| {
                    let s = from + k;
                    let before = line[..s].chars().last().is_none_or(|c| !c.is_alphanumeric());
                    let after = line[s + w.len()..].chars().next().is_none_or(|c| !c.is_alphanumeric());
                    before && after
                })
                .map(|(k, _)| from + k)
                .unwrap();
            let b = at + rel;
            let start = body[..b].chars().count();
            out.push(PiiSpan::new(start, start + w.chars().count(), PiiCategory::Gender, *w));
            from = rel + w.len();
        }
    }
    out
}

/// Replies with the same text to every request.
pub struct Fixed(pub &'static str);

impl ChatBackend for Fixed {
    fn id(&self) -> &str {
        "fixed"
    }

    fn chat(&self, req: &ChatRequest) -> Result<Completion, BackendError> {
        Ok(Completion::counted(req, self.0.to_string()))
    }
}

/// Main-phase answer sheets (annotator 1, annotator 2) for one question,
/// expanded from cell counts.
pub fn expand(cells: &[((Answer, Answer), usize)]) -> (Vec<Answer>, Vec<Answer>) {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for &((x, y), c) in cells {
        for _ in 0..c {
            a.push(x);
            b.push(y);
        }
    }
    (a, b)
}

/// Stored 100-pair answer sheets whose agreement is 0.71, 1.0 and 0.78 for
/// Q1, Q2 and Q3 and whose answer shares follow the reported distribution.
pub fn kappa_fixture() -> BTreeMap<&'static str, (Vec<Answer>, Vec<Answer>)> {
    use Answer::{Both, Neither, SummaryA as A, SummaryB as B};
    let mut m = BTreeMap::new();
    m.insert("q1", expand(&[((B, B), 4), ((B, Neither), 2), ((Neither, B), 1), ((Neither, Neither), 93)]));
    m.insert("q2", expand(&[((A, A), 6), ((B, B), 6), ((Both, Both), 1), ((Neither, Neither), 87)]));
    m.insert(
        "q3",
        expand(&[
            ((A, A), 42),
            ((A, Both), 1),
            ((B, A), 4),
            ((B, B), 39),
            ((B, Both), 4),
            ((Both, B), 4),
            ((Both, Both), 6),
        ]),
    );
    m
}
