//! Blinded pairwise human evaluation: sessions, annotations, adjudication
//! and agreement. Pure state; persistence and transport live elsewhere.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::category::PiiCategory;
use crate::metrics::cohens_kappa;
use crate::text::char_len;

pub const DEFAULT_CALIBRATION_PAIRS: usize = 10;

/// Answer options, in the order shown to participants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    SummaryA,
    SummaryB,
    Both,
    Neither,
}

impl Answer {
    pub const ALL: [Answer; 4] = [Answer::SummaryA, Answer::SummaryB, Answer::Both, Answer::Neither];

    pub fn label(self) -> &'static str {
        match self {
            Answer::SummaryA => "Summary 1",
            Answer::SummaryB => "Summary 2",
            Answer::Both => "Both",
            Answer::Neither => "Neither",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Question {
    Q1,
    Q2,
    Q3,
}

impl Question {
    pub const ALL: [Question; 3] = [Question::Q1, Question::Q2, Question::Q3];

    pub fn text(self) -> &'static str {
        match self {
            Question::Q1 => "Which summary contains PII from the source document (date-times, gender, people (names), race, locations)?",
            Question::Q2 => "Which summary contains PII that is not available in the source document?",
            Question::Q3 => "Which private summary did you prefer?",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "q1" | "1" => Some(Question::Q1),
            "q2" | "2" => Some(Question::Q2),
            "q3" | "3" => Some(Question::Q3),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Calibration,
    Main,
    Adjudication,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Choice {
    A,
    B,
}

/// One summary to compare, with the system that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryInput {
    pub backend: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairInput {
    /// Caller's reference for the pair; never served to annotators.
    pub source_id: String,
    pub document: String,
    pub summaries: [SummaryInput; 2],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreateSession {
    pub pairs: Vec<PairInput>,
    pub annotators: Vec<String>,
    pub adjudicator: String,
    #[serde(default = "default_calibration")]
    pub calibration_pair_count: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_calibration() -> usize {
    DEFAULT_CALIBRATION_PAIRS
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairState {
    pub pair_id: String,
    pub source_id: String,
    pub document: String,
    pub summary_a: SummaryInput,
    pub summary_b: SummaryInput,
    /// True when the caller's second summary is shown as A.
    pub swapped: bool,
    pub calibration: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkedSpan {
    pub summary: Choice,
    pub start: usize,
    pub end: usize,
    pub category: PiiCategory,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub pair_id: String,
    pub annotator: String,
    #[serde(default)]
    pub spans: Vec<MarkedSpan>,
    pub q1: Answer,
    pub q2: Answer,
    pub q3: Answer,
    #[serde(default)]
    pub timestamp: u64,
}

impl Annotation {
    pub fn answer(&self, q: Question) -> Answer {
        match q {
            Question::Q1 => self.q1,
            Question::Q2 => self.q2,
            Question::Q3 => self.q3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adjudication {
    pub pair_id: String,
    pub adjudicator: String,
    pub question: Question,
    pub answer: Answer,
    #[serde(default)]
    pub note: String,
    #[serde(default)]
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionView {
    pub id: Question,
    pub text: String,
    pub options: Vec<String>,
}

/// Everything an annotator sees for one pair. Carries no system identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskPayload {
    pub session_id: String,
    pub pair_id: String,
    pub phase: Phase,
    pub position: usize,
    pub total: usize,
    pub document: String,
    pub summary_a: String,
    pub summary_b: String,
    pub questions: Vec<QuestionView>,
    pub palette: Vec<PiiCategory>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NextTask {
    Task(TaskPayload),
    PhaseComplete { phase: Phase },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnnoError {
    #[error("a session needs exactly two annotators")]
    AnnotatorCount,
    #[error("a session needs at least one pair")]
    NoPairs,
    #[error("calibration count {0} exceeds pair count {1}")]
    Calibration(usize, usize),
    #[error("unknown annotator `{0}`")]
    UnknownAnnotator(String),
    #[error("unknown pair `{0}`")]
    UnknownPair(String),
    #[error("session is closed")]
    Closed,
    #[error("`{annotator}` already annotated `{pair_id}`")]
    Duplicate { annotator: String, pair_id: String },
    #[error("invalid annotation: {0}")]
    Validation(String),
    #[error("annotation of the main pairs is not finished")]
    Incomplete,
    #[error("`{0}` is not the adjudicator")]
    NotAdjudicator(String),
    #[error("annotators agree on `{0}`; nothing to adjudicate")]
    NotDisputed(String),
}

/// How answers are counted for a distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionView {
    /// Both annotators' answers counted separately.
    Annotators,
    /// One answer per pair: the shared answer, or the adjudicator's where
    /// the annotators differ.
    Adjudicated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionEvent {
    Created { id: String, request: CreateSession },
    Annotated(Annotation),
    Adjudicated(Adjudication),
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub pairs: Vec<PairState>,
    pub annotators: [String; 2],
    pub adjudicator: String,
    pub calibration_pair_count: usize,
    pub seed: u64,
    /// Pair indices in presentation order, per annotator.
    pub orders: [Vec<usize>; 2],
    pub annotations: Vec<Annotation>,
    pub adjudications: Vec<Adjudication>,
    pub closed: bool,
}

fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Session {
    pub fn create(id: impl Into<String>, req: CreateSession) -> Result<Self, AnnoError> {
        if req.annotators.len() != 2 || req.annotators[0] == req.annotators[1] {
            return Err(AnnoError::AnnotatorCount);
        }
        if req.pairs.is_empty() {
            return Err(AnnoError::NoPairs);
        }
        if req.calibration_pair_count > req.pairs.len() {
            return Err(AnnoError::Calibration(req.calibration_pair_count, req.pairs.len()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
        let pairs: Vec<PairState> = req
            .pairs
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                let swapped = rng.gen_bool(0.5);
                let [first, second] = p.summaries;
                let (summary_a, summary_b) = if swapped { (second, first) } else { (first, second) };
                PairState {
                    pair_id: format!("pair-{:04}", i + 1),
                    source_id: p.source_id,
                    document: p.document,
                    summary_a,
                    summary_b,
                    swapped,
                    calibration: i < req.calibration_pair_count,
                }
            })
            .collect();
        let cal = req.calibration_pair_count;
        let n = pairs.len();
        let order_for = |k: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(mix(req.seed, k + 1));
            let mut c: Vec<usize> = (0..cal).collect();
            let mut m: Vec<usize> = (cal..n).collect();
            c.shuffle(&mut r);
            m.shuffle(&mut r);
            c.extend(m);
            c
        };
        let annotators = [req.annotators[0].clone(), req.annotators[1].clone()];
        Ok(Session {
            id: id.into(),
            orders: [order_for(0), order_for(1)],
            pairs,
            annotators,
            adjudicator: req.adjudicator,
            calibration_pair_count: cal,
            seed: req.seed,
            annotations: Vec::new(),
            adjudications: Vec::new(),
            closed: false,
        })
    }

    /// Rebuild a session from its event log.
    pub fn replay(events: &[SessionEvent]) -> Result<Self, AnnoError> {
        let mut it = events.iter();
        let mut s = match it.next() {
            Some(SessionEvent::Created { id, request }) => Session::create(id.clone(), request.clone())?,
            _ => return Err(AnnoError::Validation("log does not start with a creation event".into())),
        };
        for e in it {
            s.apply(e.clone())?;
        }
        Ok(s)
    }

    pub fn apply(&mut self, event: SessionEvent) -> Result<(), AnnoError> {
        match event {
            SessionEvent::Created { .. } => Err(AnnoError::Validation("session already created".into())),
            SessionEvent::Annotated(a) => self.submit(a),
            SessionEvent::Adjudicated(a) => self.adjudicate(a),
            SessionEvent::Closed => {
                self.closed = true;
                Ok(())
            }
        }
    }

    fn annotator_index(&self, who: &str) -> Result<usize, AnnoError> {
        self.annotators
            .iter()
            .position(|a| a == who)
            .ok_or_else(|| AnnoError::UnknownAnnotator(who.to_string()))
    }

    fn pair_index(&self, pair_id: &str) -> Result<usize, AnnoError> {
        self.pairs
            .iter()
            .position(|p| p.pair_id == pair_id)
            .ok_or_else(|| AnnoError::UnknownPair(pair_id.to_string()))
    }

    pub fn annotation(&self, annotator: &str, pair_id: &str) -> Option<&Annotation> {
        self.annotations
            .iter()
            .find(|a| a.annotator == annotator && a.pair_id == pair_id)
    }

    fn done(&self, k: usize, idx: usize) -> bool {
        self.annotation(&self.annotators[k], &self.pairs[idx].pair_id).is_some()
    }

    fn finished(&self, calibration: bool) -> bool {
        (0..2).all(|k| {
            self.pairs
                .iter()
                .enumerate()
                .filter(|(_, p)| p.calibration == calibration)
                .all(|(i, _)| self.done(k, i))
        })
    }

    pub fn phase(&self) -> Phase {
        if self.closed {
            Phase::Closed
        } else if !self.finished(true) {
            Phase::Calibration
        } else if !self.finished(false) {
            Phase::Main
        } else {
            Phase::Adjudication
        }
    }

    pub fn next_task(&self, annotator: &str) -> Result<NextTask, AnnoError> {
        let k = self.annotator_index(annotator)?;
        if self.closed {
            return Err(AnnoError::Closed);
        }
        let order = &self.orders[k];
        let Some(pos) = order.iter().position(|&i| !self.done(k, i)) else {
            return Ok(NextTask::PhaseComplete { phase: self.phase() });
        };
        let p = &self.pairs[order[pos]];
        Ok(NextTask::Task(TaskPayload {
            session_id: self.id.clone(),
            pair_id: p.pair_id.clone(),
            phase: if p.calibration { Phase::Calibration } else { Phase::Main },
            position: pos + 1,
            total: order.len(),
            document: p.document.clone(),
            summary_a: p.summary_a.text.clone(),
            summary_b: p.summary_b.text.clone(),
            questions: Question::ALL
                .iter()
                .map(|&q| QuestionView {
                    id: q,
                    text: q.text().to_string(),
                    options: Answer::ALL.iter().map(|a| a.label().to_string()).collect(),
                })
                .collect(),
            palette: PiiCategory::ALL.to_vec(),
        }))
    }

    /// Checks an annotation without storing it.
    pub fn check(&self, a: &Annotation) -> Result<(), AnnoError> {
        if self.closed {
            return Err(AnnoError::Closed);
        }
        self.annotator_index(&a.annotator)?;
        let p = &self.pairs[self.pair_index(&a.pair_id)?];
        if self.annotation(&a.annotator, &a.pair_id).is_some() {
            return Err(AnnoError::Duplicate {
                annotator: a.annotator.clone(),
                pair_id: a.pair_id.clone(),
            });
        }
        for s in &a.spans {
            let text = match s.summary {
                Choice::A => &p.summary_a.text,
                Choice::B => &p.summary_b.text,
            };
            let len = char_len(text);
            if s.start >= s.end || s.end > len {
                return Err(AnnoError::Validation(format!(
                    "span {}..{} outside summary {:?} of {} chars",
                    s.start, s.end, s.summary, len
                )));
            }
        }
        Ok(())
    }

    pub fn submit(&mut self, a: Annotation) -> Result<(), AnnoError> {
        self.check(&a)?;
        self.annotations.push(a);
        Ok(())
    }

    fn main_pairs(&self) -> impl Iterator<Item = &PairState> {
        self.pairs.iter().filter(|p| !p.calibration)
    }

    fn sheets(&self, q: Question) -> Result<Vec<(String, Answer, Answer)>, AnnoError> {
        self.main_pairs()
            .map(|p| {
                let a = self.annotation(&self.annotators[0], &p.pair_id);
                let b = self.annotation(&self.annotators[1], &p.pair_id);
                match (a, b) {
                    (Some(a), Some(b)) => Ok((p.pair_id.clone(), a.answer(q), b.answer(q))),
                    _ => Err(AnnoError::Incomplete),
                }
            })
            .collect()
    }

    /// Main pairs where the two annotators answered `q` differently.
    pub fn disagreements(&self, q: Question) -> Result<Vec<String>, AnnoError> {
        Ok(self
            .sheets(q)?
            .into_iter()
            .filter(|(_, a, b)| a != b)
            .map(|(id, _, _)| id)
            .collect())
    }

    /// Cohen's kappa over main-pair answers to `q`.
    pub fn agreement(&self, q: Question) -> Result<f64, AnnoError> {
        let sheets = self.sheets(q)?;
        let a: Vec<Answer> = sheets.iter().map(|s| s.1).collect();
        let b: Vec<Answer> = sheets.iter().map(|s| s.2).collect();
        cohens_kappa(&a, &b).map_err(|e| AnnoError::Validation(e.to_string()))
    }

    pub fn adjudicate(&mut self, adj: Adjudication) -> Result<(), AnnoError> {
        if self.closed {
            return Err(AnnoError::Closed);
        }
        if adj.adjudicator != self.adjudicator {
            return Err(AnnoError::NotAdjudicator(adj.adjudicator));
        }
        self.pair_index(&adj.pair_id)?;
        if !self.disagreements(adj.question)?.contains(&adj.pair_id) {
            return Err(AnnoError::NotDisputed(adj.pair_id));
        }
        if self
            .adjudications
            .iter()
            .any(|x| x.pair_id == adj.pair_id && x.question == adj.question)
        {
            return Err(AnnoError::Duplicate {
                annotator: adj.adjudicator,
                pair_id: adj.pair_id,
            });
        }
        self.adjudications.push(adj);
        Ok(())
    }

    pub fn distribution(&self, q: Question, view: DistributionView) -> Result<BTreeMap<Answer, usize>, AnnoError> {
        let mut counts: BTreeMap<Answer, usize> = Answer::ALL.iter().map(|&a| (a, 0)).collect();
        for (id, a, b) in self.sheets(q)? {
            match view {
                DistributionView::Annotators => {
                    *counts.get_mut(&a).unwrap() += 1;
                    *counts.get_mut(&b).unwrap() += 1;
                }
                DistributionView::Adjudicated => {
                    let pick = if a == b {
                        Some(a)
                    } else {
                        self.adjudications
                            .iter()
                            .find(|x| x.pair_id == id && x.question == q)
                            .map(|x| x.answer)
                    };
                    if let Some(v) = pick {
                        *counts.get_mut(&v).unwrap() += 1;
                    }
                }
            }
        }
        Ok(counts)
    }

    pub fn close(&mut self) {
        self.closed = true;
    }

    /// Pair ids with their hidden systems, for analysis after the study.
    pub fn unblinding_key(&self) -> Vec<(String, String, String, String)> {
        self.pairs
            .iter()
            .map(|p| {
                (
                    p.pair_id.clone(),
                    p.source_id.clone(),
                    p.summary_a.backend.clone(),
                    p.summary_b.backend.clone(),
                )
            })
            .collect()
    }

    /// Every backend name in the session; used to check payload blinding.
    pub fn backend_names(&self) -> BTreeSet<String> {
        self.pairs
            .iter()
            .flat_map(|p| [p.summary_a.backend.clone(), p.summary_b.backend.clone()])
            .collect()
    }
}
