use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, CorpusSplit, Document};

/// One histogram bin. `upper` is an inclusive bound; `None` marks the final,
/// unbounded bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<usize>,
    pub label: String,
}

impl Bin {
    pub fn upto(upper: usize, label: &str) -> Self {
        Bin {
            upper: Some(upper),
            label: String::from(label),
        }
    }

    pub fn rest(label: &str) -> Self {
        Bin {
            upper: None,
            label: String::from(label),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrataConfig {
    pub length_bins: Vec<Bin>,
    pub pii_bins: Vec<Bin>,
    pub sample_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

impl StrataConfig {
    /// Discharge-summary bins: documents up to 1,000 / 3,000 words and PII
    /// counts up to 30 / 100.
    pub fn medical(sample_fraction: f64, seed: u64) -> Self {
        StrataConfig {
            length_bins: Vec::from([
                Bin::upto(1000, "short"),
                Bin::upto(3000, "medium"),
                Bin::rest("long"),
            ]),
            pii_bins: Vec::from([
                Bin::upto(30, "low"),
                Bin::upto(100, "medium"),
                Bin::rest("high"),
            ]),
            sample_fraction,
            seed,
        }
    }

    /// Court-case bins: documents up to 1,500 / 5,000 words and PII counts up
    /// to 10 / 30.
    pub fn legal(sample_fraction: f64, seed: u64) -> Self {
        StrataConfig {
            length_bins: Vec::from([
                Bin::upto(1500, "short"),
                Bin::upto(5000, "medium"),
                Bin::rest("long"),
            ]),
            pii_bins: Vec::from([
                Bin::upto(10, "low"),
                Bin::upto(30, "medium"),
                Bin::rest("high"),
            ]),
            sample_fraction,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return Err(CorpusError::InvalidStrata(format!(
                "sample_fraction {} outside (0, 1]",
                self.sample_fraction
            )));
        }
        for (name, bins) in [("length_bins", &self.length_bins), ("pii_bins", &self.pii_bins)] {
            let Some((last, init)) = bins.split_last() else {
                return Err(CorpusError::InvalidStrata(format!("{name} is empty")));
            };
            if last.upper.is_some() {
                return Err(CorpusError::InvalidStrata(format!(
                    "{name}: final bin must be unbounded"
                )));
            }
            let mut prev: Option<usize> = None;
            for b in init {
                let Some(u) = b.upper else {
                    return Err(CorpusError::InvalidStrata(format!(
                        "{name}: only the final bin may be unbounded"
                    )));
                };
                if prev.is_some_and(|p| u <= p) {
                    return Err(CorpusError::InvalidStrata(format!(
                        "{name}: upper bounds must strictly increase"
                    )));
                }
                prev = Some(u);
            }
        }
        Ok(())
    }

    fn bin_of(bins: &[Bin], value: usize) -> usize {
        bins.iter()
            .position(|b| b.upper.is_none_or(|u| value <= u))
            .unwrap_or(bins.len() - 1)
    }

    pub fn key_of(&self, doc: &Document) -> StratumKey {
        self.key_for(doc.word_count, doc.pii_spans.len())
    }

    pub fn key_for(&self, words: usize, spans: usize) -> StratumKey {
        StratumKey {
            length: Self::bin_of(&self.length_bins, words),
            pii: Self::bin_of(&self.pii_bins, spans),
        }
    }
}

/// Joint (length bin, PII bin) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StratumKey {
    pub length: usize,
    pub pii: usize,
}

/// Documents kept from a stratum of `size`: nearest integer to
/// `fraction * size`, at least one for a non-empty stratum.
pub fn stratum_target(size: usize, fraction: f64) -> usize {
    if size == 0 {
        return 0;
    }
    let t = libm::floor(fraction * size as f64 + 0.5) as usize;
    t.clamp(1, size)
}

fn stratum_seed(seed: u64, key: StratumKey) -> u64 {
    let tag = ((key.length as u64) << 32) | key.pii as u64;
    seed ^ tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Indices (ascending) of the items sampled from each joint stratum.
pub fn stratified_indices(keys: &[StratumKey], cfg: &StrataConfig) -> Vec<usize> {
    let mut strata: BTreeMap<StratumKey, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        strata.entry(*k).or_default().push(i);
    }
    let mut picked = Vec::new();
    for (key, mut members) in strata {
        let take = stratum_target(members.len(), cfg.sample_fraction);
        let mut rng = ChaCha8Rng::seed_from_u64(stratum_seed(cfg.seed, key));
        // Partial Fisher-Yates: the first `take` slots end up uniformly drawn.
        for i in 0..take {
            let j = rng.gen_range(i..members.len());
            members.swap(i, j);
        }
        picked.extend_from_slice(&members[..take]);
    }
    picked.sort_unstable();
    picked
}

/// Samples each joint stratum at `cfg.sample_fraction`, keeping file order.
pub fn stratify(split: CorpusSplit, cfg: &StrataConfig) -> Result<CorpusSplit, CorpusError> {
    cfg.validate()?;
    if split.is_empty() {
        return Err(CorpusError::EmptySplit);
    }
    let keys: Vec<StratumKey> = split.documents.iter().map(|d| cfg.key_of(d)).collect();
    let keep = stratified_indices(&keys, cfg);
    let mut next = keep.iter().peekable();
    let documents = split
        .documents
        .into_iter()
        .enumerate()
        .filter_map(|(i, d)| {
            if next.peek() == Some(&&i) {
                next.next();
                Some(d)
            } else {
                None
            }
        })
        .collect();
    Ok(CorpusSplit {
        name: split.name,
        documents,
    })
}

/// Per-stratum sizes before and after sampling, for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumCount {
    pub length_label: String,
    pub pii_label: String,
    pub size: usize,
    pub sampled: usize,
}

pub fn stratum_counts(
    original: &CorpusSplit,
    sampled: &CorpusSplit,
    cfg: &StrataConfig,
) -> Vec<StratumCount> {
    let mut cells: BTreeMap<StratumKey, (usize, usize)> = BTreeMap::new();
    for d in &original.documents {
        cells.entry(cfg.key_of(d)).or_default().0 += 1;
    }
    for d in &sampled.documents {
        cells.entry(cfg.key_of(d)).or_default().1 += 1;
    }
    cells
        .into_iter()
        .map(|(k, (size, sampled))| StratumCount {
            length_label: cfg.length_bins[k.length].label.clone(),
            pii_label: cfg.pii_bins[k.pii].label.clone(),
            size,
            sampled,
        })
        .collect()
}
