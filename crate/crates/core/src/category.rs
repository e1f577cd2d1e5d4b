use core::fmt;
use core::str::FromStr;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use alloc::string::String;

/// The PII categories tracked by detection and leakage metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PiiCategory {
    Person,
    Gender,
    Race,
    DateTime,
    Location,
    Age,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown PII label `{0}`")]
pub struct UnknownLabel(pub String);

impl PiiCategory {
    /// Report column order.
    pub const ALL: [PiiCategory; 6] = [
        PiiCategory::DateTime,
        PiiCategory::Gender,
        PiiCategory::Location,
        PiiCategory::Person,
        PiiCategory::Race,
        PiiCategory::Age,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PiiCategory::Person => "PERSON",
            PiiCategory::Gender => "GENDER",
            PiiCategory::Race => "RACE",
            PiiCategory::DateTime => "DATE_TIME",
            PiiCategory::Location => "LOCATION",
            PiiCategory::Age => "AGE",
        }
    }

    /// Overlap tie-break rank; lower wins.
    pub fn priority(self) -> u8 {
        match self {
            PiiCategory::Person => 0,
            PiiCategory::DateTime => 1,
            PiiCategory::Age => 2,
            PiiCategory::Location => 3,
            PiiCategory::Race => 4,
            PiiCategory::Gender => 5,
        }
    }

    /// AGE reported as DATE_TIME when folding is enabled.
    pub fn folded(self, fold_age: bool) -> Self {
        if fold_age && self == PiiCategory::Age {
            PiiCategory::DateTime
        } else {
            self
        }
    }
}

impl fmt::Display for PiiCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PiiCategory {
    type Err = UnknownLabel;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        map_category(s)
    }
}

/// Maps an entity-recognizer class label onto a category.
///
/// `NRP` (nationality, religious or political group) is the recognizer's
/// class for race. Labels are matched exactly.
pub fn map_category(raw_label: &str) -> Result<PiiCategory, UnknownLabel> {
    Ok(match raw_label {
        "DATE_TIME" => PiiCategory::DateTime,
        "GENDER" => PiiCategory::Gender,
        "PERSON" => PiiCategory::Person,
        "NRP" => PiiCategory::Race,
        "RACE" => PiiCategory::Race,
        "LOCATION" => PiiCategory::Location,
        "AGE" => PiiCategory::Age,
        other => return Err(UnknownLabel(String::from(other))),
    })
}
