use alloc::string::{String, ToString};
use alloc::vec::Vec;
use thiserror::Error;

use crate::profile::ProfileAttribute;
use crate::text::metric_tokens;

pub const DEFAULT_SLOTS: &str = include_str!("../../data/slots.cfg");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotSide {
    Before,
    After,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotRule {
    pub side: SlotSide,
    pub phrase: Vec<String>,
    pub attribute: ProfileAttribute,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("slot table line {line}: {message}")]
pub struct SlotTableError {
    pub line: usize,
    pub message: String,
}

/// Ordered keyword rules. The first rule that matches a placeholder's
/// surroundings picks the attribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotTable {
    rules: Vec<SlotRule>,
}

impl SlotTable {
    pub fn parse(src: &str) -> Result<Self, SlotTableError> {
        let mut rules = Vec::new();
        for (i, raw) in src.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: &str| SlotTableError {
                line: i + 1,
                message: message.to_string(),
            };
            let (lhs, rhs) = line.split_once("=>").ok_or_else(|| err("missing `=>`"))?;
            let lhs = lhs.trim();
            let (side, phrase) = if let Some(p) = lhs.strip_prefix("before ") {
                (SlotSide::Before, p)
            } else if let Some(p) = lhs.strip_prefix("after ") {
                (SlotSide::After, p)
            } else {
                return Err(err("rule must start with `before` or `after`"));
            };
            let phrase = metric_tokens(phrase);
            if phrase.is_empty() {
                return Err(err("empty keyword"));
            }
            let attribute =
                ProfileAttribute::parse(rhs.trim()).ok_or_else(|| err("unknown profile attribute"))?;
            rules.push(SlotRule {
                side,
                phrase,
                attribute,
            });
        }
        Ok(SlotTable { rules })
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_SLOTS).expect("shipped slot table parses")
    }

    pub fn rules(&self) -> &[SlotRule] {
        &self.rules
    }

    /// `before` and `after` are the texts between this placeholder and its
    /// neighbours.
    pub fn infer(&self, before: &str, after: &str) -> Option<ProfileAttribute> {
        let b = metric_tokens(before);
        let a = metric_tokens(after);
        self.rules.iter().find_map(|r| {
            let hit = match r.side {
                SlotSide::Before => b.ends_with(&r.phrase),
                SlotSide::After => a.starts_with(&r.phrase),
            };
            hit.then_some(r.attribute)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_table_loads() {
        let t = SlotTable::builtin();
        assert!(t.rules().len() > 20);
    }

    #[test]
    fn infers_common_slots() {
        let t = SlotTable::builtin();
        assert_eq!(t.infer("Mr. ", " is a "), Some(ProfileAttribute::Surname));
        assert_eq!(t.infer(" is a ", " yr old"), Some(ProfileAttribute::Age));
        assert_eq!(t.infer("Admission Date: ", "\n"), Some(ProfileAttribute::BirthDate));
        assert_eq!(t.infer("Sex: ", ""), Some(ProfileAttribute::Gender));
        assert_eq!(t.infer("Name: ", ""), Some(ProfileAttribute::FullName));
        assert_eq!(t.infer("He was born in ", "."), Some(ProfileAttribute::BirthLocation));
        assert_eq!(t.infer("with ", " and"), None);
    }

    #[test]
    fn rejects_bad_lines() {
        assert_eq!(SlotTable::parse("before x => nope").unwrap_err().line, 1);
        assert!(SlotTable::parse("\nsomewhere x => age").is_err());
        assert!(SlotTable::parse("before x age").is_err());
    }
}
