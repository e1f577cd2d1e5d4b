//! File formats: line-delimited corpora and records, strata configs, locale
//! tables, rule-pack and template directories.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sumleak_core::corpus::{CorpusError, CorpusSplit, Document, DocumentRecord, SplitName, StrataConfig};
use sumleak_core::detect::RulePack;
use sumleak_core::pipeline::{TemplateId, Templates};
use sumleak_core::profile::{LocaleSet, LocaleTable};
use thiserror::Error;

pub const US_LOCALE: &str = include_str!("../../core/data/locales/us.json");
pub const ASYLUM_LOCALES: &str = include_str!("../../core/data/locales/asylum.json");

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Line { path: PathBuf, line: usize, message: String },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

impl IoError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io { path: path.to_path_buf(), source }
    }

    fn invalid(path: &Path, message: impl ToString) -> Self {
        IoError::Invalid { path: path.to_path_buf(), message: message.to_string() }
    }
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|e| IoError::io(path, e))
}

/// Parses one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    let f = File::open(path).map_err(|e| IoError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| IoError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line).map_err(|e| IoError::Line {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(v);
    }
    Ok(out)
}

fn create(path: &Path) -> Result<BufWriter<File>, IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| IoError::io(path, e))
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), IoError> {
    let mut w = create(path)?;
    for it in items {
        let line = serde_json::to_string(it).map_err(|e| IoError::invalid(path, e))?;
        writeln!(w, "{line}").map_err(|e| IoError::io(path, e))?;
    }
    w.flush().map_err(|e| IoError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(|e| IoError::io(path, e))?;
    w.flush().map_err(|e| IoError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| IoError::invalid(path, e))?;
    write_text(path, &(text + "\n"))
}

/// Appends one line and flushes it to disk before returning.
pub fn append_line_durable(path: &Path, line: &str) -> Result<(), IoError> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| IoError::io(path, e))?;
    f.write_all(line.as_bytes()).map_err(|e| IoError::io(path, e))?;
    f.write_all(b"\n").map_err(|e| IoError::io(path, e))?;
    f.sync_data().map_err(|e| IoError::io(path, e))
}

/// Reads a corpus file. Span and duplicate-id errors carry the line number.
pub fn read_corpus(path: &Path, name: SplitName) -> Result<CorpusSplit, IoError> {
    let f = File::open(path).map_err(|e| IoError::io(path, e))?;
    let mut docs: Vec<Document> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let line_err = |line: usize, message: String| IoError::Line { path: path.to_path_buf(), line, message };
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| IoError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DocumentRecord = serde_json::from_str(&line).map_err(|e| line_err(i + 1, e.to_string()))?;
        if !seen.insert(rec.id.clone()) {
            return Err(line_err(i + 1, format!("duplicate document id `{}`", rec.id)));
        }
        let doc = Document::try_from(rec).map_err(|e: CorpusError| line_err(i + 1, e.to_string()))?;
        docs.push(doc);
    }
    CorpusSplit::new(name, docs).map_err(|e| IoError::invalid(path, e))
}

pub fn write_corpus(path: &Path, split: &CorpusSplit) -> Result<(), IoError> {
    let recs: Vec<DocumentRecord> = split.documents.iter().map(DocumentRecord::from).collect();
    write_jsonl(path, &recs)
}

pub fn load_strata(path: &Path) -> Result<StrataConfig, IoError> {
    let cfg: StrataConfig = toml::from_str(&read_text(path)?).map_err(|e| IoError::invalid(path, e))?;
    cfg.validate().map_err(|e| IoError::invalid(path, e))?;
    Ok(cfg)
}

fn parse_tables(src: &str) -> Result<Vec<LocaleTable>, serde_json::Error> {
    if src.trim_start().starts_with('[') {
        serde_json::from_str(src)
    } else {
        serde_json::from_str::<LocaleTable>(src).map(|t| vec![t])
    }
}

/// The shipped tables: `us` (one English locale) or `asylum` (a weighted
/// mix of applicant-origin locales).
pub fn builtin_locales(name: &str) -> Option<LocaleSet> {
    let src = match name {
        "us" => US_LOCALE,
        "asylum" => ASYLUM_LOCALES,
        _ => return None,
    };
    LocaleSet::new(parse_tables(src).ok()?).ok()
}

/// Loads a JSON file (one table or an array) or every `*.json` file in a
/// directory, in name order.
pub fn load_locales(path: &Path) -> Result<LocaleSet, IoError> {
    let mut tables = Vec::new();
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut v: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| IoError::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        v.sort();
        v
    } else {
        vec![path.to_path_buf()]
    };
    for f in files {
        tables.extend(parse_tables(&read_text(&f)?).map_err(|e| IoError::invalid(&f, e))?);
    }
    LocaleSet::new(tables).map_err(|e| IoError::invalid(path, e))
}

/// Loads `patterns.cfg` and the gazetteers it names from `dir`.
pub fn load_rule_pack(dir: &Path) -> Result<RulePack, IoError> {
    let patterns = read_text(&dir.join("patterns.cfg"))?;
    let read = |name: &str| fs::read_to_string(dir.join(name)).ok();
    RulePack::parse(&patterns, &read).map_err(|e| IoError::invalid(dir, e))
}

/// Builtin templates, overridden by any same-named file in `dir`.
pub fn load_templates(dir: Option<&Path>) -> Result<Templates, IoError> {
    let mut t = Templates::default();
    if let Some(dir) = dir {
        for id in TemplateId::ALL {
            let p = dir.join(id.file_name());
            if p.exists() {
                t.set(id, &read_text(&p)?);
            }
        }
    }
    Ok(t)
}
