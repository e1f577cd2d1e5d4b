use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::template::{render, RenderError, Slot};
use crate::corpus::CorpusSplit;

/// Fine-tuning settings carried along with each record for downstream
/// trainers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IftMeta {
    pub lora_rank: u32,
    pub lora_alpha: u32,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: u32,
    pub batch: u32,
    pub max_seq_len: u32,
}

impl Default for IftMeta {
    fn default() -> Self {
        IftMeta {
            lora_rank: 16,
            lora_alpha: 16,
            lr: 5e-4,
            weight_decay: 0.01,
            epochs: 1,
            batch: 1,
            max_seq_len: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IftRecord {
    pub id: String,
    pub instruction: String,
    pub input: String,
    pub output: String,
    pub meta: IftMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IftExport {
    pub records: Vec<IftRecord>,
    /// Ids of documents skipped for lack of a reference summary.
    pub skipped: Vec<String>,
}

/// One record per document with a reference summary. The instruction is the
/// template with the document and example slots left empty.
pub fn export_ift(split: &CorpusSplit, template: &str, meta: IftMeta) -> Result<IftExport, RenderError> {
    let mut bindings = BTreeMap::new();
    bindings.insert(Slot::Document, String::new());
    bindings.insert(Slot::IclSamples, String::new());
    let rendered = render(template, &bindings)?;
    let instruction: Vec<&str> = rendered.lines().map(str::trim_end).collect();
    let instruction = instruction.join("\n");

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for doc in &split.documents {
        match doc.reference_summary.as_deref() {
            Some(summary) if !summary.trim().is_empty() => records.push(IftRecord {
                id: doc.id.clone(),
                instruction: instruction.clone(),
                input: doc.body.clone(),
                output: String::from(summary),
                meta,
            }),
            _ => skipped.push(doc.id.clone()),
        }
    }
    Ok(IftExport { records, skipped })
}
