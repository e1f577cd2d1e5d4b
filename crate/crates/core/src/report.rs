//! Aggregation of leakage and quality metrics into evaluation tables.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;
use serde::{Deserialize, Serialize};

use crate::category::PiiCategory;
use crate::metrics::{
    ldr, leak_account, ptr, rouge, tpr_by_category, Averaging, LeakAccount, RougeVariant, TprMode,
};
use crate::pseudo::{bleu, DEFAULT_MAX_N};
use crate::span::PiiSpan;

/// One summarized document ready for scoring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalItem {
    pub doc_id: String,
    pub spans: Vec<PiiSpan>,
    pub summary: String,
    pub reference: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub backend: String,
    pub method: String,
    pub documents: usize,
    pub ptr: Option<f64>,
    pub ldr: Option<f64>,
    pub tpr: BTreeMap<PiiCategory, Option<f64>>,
    pub rouge1: Option<f64>,
    pub rouge2: Option<f64>,
    pub rouge_l: Option<f64>,
    pub bleu: Option<f64>,
    /// Per-category PTR over documents holding tokens of that category.
    pub ptr_by_category: BTreeMap<PiiCategory, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRecord {
    pub backend: String,
    pub method: String,
    pub category: PiiCategory,
    pub ptr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub config_hash: String,
    pub seed: u64,
    pub tpr_mode: TprMode,
    pub averaging: Averaging,
    pub active_categories: Vec<PiiCategory>,
    pub rows: Vec<ReportRow>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Active categories in report column order.
pub fn ordered(active: &BTreeSet<PiiCategory>) -> Vec<PiiCategory> {
    PiiCategory::ALL.iter().copied().filter(|c| active.contains(c)).collect()
}

/// Per-category PTR: mean over documents with tokens of the category of
/// leaked/total tokens of that category.
pub fn category_ptr(accounts: &[LeakAccount], category: PiiCategory) -> Option<f64> {
    let rates: Vec<f64> = accounts
        .iter()
        .filter_map(|a| a.tokens_by_category.get(&category))
        .filter(|t| t.total > 0)
        .map(|t| t.leaked as f64 / t.total as f64)
        .collect();
    mean(&rates)
}

/// Scores one (backend, method) group. Spans outside `active` are ignored.
pub fn evaluate_group(
    backend: &str,
    method: &str,
    items: &[EvalItem],
    active: &BTreeSet<PiiCategory>,
    mode: TprMode,
    averaging: Averaging,
) -> ReportRow {
    let kept: Vec<Vec<PiiSpan>> = items
        .iter()
        .map(|i| i.spans.iter().filter(|s| active.contains(&s.category)).cloned().collect())
        .collect();
    let accounts: Vec<LeakAccount> = items
        .iter()
        .zip(&kept)
        .map(|(i, s)| leak_account(&i.doc_id, s, &i.summary))
        .collect();
    let docs: Vec<(&[PiiSpan], &str)> = kept
        .iter()
        .zip(items)
        .map(|(s, i)| (s.as_slice(), i.summary.as_str()))
        .collect();
    let found = tpr_by_category(&docs, active, mode, averaging);
    let order = ordered(active);
    let mut r1 = Vec::new();
    let mut r2 = Vec::new();
    let mut rl = Vec::new();
    let mut bl = Vec::new();
    for i in items {
        let Some(reference) = i.reference.as_deref() else { continue };
        for (v, out) in [(RougeVariant::R1, &mut r1), (RougeVariant::R2, &mut r2), (RougeVariant::RL, &mut rl)] {
            if let Ok(s) = rouge(&i.summary, reference, v) {
                out.push(s.f1);
            }
        }
        if let Ok(b) = bleu(&i.summary, reference, DEFAULT_MAX_N) {
            bl.push(b);
        }
    }
    ReportRow {
        backend: backend.to_string(),
        method: method.to_string(),
        documents: items.len(),
        ptr: ptr(&accounts).ok(),
        ldr: ldr(&accounts).ok(),
        tpr: order.iter().map(|c| (*c, found.get(c).copied())).collect(),
        rouge1: mean(&r1),
        rouge2: mean(&r2),
        rouge_l: mean(&rl),
        bleu: mean(&bl),
        ptr_by_category: order.iter().map(|&c| (c, category_ptr(&accounts, c))).collect(),
    }
}

impl EvaluationReport {
    /// Column names in fixed order.
    pub fn columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = ["backend", "method", "PTR", "LDR"].iter().map(|s| s.to_string()).collect();
        cols.extend(self.active_categories.iter().map(|c| format!("TPR_{}", c.as_str())));
        cols.extend(["ROUGE-1", "ROUGE-2", "ROUGE-L"].iter().map(|s| s.to_string()));
        cols
    }

    fn cells(&self, row: &ReportRow) -> Vec<String> {
        let mut out = alloc::vec![row.backend.clone(), row.method.clone(), fmt_opt(row.ptr), fmt_opt(row.ldr)];
        for c in &self.active_categories {
            out.push(fmt_opt(row.tpr.get(c).copied().flatten()));
        }
        out.push(fmt_opt(row.rouge1));
        out.push(fmt_opt(row.rouge2));
        out.push(fmt_opt(row.rouge_l));
        out
    }

    fn preamble(&self) -> String {
        format!("config_hash={} seed={}", self.config_hash, self.seed)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {}", self.preamble());
        let _ = writeln!(s, "{}", self.columns().join("\t"));
        for r in &self.rows {
            let _ = writeln!(s, "{}", self.cells(r).join("\t"));
        }
        s
    }

    pub fn to_markdown(&self) -> String {
        let cols = self.columns();
        let mut s = String::new();
        let _ = writeln!(s, "<!-- {} -->\n", self.preamble());
        let _ = writeln!(s, "| {} |", cols.join(" | "));
        let _ = writeln!(s, "|{}", "---|".repeat(cols.len()));
        for r in &self.rows {
            let _ = writeln!(s, "| {} |", self.cells(r).join(" | "));
        }
        s
    }

    /// Category x method PTR matrix as plot-ready records.
    pub fn breakdown(&self) -> Vec<BreakdownRecord> {
        let mut out = Vec::new();
        for r in &self.rows {
            for c in &self.active_categories {
                out.push(BreakdownRecord {
                    backend: r.backend.clone(),
                    method: r.method.clone(),
                    category: *c,
                    ptr: r.ptr_by_category.get(c).copied().flatten().unwrap_or(0.0),
                });
            }
        }
        out
    }

    pub fn breakdown_tsv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {}", self.preamble());
        let _ = writeln!(s, "backend\tmethod\tcategory\tPTR");
        for b in self.breakdown() {
            let _ = writeln!(s, "{}\t{}\t{}\t{:.6}", b.backend, b.method, b.category.as_str(), b.ptr);
        }
        s
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.4}"),
        None => "NA".to_string(),
    }
}
