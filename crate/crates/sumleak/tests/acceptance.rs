//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::collections::{BTreeMap, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use sumleak::config::RunConfig;
use sumleak::core::anno::Answer;
use sumleak::core::corpus::{
    stratified_indices, stratify, CorpusSplit, Document, SourceTask, SplitName, StrataConfig, StratumKey,
};
use sumleak::core::detect::{detect_rules, RulePack};
use sumleak::core::gateway::{register_mock, ChatBackend, MockKind, MockParams, RoleRouter, StepRole};
use sumleak::core::metrics::{cohens_kappa, ldr, leak_account, ptr, rouge, tpr, Averaging, RougeVariant, TprMode};
use sumleak::core::pipeline::{export_ift, IftMeta, IftRecord, MethodSpec, PromptMethod, RunOptions, TemplateId};
use sumleak::core::profile::ProfileConfig;
use sumleak::core::pseudo::{bleu, SlotTable, DEFAULT_THRESHOLD};
use sumleak::core::text::{contains_placeholder, placeholder_runs};
use sumleak::core::{PiiCategory, PiiSpan};
use sumleak::forge::{pseudonymize_split, Injector};
use sumleak::io::{builtin_locales, read_jsonl, write_jsonl};
use sumleak::run::{build_report, summarize_split};
use sumleak::server::spawn;
use sumleak::store::AnnoStore;

type Check = Result<String, String>;
type Criterion = (&'static str, u64, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- oracles

const VOCAB: &[&str] = &["alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel"];

fn words(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> Vec<String> {
    let n = rng.gen_range(lo..=hi);
    (0..n).map(|_| VOCAB[rng.gen_range(0..VOCAB.len())].to_string()).collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

fn ngram_list(t: &[String], n: usize) -> Vec<Vec<String>> {
    if t.len() < n {
        return Vec::new();
    }
    (0..=t.len() - n).map(|i| t[i..i + n].to_vec()).collect()
}

/// Clipped overlap by repeated linear search with used flags.
fn clipped(c: &[Vec<String>], r: &[Vec<String>]) -> usize {
    let mut used = vec![false; r.len()];
    let mut hits = 0;
    for g in c {
        if let Some(j) = (0..r.len()).find(|&j| !used[j] && &r[j] == g) {
            used[j] = true;
            hits += 1;
        }
    }
    hits
}

fn oracle_f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn oracle_rouge_n(c: &[String], r: &[String], n: usize) -> f64 {
    let cg = ngram_list(c, n);
    let rg = ngram_list(r, n);
    if cg.is_empty() && rg.is_empty() {
        return if c == r { 1.0 } else { 0.0 };
    }
    let h = clipped(&cg, &rg) as f64;
    let p = if cg.is_empty() { 0.0 } else { h / cg.len() as f64 };
    let rc = if rg.is_empty() { 0.0 } else { h / rg.len() as f64 };
    oracle_f1(p, rc)
}

/// Longest common subsequence by enumerating every subsequence of `a`.
fn lcs_brute(a: &[String], b: &[String]) -> usize {
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let sub: Vec<&String> = (0..a.len()).filter(|i| mask & (1 << i) != 0).map(|i| &a[i]).collect();
        if sub.len() <= best {
            continue;
        }
        let mut it = b.iter();
        if sub.iter().all(|w| it.any(|x| x == *w)) {
            best = sub.len();
        }
    }
    best
}

fn oracle_rouge_l(c: &[String], r: &[String]) -> f64 {
    let l = lcs_brute(c, r) as f64;
    let p = if c.is_empty() { 0.0 } else { l / c.len() as f64 };
    oracle_f1(p, l / r.len() as f64)
}

fn oracle_bleu(c: &[String], r: &[String]) -> f64 {
    if c.is_empty() {
        return 0.0;
    }
    let mut logs = 0.0;
    for n in 1..=4 {
        let cg = ngram_list(c, n);
        let rg = ngram_list(r, n);
        let m = clipped(&cg, &rg) as f64;
        let t = cg.len() as f64;
        let p = if n == 1 {
            if m == 0.0 {
                return 0.0;
            }
            m / t
        } else {
            (m + 1.0) / (t + 1.0)
        };
        logs += p.ln();
    }
    let bp = if c.len() > r.len() { 1.0 } else { (1.0 - r.len() as f64 / c.len() as f64).exp() };
    (bp * (logs / 4.0).exp()).clamp(0.0, 1.0)
}

fn oracle_kappa(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let po = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
    let mut pe = 0.0;
    for k in 0..4 {
        let ca = a.iter().filter(|&&x| x == k).count() as f64;
        let cb = b.iter().filter(|&&x| x == k).count() as f64;
        pe += ca * cb / (n * n);
    }
    if (1.0 - pe).abs() < 1e-15 {
        1.0
    } else {
        (po - pe) / (1.0 - pe)
    }
}

struct LeakCase {
    spans: Vec<PiiSpan>,
    summary: String,
    span_words: Vec<(PiiCategory, Vec<String>)>,
    summary_words: Vec<String>,
}

const LEAK_CATS: [PiiCategory; 4] = [PiiCategory::Person, PiiCategory::Location, PiiCategory::Race, PiiCategory::Gender];

fn leak_case(rng: &mut ChaCha8Rng) -> LeakCase {
    let mut body = String::new();
    let mut spans = Vec::new();
    let mut span_words = Vec::new();
    for _ in 0..rng.gen_range(0..=4) {
        let w = words(rng, 1, 3);
        let cat = LEAK_CATS[rng.gen_range(0..LEAK_CATS.len())];
        if !body.is_empty() {
            body.push_str(" filler ");
        }
        let start = body.chars().count();
        let text = w.join(" ");
        body.push_str(&text);
        spans.push(PiiSpan::new(start, start + text.chars().count(), cat, text));
        span_words.push((cat, w));
    }
    let summary_words = words(rng, 0, 10);
    LeakCase { spans, summary: summary_words.join(" "), span_words, summary_words }
}

/// Leaked tokens by nested loops: each source token claims the first unused
/// equal summary token.
fn oracle_leaked(case: &LeakCase) -> (usize, usize) {
    let mut used = vec![false; case.summary_words.len()];
    let (mut total, mut leaked) = (0, 0);
    for (_, ws) in &case.span_words {
        for w in ws {
            total += 1;
            for (j, slot) in used.iter_mut().enumerate() {
                if !*slot && &case.summary_words[j] == w {
                    *slot = true;
                    leaked += 1;
                    break;
                }
            }
        }
    }
    (leaked, total)
}

fn oracle_tpr(cases: &[LeakCase], cat: PiiCategory) -> Option<f64> {
    let mut rates = Vec::new();
    for c in cases {
        let of: Vec<&Vec<String>> = c.span_words.iter().filter(|(k, _)| *k == cat).map(|(_, w)| w).collect();
        if of.is_empty() {
            continue;
        }
        let hits = of.iter().filter(|ws| ws.iter().all(|w| c.summary_words.contains(w))).count();
        rates.push(hits as f64 / of.len() as f64);
    }
    (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64)
}

fn metric_oracles() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let instances = 250;
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for i in 0..instances {
        let c = words(&mut rng, 0, 9);
        let r = words(&mut rng, 1, 9);
        let (cs, rs) = (c.join(" "), r.join(" "));
        for (name, v, n) in [("ROUGE-1", RougeVariant::R1, 1), ("ROUGE-2", RougeVariant::R2, 2)] {
            let got = rouge(&cs, &rs, v).map_err(|e| e.to_string())?.f1;
            let want = oracle_rouge_n(&c, &r, n);
            ensure(close(got, want), || format!("{name} instance {i}: {got} vs {want}"))?;
            *counts.entry(name).or_default() += 1;
        }
        let got = rouge(&cs, &rs, RougeVariant::RL).map_err(|e| e.to_string())?.f1;
        let want = oracle_rouge_l(&c, &r);
        ensure(close(got, want), || format!("ROUGE-L instance {i}: {got} vs {want}"))?;
        *counts.entry("ROUGE-L").or_default() += 1;
        let got = bleu(&cs, &rs, 4).map_err(|e| e.to_string())?;
        let want = oracle_bleu(&c, &r);
        ensure(close(got, want), || format!("BLEU instance {i}: {got} vs {want}"))?;
        *counts.entry("BLEU").or_default() += 1;

        let n = rng.gen_range(1..=30);
        let a: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
        let b: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
        let got = cohens_kappa(&a, &b).map_err(|e| e.to_string())?;
        ensure(close(got, oracle_kappa(&a, &b)), || format!("kappa instance {i}"))?;
        *counts.entry("kappa").or_default() += 1;

        let cases: Vec<LeakCase> = (0..rng.gen_range(1..=5)).map(|_| leak_case(&mut rng)).collect();
        let accounts: Vec<_> = cases.iter().map(|c| leak_account("d", &c.spans, &c.summary)).collect();
        let per: Vec<(usize, usize)> = cases.iter().map(oracle_leaked).collect();
        let with_tokens: Vec<f64> = per.iter().filter(|p| p.1 > 0).map(|&(l, t)| l as f64 / t as f64).collect();
        match ptr(&accounts) {
            Ok(got) => {
                let want = with_tokens.iter().sum::<f64>() / with_tokens.len() as f64;
                ensure(close(got, want), || format!("PTR instance {i}: {got} vs {want}"))?;
            }
            Err(_) => ensure(with_tokens.is_empty(), || format!("PTR instance {i} undefined"))?,
        }
        *counts.entry("PTR").or_default() += 1;
        let got = ldr(&accounts).map_err(|e| e.to_string())?;
        let want = per.iter().filter(|p| p.0 > 0).count() as f64 / per.len() as f64;
        ensure(close(got, want), || format!("LDR instance {i}: {got} vs {want}"))?;
        *counts.entry("LDR").or_default() += 1;
        let docs: Vec<(&[PiiSpan], &str)> = cases.iter().map(|c| (c.spans.as_slice(), c.summary.as_str())).collect();
        for cat in LEAK_CATS {
            let got = tpr(&docs, cat, TprMode::Span, Averaging::PerDocument).ok();
            let want = oracle_tpr(&cases, cat);
            ensure(
                match (got, want) {
                    (Some(g), Some(w)) => close(g, w),
                    (None, None) => true,
                    _ => false,
                },
                || format!("TPR {cat:?} instance {i}: {got:?} vs {want:?}"),
            )?;
        }
        *counts.entry("TPR").or_default() += 1;
    }
    ensure(counts.values().all(|&c| c >= 200), || format!("too few instances: {counts:?}"))?;
    Ok(format!("{instances} instances each for {}", counts.keys().cloned().collect::<Vec<_>>().join("/")))
}

// ------------------------------------------------------- pseudonymization

/// Short, placeholder-heavy notes so some documents fall under the gate.
fn dense_doc(i: usize) -> Document {
    let bodies = [
        "Name: ___ Date of Birth: ___ Sex: ___",
        "Mr. ___ from ___ on ___.",
        "Admission Date: ___ Discharge Date: ___",
        "Race: ___ Ethnicity: ___ Age: ___",
    ];
    Document::new(format!("dense-{i:03}"), bodies[i % bodies.len()], SourceTask::Medical)
}

fn gate_corpus() -> CorpusSplit {
    let (mut split, _) = common::redacted_corpus(80, 31);
    split.documents.extend((0..20).map(dense_doc));
    split
}

fn pseudonymization_gate() -> Check {
    let split = gate_corpus();
    let set = builtin_locales("us").unwrap();
    let table = SlotTable::builtin();
    let out = pseudonymize_split(&split, &set, &ProfileConfig::default(), &Injector::Template(&table), 11, DEFAULT_THRESHOLD);
    ensure(out.errors.is_empty(), || format!("errors: {:?}", out.errors))?;
    ensure(out.log.len() == 100, || format!("{} logged documents", out.log.len()))?;
    let (mut accepted, mut rejected) = (0, 0);
    for (pd, orig) in out.log.iter().zip(&split.documents) {
        ensure(!contains_placeholder(&pd.body), || format!("{} keeps a placeholder", pd.original_id))?;
        let holes = placeholder_runs(&orig.body).len();
        ensure(pd.injections.len() == holes, || format!("{}: {} of {holes} slots logged", pd.original_id, pd.injections.len()))?;
        for inj in &pd.injections {
            let slice: String = pd.body.chars().skip(inj.span.start).take(inj.span.end - inj.span.start).collect();
            ensure(slice == inj.span.text, || format!("{}: span text mismatch", pd.original_id))?;
            ensure(inj.span.category == inj.attribute.category(), || "span category differs from attribute".into())?;
        }
        let tok = |s: &str| -> Vec<String> {
            s.to_lowercase()
                .replace(['\'', '\u{2019}'], "")
                .split(|c: char| !c.is_alphanumeric())
                .filter(|t| !t.is_empty())
                .map(String::from)
                .collect()
        };
        let score = oracle_bleu(&tok(&pd.body), &tok(&orig.body));
        ensure(close(score, pd.bleu_vs_original), || format!("{}: BLEU {} vs oracle {score}", pd.original_id, pd.bleu_vs_original))?;
        ensure(pd.accepted == (score >= 0.20), || format!("{}: gate decision differs from oracle", pd.original_id))?;
        if pd.accepted {
            accepted += 1;
        } else {
            rejected += 1;
        }
    }
    ensure(sumleak::core::pseudo::accept(0.20, 0.20), || "threshold is not inclusive".into())?;
    ensure(out.corpus.len() == accepted, || "accepted corpus size differs from log".into())?;
    Ok(format!("100 docs, {accepted} accepted, {rejected} rejected, decisions match the oracle"))
}

// ---------------------------------------------------------------- recall

fn detector_recall() -> Check {
    let pack = RulePack::builtin();
    let table = SlotTable::builtin();
    let mut hits: BTreeMap<PiiCategory, (usize, usize)> = BTreeMap::new();
    let mut precision: BTreeMap<PiiCategory, (usize, usize)> = BTreeMap::new();
    for (locale, seed) in [("us", 3u64), ("asylum", 4)] {
        let (split, markers) = common::redacted_corpus(150, seed);
        let set = builtin_locales(locale).unwrap();
        let out = pseudonymize_split(&split, &set, &ProfileConfig::default(), &Injector::Template(&table), seed, 0.0);
        let by_id: HashMap<&str, &Vec<&str>> = split.documents.iter().map(|d| d.id.as_str()).zip(markers.iter()).collect();
        for d in &out.corpus.documents {
            let mut truth = d.pii_spans.clone();
            truth.extend(common::gender_spans(&d.body, by_id[d.id.as_str()]));
            let found = detect_rules(&d.body, &pack);
            for f in &found {
                let e = precision.entry(f.category).or_default();
                e.1 += 1;
                if truth.iter().any(|t| f.category == t.category && f.start < t.end && t.start < f.end) {
                    e.0 += 1;
                }
            }
            for t in truth {
                let e = hits.entry(t.category).or_default();
                e.1 += 1;
                if found.iter().any(|f| f.category == t.category && f.start < t.end && t.start < f.end) {
                    e.0 += 1;
                }
            }
        }
    }
    let mut parts = Vec::new();
    let mut ok = hits.len() == 6;
    for (c, (h, n)) in &hits {
        let r = *h as f64 / *n as f64;
        ok &= r >= 0.95;
        parts.push(format!("{}={:.3}", c.as_str(), r));
    }
    let (tp, all) = precision.values().fold((0, 0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let prec = tp as f64 / all as f64;
    ok &= prec >= 0.80;
    parts.push(format!("precision={prec:.3}"));
    let msg = parts.join(" ");
    if ok {
        Ok(msg)
    } else {
        Err(format!("recall below 0.95, precision below 0.80 or category missing: {msg}"))
    }
}

// --------------------------------------------------------- stratification

fn synthetic_split(n: usize, seed: u64) -> CorpusSplit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let docs = (0..n)
        .map(|i| {
            let words = [rng.gen_range(50..1000), rng.gen_range(1001..3000), rng.gen_range(3001..4000)][rng.gen_range(0..3)];
            let spans = [rng.gen_range(0..=30), rng.gen_range(31..=100), rng.gen_range(101..=140)][rng.gen_range(0..3)];
            let spans = spans.min(words);
            let body = "w ".repeat(words);
            let ss = (0..spans).map(|k| PiiSpan::new(2 * k, 2 * k + 1, PiiCategory::Person, "w")).collect();
            Document::new(format!("s{i}"), body.trim_end(), SourceTask::Medical).with_spans(ss).unwrap()
        })
        .collect();
    CorpusSplit::new(SplitName::Test, docs).unwrap()
}

fn stratification() -> Check {
    let cfg = StrataConfig::medical(0.05, 9);
    let split = synthetic_split(3000, 5);
    let sampled = stratify(split.clone(), &cfg).map_err(|e| e.to_string())?;
    let mut size: BTreeMap<StratumKey, usize> = BTreeMap::new();
    let mut got: BTreeMap<StratumKey, usize> = BTreeMap::new();
    for d in &split.documents {
        *size.entry(cfg.key_of(d)).or_default() += 1;
    }
    for d in &sampled.documents {
        *got.entry(cfg.key_of(d)).or_default() += 1;
    }
    ensure(size.len() == 9, || format!("only {} strata populated", size.len()))?;
    for (k, &n) in &size {
        let g = got.get(k).copied().unwrap_or(0) as f64;
        ensure((g - 0.05 * n as f64).abs() <= 1.0, || format!("stratum {k:?}: {g} of {n}"))?;
    }

    // Size-matched corpus: stratum cells of the 98,161-document test split.
    let cells = [[2660usize, 6314, 637], [29260, 46800, 7548], [1476, 2684, 782]];
    let mut keys = Vec::new();
    for (l, row) in cells.iter().enumerate() {
        for (p, &n) in row.iter().enumerate() {
            keys.extend(std::iter::repeat_n(StratumKey { length: l, pii: p }, n));
        }
    }
    let total = keys.len();
    let fraction = 4911.0 / 98161.0;
    let picked = stratified_indices(&keys, &StrataConfig::medical(fraction, 1));
    let mut per: BTreeMap<StratumKey, usize> = BTreeMap::new();
    for &i in &picked {
        *per.entry(keys[i]).or_default() += 1;
    }
    for (l, row) in cells.iter().enumerate() {
        for (p, &n) in row.iter().enumerate() {
            let g = per.get(&StratumKey { length: l, pii: p }).copied().unwrap_or(0) as f64;
            ensure((g - fraction * n as f64).abs() <= 1.0, || format!("cell ({l},{p}): {g} of {n}"))?;
        }
    }
    ensure(total == 98161 && picked.len() == 4911, || format!("{total} -> {}", picked.len()))?;
    let pct = 100.0 * picked.len() as f64 / total as f64;
    ensure((pct - 5.0).abs() < 0.05, || format!("aggregate {pct:.2}%"))?;
    Ok(format!("3000-doc corpus within +-1 per stratum; {total} -> {} ({pct:.1}%)", picked.len()))
}

// ------------------------------------------------------------ end to end

fn run_config(seed: u64, backends: &[&str], methods: &[&str]) -> RunConfig {
    let mut src = format!(
        "seed = {seed}\noutput_dir = \"out\"\nmin_category_count = 1\nmethods = {:?}\n[corpus]\ntest = \"t.jsonl\"\n",
        methods
    );
    for b in backends {
        src.push_str(&format!("[[backends]]\nid = \"{b}\"\nkind = \"mock\"\nmock = \"echo\"\n"));
    }
    let cfg: RunConfig = toml::from_str(&src).unwrap();
    cfg.validate().unwrap();
    cfg
}

fn pseudo_corpus(n: usize, seed: u64) -> CorpusSplit {
    let (split, _) = common::redacted_corpus(n, seed);
    let set = builtin_locales("us").unwrap();
    let table = SlotTable::builtin();
    pseudonymize_split(&split, &set, &ProfileConfig::default(), &Injector::Template(&table), seed, 0.0).corpus
}

fn spans_of(split: &CorpusSplit) -> BTreeMap<String, Vec<PiiSpan>> {
    split.documents.iter().map(|d| (d.id.clone(), d.pii_spans.clone())).collect()
}

fn end_to_end_once() -> Result<(String, String, f64, f64, f64, f64), String> {
    let split = pseudo_corpus(60, 17);
    let spans = spans_of(&split);
    let opts = RunOptions::default();
    let copy = register_mock(MockKind::PrefixNSentences, MockParams { n: Some(10_000), ..Default::default() })
        .map_err(|e| e.to_string())?;
    let prefix = register_mock(MockKind::PrefixNSentences, MockParams { n: Some(2), ..Default::default() })
        .map_err(|e| e.to_string())?;
    let scrubber = register_mock(MockKind::Scrubber, MockParams::default()).map_err(|e| e.to_string())?;
    let routed: Arc<dyn ChatBackend> =
        Arc::new(RoleRouter::new(copy.clone()).route(StepRole::Anonymize, scrubber).with_id("scrubbed"));

    let zs = MethodSpec::new(PromptMethod::ZeroShotSummary);
    let sa = MethodSpec::new(PromptMethod::SummarizeThenAnonymize);

    // Copy mock: summary is the whole document.
    let copy_run = summarize_split(&split, &zs, copy.as_ref(), &opts, 4);
    ensure(copy_run.errors.is_empty(), || format!("{:?}", copy_run.errors))?;
    let mut records = copy_run.records.clone();
    for r in &mut records {
        r.backend_id = "copy".into();
    }
    let cfg = run_config(1, &["copy"], &["zero-shot-summary"]);
    let report = build_report(&cfg, &split, &spans, &records);
    let row = &report.rows[0];
    let copy_ldr = row.ldr.unwrap_or(f64::NAN);
    let copy_ptr = row.ptr.unwrap_or(f64::NAN);

    // Prefix mock: PTR against the token-share oracle.
    let prefix_run = summarize_split(&split, &zs, prefix.as_ref(), &opts, 4);
    let mut shares = Vec::new();
    for (d, r) in split.documents.iter().zip(&prefix_run.records) {
        let mut pool: Vec<String> = sumleak::core::metrics::summary_tokens(&r.summary);
        let (mut leaked, mut total) = (0usize, 0usize);
        for s in &d.pii_spans {
            for t in s.normalized.split_whitespace() {
                total += 1;
                if let Some(j) = pool.iter().position(|p| p == t) {
                    pool.remove(j);
                    leaked += 1;
                }
            }
        }
        if total > 0 {
            shares.push(leaked as f64 / total as f64);
        }
    }
    let oracle = shares.iter().sum::<f64>() / shares.len() as f64;
    let mut records = prefix_run.records.clone();
    for r in &mut records {
        r.backend_id = "copy".into();
    }
    let prefix_ptr = build_report(&cfg, &split, &spans, &records).rows[0].ptr.unwrap_or(f64::NAN);
    ensure(close(prefix_ptr, oracle), || format!("prefix PTR {prefix_ptr} vs oracle {oracle}"))?;

    // Scrubber on the anonymize step.
    let mut records = summarize_split(&split, &zs, routed.as_ref(), &opts, 4).records;
    let sa_run = summarize_split(&split, &sa, routed.as_ref(), &opts, 4);
    ensure(sa_run.errors.is_empty(), || format!("{:?}", sa_run.errors))?;
    records.extend(sa_run.records);
    let cfg = run_config(1, &["scrubbed"], &["zero-shot-summary", "summarize-then-anonymize"]);
    let report = build_report(&cfg, &split, &spans, &records);
    let zs_ptr = report.rows[0].ptr.unwrap_or(f64::NAN);
    let sa_ptr = report.rows[1].ptr.unwrap_or(f64::NAN);
    let json = serde_json::to_string(&report).unwrap();
    Ok((report.to_tsv(), json, copy_ldr, copy_ptr, zs_ptr, sa_ptr))
}

fn end_to_end() -> Check {
    let first = end_to_end_once()?;
    let second = end_to_end_once()?;
    let (_, _, copy_ldr, copy_ptr, zs_ptr, sa_ptr) = first;
    ensure(copy_ldr == 1.0, || format!("copy LDR {copy_ldr}"))?;
    ensure(close(copy_ptr, 1.0), || format!("copy PTR {copy_ptr}"))?;
    ensure(sa_ptr == 0.0, || format!("PTR(summarize-then-anonymize) = {sa_ptr}"))?;
    ensure(sa_ptr < zs_ptr, || format!("scrubbed {sa_ptr} not below zero-shot {zs_ptr}"))?;
    ensure(first.0 == second.0 && first.1 == second.1, || "reports differ between runs".into())?;
    Ok(format!("copy LDR=1.0 PTR=1.0; prefix PTR matches oracle; PTR zero-shot={zs_ptr:.3} scrubbed=0.0; reproducible"))
}

// ------------------------------------------------------- prompt fidelity

fn prompt_fidelity() -> Check {
    let doc = Document::new("g", "Mr. Sanchez is a 50 yr old man admitted on 2023-09-20. He lives in Tucson.", SourceTask::Medical);
    let backend = common::Fixed("Scripted reply.");
    let opts = RunOptions {
        icl_samples: vec!["Patient recovered well.".into(), "Appeal was granted.".into()],
        ..RunOptions::default()
    };
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    for m in PromptMethod::ALL {
        let spec = MethodSpec::new(m);
        let rec = sumleak::core::pipeline::run_method(&spec, &doc, &backend, &opts).map_err(|e| e.to_string())?;
        let mut rendered = String::new();
        for (i, s) in rec.steps.iter().enumerate() {
            rendered.push_str(&format!("=== step {i} ===\n{}\n", s.prompt));
        }
        let golden = std::fs::read_to_string(dir.join(format!("{}.txt", m.as_str()))).map_err(|e| e.to_string())?;
        ensure(rendered == golden, || format!("{} differs from its golden file", m.as_str()))?;
    }
    let cot = TemplateId::CotQuestions.builtin();
    ensure(cot.lines().filter(|l| l.starts_with(char::is_numeric)).count() == 5, || "CoT questions".into())?;
    Ok("six methods byte-match golden prompts".into())
}

// ---------------------------------------------------------------- kappa

fn post(agent: &ureq::Agent, url: &str, body: &Value) -> Result<(u16, Value), String> {
    let mut r = agent.post(url).send_json(body).map_err(|e| e.to_string())?;
    let status = r.status().as_u16();
    let v = r.body_mut().read_json::<Value>().unwrap_or(Value::Null);
    Ok((status, v))
}

fn get(agent: &ureq::Agent, url: &str) -> Result<(u16, Value), String> {
    let mut r = agent.get(url).call().map_err(|e| e.to_string())?;
    let status = r.status().as_u16();
    let v = r.body_mut().read_json::<Value>().unwrap_or(Value::Null);
    Ok((status, v))
}

fn kappa_fixtures() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = Arc::new(AnnoStore::open(dir.path()).map_err(|e| e.to_string())?);
    let server = spawn(store, "127.0.0.1:0".parse().unwrap()).map_err(|e| e.to_string())?;
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let pairs: Vec<Value> = (0..110)
        .map(|i| {
            json!({"source_id": format!("d{i}"), "document": format!("Source {i}."),
                   "summaries": [{"backend": "model-x", "text": "one"}, {"backend": "model-y", "text": "two"}]})
        })
        .collect();
    let (status, created) = post(
        &agent,
        &server.url("/sessions"),
        &json!({"pairs": pairs, "annotators": ["a1", "a2"], "adjudicator": "adj", "calibration_pair_count": 10, "seed": 5}),
    )?;
    ensure(status == 201, || format!("create returned {status}: {created}"))?;
    let id = created["id"].as_str().unwrap_or_default().to_string();
    let sheets = common::kappa_fixture();
    let answer = |a: Answer| serde_json::to_value(a).unwrap();
    for (k, who) in ["a1", "a2"].iter().enumerate() {
        let mut main = 0;
        loop {
            let (_, next) = get(&agent, &server.url(&format!("/sessions/{id}/next?annotator={who}")))?;
            if next["status"] == "phase_complete" {
                break;
            }
            let pair = next["pair_id"].as_str().unwrap().to_string();
            let (q1, q2, q3) = if next["phase"] == "calibration" {
                // Calibration answers disagree wholesale; they must not count.
                let x = if k == 0 { Answer::SummaryA } else { Answer::Neither };
                (x, x, x)
            } else {
                let idx: usize = pair.trim_start_matches("pair-").parse::<usize>().unwrap() - 11;
                main += 1;
                let pick = |q: &str| {
                    let (a, b) = &sheets[q];
                    if k == 0 {
                        a[idx]
                    } else {
                        b[idx]
                    }
                };
                (pick("q1"), pick("q2"), pick("q3"))
            };
            let (s, v) = post(
                &agent,
                &server.url(&format!("/sessions/{id}/annotations")),
                &json!({"pair_id": pair, "annotator": who, "q1": answer(q1), "q2": answer(q2), "q3": answer(q3)}),
            )?;
            ensure(s == 201, || format!("submit returned {s}: {v}"))?;
        }
        ensure(main == 100, || format!("{who} answered {main} main pairs"))?;
    }
    let want = [("q1", 0.71), ("q2", 1.0), ("q3", 0.78)];
    let mut got = Vec::new();
    for (q, target) in want {
        let (s, v) = get(&agent, &server.url(&format!("/sessions/{id}/agreement?q={q}")))?;
        ensure(s == 200, || format!("agreement {q} returned {s}"))?;
        let kappa = v["kappa"].as_f64().unwrap_or(f64::NAN);
        ensure((kappa - target).abs() <= 1e-2, || format!("{q}: kappa {kappa} vs {target}"))?;
        got.push(format!("{q}={kappa:.4}"));
    }
    Ok(format!("via GET /agreement: {}", got.join(" ")))
}

// ------------------------------------------------------------------- IFT

fn ift_round_trip() -> Check {
    let docs = (0..5)
        .map(|i| Document::new(format!("t{i}"), format!("Body {i} with details."), SourceTask::Legal).with_summary(format!("Summary {i}.")))
        .collect();
    let split = CorpusSplit::new(SplitName::Train, docs).unwrap();
    let export = export_ift(&split, TemplateId::PrivateSummary.builtin(), IftMeta::default()).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("ift.jsonl");
    write_jsonl(&path, &export.records).map_err(|e| e.to_string())?;
    let back: Vec<IftRecord> = read_jsonl(&path).map_err(|e| e.to_string())?;
    ensure(back == export.records, || "records changed in round trip".into())?;
    let raw: Value = serde_json::from_str(std::fs::read_to_string(&path).unwrap().lines().next().unwrap()).unwrap();
    ensure(raw["meta"]["lora_rank"] == 16 && raw["meta"]["lora_alpha"] == 16, || format!("meta {}", raw["meta"]))?;
    ensure(raw["meta"]["lr"].as_f64() == Some(5e-4), || format!("lr {}", raw["meta"]["lr"]))?;
    ensure(back.len() == 5 && back.iter().all(|r| !r.instruction.contains('{')), || "instructions".into())?;
    Ok(format!("{} records field-exact; rank 16, alpha 16, lr 5e-4", back.len()))
}

// ------------------------------------------------------------------ main

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("metric oracle suite", 60, metric_oracles),
        ("pseudonymization gate", 60, pseudonymization_gate),
        ("detector recall", 60, detector_recall),
        ("stratification", 120, stratification),
        ("end-to-end mock pipeline", 120, end_to_end),
        ("prompt fidelity", 60, prompt_fidelity),
        ("kappa fixtures", 60, kappa_fixtures),
        ("IFT export", 60, ift_round_trip),
    ];
    let mut failed = 0;
    for (name, budget, f) in criteria {
        let t = Instant::now();
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let took = t.elapsed();
        let r = match r {
            Ok(m) if took > Duration::from_secs(budget) => Err(format!("{m}; took {took:?}, budget {budget}s")),
            other => other,
        };
        match r {
            Ok(m) => println!("PASS {name}: {m} [{:.2}s]", took.as_secs_f64()),
            Err(m) => {
                failed += 1;
                println!("FAIL {name}: {m} [{:.2}s]", took.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
