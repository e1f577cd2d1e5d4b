use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use proptest::prelude::*;
use sumleak_core::corpus::{exclude_zero_pii, stratify, stratum_target, StrataConfig, StratumKey};
use sumleak_core::detect::{detect_rules, RulePack};
use sumleak_core::gateway::{
    BackendError, ChatBackend, ChatRequest, Completion, PrefixMock, RoleRouter, ScrubberMock, StepRole,
};
use sumleak_core::metrics::{cohens_kappa, ldr, leak_account, ptr, rouge, tpr, Averaging, RougeVariant, TprMode};
use sumleak_core::pipeline::{run_method, MethodSpec, PromptMethod, RunOptions};
use sumleak_core::profile::{generate_profile, LocaleSet, LocaleTable, ProfileConfig};
use sumleak_core::text::contains_placeholder;
use sumleak_core::{CorpusSplit, Document, PiiCategory, PiiSpan, SourceTask, SplitName};

const WORDS: &[&str] = &["river", "stone", "patient", "report", "quiet", "north", "apple", "seven"];

fn text(max: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(WORDS), 0..max).prop_map(|w| w.join(" "))
}

fn nonempty(max: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(WORDS), 1..max).prop_map(|w| w.join(" "))
}

fn doc_strategy() -> impl Strategy<Value = (usize, usize)> {
    (1usize..4000, 0usize..150)
}

fn corpus(shapes: &[(usize, usize)]) -> CorpusSplit {
    let docs = shapes
        .iter()
        .enumerate()
        .map(|(i, &(words, spans))| {
            let spans = spans.min(words);
            let body = "w ".repeat(words);
            let ss = (0..spans).map(|k| PiiSpan::new(2 * k, 2 * k + 1, PiiCategory::Person, "w")).collect();
            Document::new(format!("d{i}"), body.trim_end(), SourceTask::Medical).with_spans(ss).unwrap()
        })
        .collect();
    CorpusSplit::new(SplitName::Test, docs).unwrap()
}

fn locales() -> LocaleSet {
    let t: Vec<LocaleTable> = serde_json::from_str(include_str!("../data/locales/asylum.json")).unwrap();
    LocaleSet::new(t).unwrap()
}

const SENTENCES: &[&str] = &[
    "Mr. Garcia was seen on 2021-03-04.",
    "She lives in Phoenix with her sister.",
    "The patient is a 45 year old Hispanic man.",
    "Dr. Nguyen reviewed the chart.",
    "Follow up in two weeks.",
    "He was admitted to the ward.",
    "Appeal denied in Houston.",
];

fn body() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(SENTENCES), 1..6).prop_map(|s| s.join(" "))
}

/// Numbers every completion and records each prompt in call order.
struct Logger(Mutex<Vec<String>>);

impl ChatBackend for Logger {
    fn id(&self) -> &str {
        "logger"
    }

    fn chat(&self, req: &ChatRequest) -> Result<Completion, BackendError> {
        let mut log = self.0.lock().unwrap();
        log.push(req.last_user().unwrap_or("").to_string());
        Ok(Completion::counted(req, format!("reply-{}", log.len())))
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stratify_recounts_and_is_idempotent(shapes in prop::collection::vec(doc_strategy(), 1..120), seed in any::<u64>(), f in 0.01f64..1.0) {
        let split = corpus(&shapes);
        let cfg = StrataConfig::medical(f, seed);
        let sampled = stratify(split.clone(), &cfg).unwrap();
        let mut size: BTreeMap<StratumKey, usize> = BTreeMap::new();
        let mut got: BTreeMap<StratumKey, usize> = BTreeMap::new();
        for d in &split.documents { *size.entry(cfg.key_of(d)).or_default() += 1; }
        for d in &sampled.documents { *got.entry(cfg.key_of(d)).or_default() += 1; }
        for (k, n) in &size {
            let want = ((f * *n as f64).round() as usize).clamp(1, *n);
            prop_assert_eq!(stratum_target(*n, f), want);
            prop_assert_eq!(got.get(k).copied().unwrap_or(0), want);
        }
        let again = stratify(sampled.clone(), &StrataConfig::medical(1.0, seed ^ 1)).unwrap();
        let mut a = sampled.ids(); a.sort();
        let mut b = again.ids(); b.sort();
        prop_assert_eq!(a, b);
        let once = exclude_zero_pii(split);
        prop_assert_eq!(exclude_zero_pii(once.clone()), once);
    }

    #[test]
    fn profiles_are_seed_stable_and_placeholder_free(seed in any::<u64>()) {
        let set = locales();
        let a = generate_profile(seed, &set, &ProfileConfig::default()).unwrap();
        let b = generate_profile(seed, &set, &ProfileConfig::default()).unwrap();
        prop_assert_eq!(&a, &b);
        for (_, v) in a.attributes() {
            prop_assert!(!v.is_empty() && !contains_placeholder(&v), "{}", v);
        }
    }

    #[test]
    fn metrics_in_range_and_order_free(
        docs in prop::collection::vec((prop::collection::vec((nonempty(3), 0usize..4), 0..4), text(12)), 1..8),
        rot in 0usize..8,
    ) {
        let cats = [PiiCategory::Person, PiiCategory::Location, PiiCategory::Race, PiiCategory::Gender];
        let build = |docs: &[(Vec<(String, usize)>, String)]| {
            docs.iter().map(|(spans, summary)| {
                let mut body = String::new();
                let mut out = Vec::new();
                for (t, c) in spans {
                    if !body.is_empty() { body.push_str(" x "); }
                    let s = body.chars().count();
                    body.push_str(t);
                    out.push(PiiSpan::new(s, s + t.chars().count(), cats[*c], t.clone()));
                }
                (out, summary.clone())
            }).collect::<Vec<_>>()
        };
        let a = build(&docs);
        let mut rotated = docs.clone();
        rotated.rotate_left(rot % docs.len());
        let b = build(&rotated);
        let acc = |d: &[(Vec<PiiSpan>, String)]| d.iter().map(|(s, t)| leak_account("d", s, t)).collect::<Vec<_>>();
        let (xa, xb) = (acc(&a), acc(&b));
        for x in &xa {
            prop_assert!(x.leaked_tokens <= x.source_private_tokens);
            prop_assert_eq!(x.leaked, x.leaked_tokens > 0);
        }
        let same = |p: Result<f64, _>, q: Result<f64, _>| match (p, q) {
            (Ok(p), Ok(q)) => (p - q).abs() < 1e-12 && (0.0..=1.0).contains(&p),
            (Err(_), Err(_)) => true,
            _ => false,
        };
        prop_assert!(same(ptr(&xa), ptr(&xb)));
        prop_assert!(same(ldr(&xa), ldr(&xb)));
        let view = |d: &[(Vec<PiiSpan>, String)]| d.iter().map(|(s, t)| (s.clone(), t.clone())).collect::<Vec<_>>();
        let (va, vb) = (view(&a), view(&b));
        let ra: Vec<(&[PiiSpan], &str)> = va.iter().map(|(s, t)| (s.as_slice(), t.as_str())).collect();
        let rb: Vec<(&[PiiSpan], &str)> = vb.iter().map(|(s, t)| (s.as_slice(), t.as_str())).collect();
        for c in cats {
            for mode in [TprMode::Span, TprMode::Token] {
                prop_assert!(same(tpr(&ra, c, mode, Averaging::PerDocument), tpr(&rb, c, mode, Averaging::PerDocument)));
            }
        }
    }

    #[test]
    fn leak_matching_is_monotone(spans in prop::collection::vec(nonempty(3), 1..4), summary in text(10), extra in text(6)) {
        let mut body = String::new();
        let mut ss = Vec::new();
        for t in &spans {
            if !body.is_empty() { body.push_str(" x "); }
            let s = body.chars().count();
            body.push_str(t);
            ss.push(PiiSpan::new(s, s + t.chars().count(), PiiCategory::Person, t.clone()));
        }
        let before = leak_account("d", &ss, &summary).leaked_tokens;
        let after = leak_account("d", &ss, &format!("{summary} {extra}")).leaked_tokens;
        prop_assert!(after >= before);
    }

    #[test]
    fn rouge_swap_identity(c in nonempty(12), r in nonempty(12)) {
        for v in [RougeVariant::R1, RougeVariant::R2, RougeVariant::RL] {
            let x = rouge(&c, &r, v).unwrap();
            let y = rouge(&r, &c, v).unwrap();
            prop_assert!((x.precision - y.recall).abs() < 1e-12);
            for s in [x.precision, x.recall, x.f1] {
                prop_assert!((0.0..=1.0).contains(&s));
            }
        }
    }

    #[test]
    fn kappa_invariant_under_relabeling(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..40), perm in Just([0usize, 1, 2, 3]).prop_shuffle()) {
        let a: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let pa: Vec<usize> = a.iter().map(|&x| perm[x]).collect();
        let pb: Vec<usize> = b.iter().map(|&x| perm[x]).collect();
        let k1 = cohens_kappa(&a, &b).unwrap();
        let k2 = cohens_kappa(&pa, &pb).unwrap();
        prop_assert!((k1 - k2).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&k1));
    }

    #[test]
    fn methods_are_causal_and_reproducible(b in body(), m in 0usize..6) {
        let method = PromptMethod::ALL[m];
        let doc = Document::new("p", b, SourceTask::Medical);
        let opts = RunOptions { icl_samples: vec!["First sample.".into(), "Second sample.".into()], ..RunOptions::default() };
        let spec = MethodSpec::new(method);
        let run = || {
            let log = Logger(Mutex::new(Vec::new()));
            let rec = run_method(&spec, &doc, &log, &opts).unwrap();
            (rec, log.0.into_inner().unwrap())
        };
        let (rec, calls) = run();
        let (rec2, calls2) = run();
        prop_assert_eq!(&rec, &rec2);
        prop_assert_eq!(&calls, &calls2);
        let two = matches!(method, PromptMethod::AnonymizeThenSummarize | PromptMethod::SummarizeThenAnonymize | PromptMethod::CotPrivate);
        prop_assert_eq!(rec.steps.len(), if two { 2 } else { 1 });
        prop_assert_eq!(calls.len(), rec.steps.len());
        if two {
            prop_assert!(calls[1].contains("reply-1"), "step 2 prompt lacks step 1 output");
        }
    }

    #[test]
    fn scrubbed_second_step_never_leaks_more(bodies in prop::collection::vec(body(), 1..6)) {
        let pack = Arc::new(RulePack::builtin());
        let copy: Arc<dyn ChatBackend> = Arc::new(PrefixMock::new(10_000));
        let router = RoleRouter::new(copy).route(StepRole::Anonymize, Arc::new(ScrubberMock::new(pack.clone())));
        let opts = RunOptions::default();
        let score = |method| {
            let accounts: Vec<_> = bodies.iter().enumerate().map(|(i, b)| {
                let doc = Document::new(format!("d{i}"), b.clone(), SourceTask::Medical);
                let rec = run_method(&MethodSpec::new(method), &doc, &router, &opts).unwrap();
                leak_account(&doc.id, &detect_rules(&doc.body, &pack), &rec.summary)
            }).collect();
            ptr(&accounts)
        };
        match (score(PromptMethod::SummarizeThenAnonymize), score(PromptMethod::ZeroShotSummary)) {
            (Ok(s), Ok(z)) => prop_assert!(s <= z, "{} > {}", s, z),
            (Err(_), Err(_)) => {}
            other => prop_assert!(false, "{:?}", other),
        }
    }
}
