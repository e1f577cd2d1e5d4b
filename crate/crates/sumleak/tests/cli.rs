mod common;

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sumleak::io::write_corpus;

fn sumleak(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sumleak")).args(args).current_dir(cwd).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn lines(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

const CONFIG: &str = r#"
seed = 7
output_dir = "out"
methods = ["zero-shot-summary", "summarize-then-anonymize", "zero-shot-private+icl2"]
min_category_count = 1

[corpus]
test = "pseudo.jsonl"
train = "pseudo.jsonl"

[[backends]]
id = "echo"
kind = "mock"
mock = "echo"

[[backends]]
id = "lead"
kind = "mock"
mock = "prefix_n_sentences"
n = 2
"#;

#[test]
fn full_pipeline_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (split, _) = common::redacted_corpus(40, 9);
    write_corpus(&d.join("raw.jsonl"), &split).unwrap();

    ok(&sumleak(&["forge", "--count", "5", "--seed", "1", "--out", "profiles.jsonl"], d));
    assert_eq!(lines(&d.join("profiles.jsonl")).len(), 5);

    ok(&sumleak(
        &["pseudonymize", "--corpus", "raw.jsonl", "--out", "pseudo.jsonl", "--log", "log.jsonl", "--seed", "2"],
        d,
    ));
    let docs = lines(&d.join("pseudo.jsonl"));
    assert!(!docs.is_empty());
    assert_eq!(lines(&d.join("log.jsonl")).len(), 40);
    assert!(docs.iter().all(|v| !v["body"].as_str().unwrap().contains("___")));

    let table = ok(&sumleak(&["stratify", "--corpus", "pseudo.jsonl", "--out", "strat.jsonl", "--fraction", "0.5"], d));
    assert!(table.starts_with("length\tpii\tsize\tsampled"));
    let n = lines(&d.join("strat.jsonl")).len();
    let total_line = table.lines().last().unwrap();
    assert!(total_line.ends_with(&format!("\t{n}")), "{total_line}");

    let counts = ok(&sumleak(&["detect", "--corpus", "pseudo.jsonl", "--out", "detected.jsonl"], d));
    assert!(counts.contains("PERSON\t"));

    std::fs::write(d.join("run.toml"), CONFIG).unwrap();
    ok(&sumleak(&["summarize", "--config", "run.toml"], d));
    let summaries = lines(&d.join("out/summaries.jsonl"));
    assert_eq!(summaries.len(), docs.len() * 6);
    let md = ok(&sumleak(&["evaluate", "--config", "run.toml"], d));
    assert!(md.contains("| backend | method | PTR | LDR |"), "{md}");
    let tsv = std::fs::read_to_string(d.join("out/report.tsv")).unwrap();
    assert!(tsv.starts_with("# config_hash="));
    assert_eq!(tsv.lines().count(), 2 + 6);
    let first = std::fs::read(d.join("out/report.json")).unwrap();
    ok(&sumleak(&["summarize", "--config", "run.toml"], d));
    ok(&sumleak(&["evaluate", "--config", "run.toml"], d));
    assert_eq!(first, std::fs::read(d.join("out/report.json")).unwrap());

    ok(&sumleak(&["export-ift", "--corpus", "pseudo.jsonl", "--out", "ift.jsonl"], d));
    let ift = lines(&d.join("ift.jsonl"));
    assert!(ift.iter().all(|r| r["meta"]["lora_rank"] == 16));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(sumleak(&["--version"], d).status.code(), Some(0));
    assert_eq!(sumleak(&["no-such-command"], d).status.code(), Some(1));
    assert_eq!(sumleak(&["stratify", "--corpus", "missing.jsonl", "--out", "x.jsonl"], d).status.code(), Some(1));

    std::fs::write(d.join("bad.jsonl"), "{\"id\": \"a\", \"body\": \"x\"}\nnot json\n").unwrap();
    let out = sumleak(&["detect", "--corpus", "bad.jsonl", "--out", "x.jsonl"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2"), "{}", String::from_utf8_lossy(&out.stderr));

    std::fs::write(d.join("inline.toml"), "seed = 1\noutput_dir = \"o\"\nmethods = [\"zero-shot-summary\"]\n[corpus]\ntest = \"t.jsonl\"\n[[backends]]\nid = \"h\"\nkind = \"http\"\nendpoint = \"http://127.0.0.1:9\"\napi_key = \"sk-inline\"\n").unwrap();
    assert_eq!(sumleak(&["summarize", "--config", "inline.toml"], d).status.code(), Some(1));

    // Every call fails: an empty transcript never matches.
    let (split, _) = common::redacted_corpus(3, 1);
    write_corpus(&d.join("t.jsonl"), &split).unwrap();
    std::fs::write(d.join("empty.jsonl"), "").unwrap();
    std::fs::write(d.join("fail.toml"), "seed = 1\noutput_dir = \"o\"\nmethods = [\"zero-shot-summary\"]\n[corpus]\ntest = \"t.jsonl\"\n[[backends]]\nid = \"s\"\nkind = \"mock\"\nmock = \"scripted\"\ntranscript = \"empty.jsonl\"\n").unwrap();
    let out = sumleak(&["summarize", "--config", "fail.toml"], d);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(lines(&d.join("o/errors.jsonl")).len(), 3);
}

#[test]
fn credentials_never_reach_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (split, _) = common::redacted_corpus(2, 4);
    write_corpus(&d.join("t.jsonl"), &split).unwrap();
    std::fs::write(d.join("c.toml"), "seed = 1\noutput_dir = \"o\"\nmethods = [\"zero-shot-summary\"]\nfailure_threshold = 1.0\n[corpus]\ntest = \"t.jsonl\"\n[[backends]]\nid = \"h\"\nkind = \"http\"\nendpoint = \"http://127.0.0.1:9/v1\"\ncredential_env = \"SUMLEAK_CLI_KEY\"\n[backends.retry]\nmax_attempts = 1\nbackoff_base_ms = 1\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sumleak"))
        .args(["summarize", "--config", "c.toml"])
        .env("SUMLEAK_CLI_KEY", "sk-very-secret")
        .current_dir(d)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!String::from_utf8_lossy(&out.stderr).contains("sk-very-secret"));
    for f in ["o/summaries.jsonl", "o/errors.jsonl"] {
        let text = std::fs::read_to_string(d.join(f)).unwrap();
        assert!(!text.contains("sk-very-secret"), "{f}");
    }
    assert_eq!(lines(&d.join("o/errors.jsonl")).len(), 2);
}
