//! Command-line entry points. Exit codes: 0 ok, 1 user error, 2 runtime
//! failure.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use sumleak_core::corpus::{exclude_zero_pii, stratify, stratum_counts, SplitName, StrataConfig};
use sumleak_core::detect::{category_counts, detect_rules, filter_rare_categories, RulePack, DEFAULT_MIN_COUNT};
use sumleak_core::pipeline::{export_ift, IftMeta, TemplateId};
use sumleak_core::profile::{LocaleSet, ProfileConfig};
use sumleak_core::pseudo::{SlotTable, DEFAULT_THRESHOLD};

use crate::config::RunConfig;
use crate::forge::{forge_profiles, pseudonymize_split, Injector};
use crate::io::{
    builtin_locales, load_locales, load_rule_pack, load_strata, read_corpus, read_text, write_corpus, write_jsonl,
    IoError,
};
use crate::run::{prepare, run_evaluate, run_summarize, RunError};
use crate::store::AnnoStore;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    User(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::User(e.to_string())
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(_) | RunError::Io(_) => CliError::User(e.to_string()),
            RunError::TooManyFailures { .. } => CliError::Runtime(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "sumleak", version, about = "Pseudonymized corpora and PII leakage audits for LLM summaries")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Mode {
    Template,
    Model,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Preset {
    Medical,
    Legal,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate synthetic profiles, one JSON object per line.
    Forge {
        /// `us`, `asylum`, or a locale JSON file or directory.
        #[arg(long, default_value = "us")]
        locales: String,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fill redaction placeholders with synthetic identities.
    Pseudonymize {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-document injection records, accepted or not.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long, default_value = "us")]
        locales: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Mode::Template)]
        mode: Mode,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        /// Slot inference rules replacing the builtin table.
        #[arg(long)]
        slots: Option<PathBuf>,
        /// Run config holding the backend for model mode.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        backend: Option<String>,
    },
    /// Stratified sampling over length and PII-count bins.
    Stratify {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// TOML strata config; overrides the preset.
        #[arg(long)]
        strata: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Preset::Medical)]
        preset: Preset,
        #[arg(long, default_value_t = 0.05)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Drop documents without PII spans before sampling.
        #[arg(long)]
        exclude_zero_pii: bool,
    },
    /// Replace corpus spans with rule-detected ones and report category counts.
    Detect {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Report AGE findings as DATE_TIME.
        #[arg(long)]
        fold_age: bool,
        #[arg(long, default_value_t = DEFAULT_MIN_COUNT)]
        min_count: usize,
    },
    /// Summarize the test corpus with every configured backend and method.
    Summarize {
        #[arg(long)]
        config: PathBuf,
    },
    /// Score summaries and write report tables.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        summaries: Option<PathBuf>,
    },
    /// Write instruction-tuning records from a training corpus.
    ExportIft {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Builtin template name or a template file.
        #[arg(long, default_value = "private_summary")]
        template: String,
        #[arg(long, default_value_t = 16)]
        lora_rank: u32,
        #[arg(long, default_value_t = 16)]
        lora_alpha: u32,
        #[arg(long, default_value_t = 5e-4)]
        lr: f64,
    },
    /// Run the annotation service.
    Serve {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

fn locales(spec: &str) -> Result<LocaleSet, CliError> {
    match builtin_locales(spec) {
        Some(set) => Ok(set),
        None => Ok(load_locales(Path::new(spec))?),
    }
}

fn user(e: impl ToString) -> CliError {
    CliError::User(e.to_string())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Forge { locales: l, count, seed, out } => {
            let set = locales(&l)?;
            let profiles = forge_profiles(count, seed, &set, &ProfileConfig::default()).map_err(user)?;
            write_jsonl(&out, &profiles)?;
            eprintln!("wrote {} profiles to {}", profiles.len(), out.display());
        }
        Command::Pseudonymize { corpus, out, log, locales: l, seed, mode, threshold, slots, config, backend } => {
            let split = read_corpus(&corpus, SplitName::Test)?;
            let set = locales(&l)?;
            let table = match slots {
                Some(p) => SlotTable::parse(&read_text(&p)?).map_err(user)?,
                None => SlotTable::builtin(),
            };
            let cfg_profile = ProfileConfig::default();
            let outcome = match mode {
                Mode::Template => {
                    pseudonymize_split(&split, &set, &cfg_profile, &Injector::Template(&table), seed, threshold)
                }
                Mode::Model => {
                    let cfg_path = config.ok_or_else(|| user("model mode needs --config"))?;
                    let cfg = RunConfig::load(&cfg_path).map_err(user)?;
                    let id = backend.unwrap_or_else(|| cfg.backends[0].id.clone());
                    let i = cfg
                        .backends
                        .iter()
                        .position(|b| b.id == id)
                        .ok_or_else(|| user(format!("backend `{id}` is not configured")))?;
                    let prep = prepare(&cfg)?;
                    let model = cfg.backends[i].model.clone().unwrap_or(id);
                    let injector =
                        Injector::Model { backend: prep.backends[i].as_ref(), model: &model, pack: &prep.pack };
                    pseudonymize_split(&split, &set, &cfg_profile, &injector, seed, threshold)
                }
            };
            write_corpus(&out, &outcome.corpus)?;
            if let Some(p) = log {
                write_jsonl(&p, &outcome.log)?;
            }
            for e in &outcome.errors {
                eprintln!("{}: {}", e.doc_id, e.message);
            }
            eprintln!(
                "accepted {} of {} documents ({} errors)",
                outcome.corpus.len(),
                split.len(),
                outcome.errors.len()
            );
            if !split.is_empty() && outcome.errors.len() == split.len() {
                return Err(CliError::Runtime("no document could be pseudonymized".into()));
            }
        }
        Command::Stratify { corpus, out, strata, preset, fraction, seed, exclude_zero_pii: drop_empty } => {
            let mut split = read_corpus(&corpus, SplitName::Test)?;
            if drop_empty {
                split = exclude_zero_pii(split);
            }
            let cfg = match strata {
                Some(p) => load_strata(&p)?,
                None => match preset {
                    Preset::Medical => StrataConfig::medical(fraction, seed),
                    Preset::Legal => StrataConfig::legal(fraction, seed),
                },
            };
            let sampled = stratify(split.clone(), &cfg).map_err(user)?;
            println!("length\tpii\tsize\tsampled");
            for c in stratum_counts(&split, &sampled, &cfg) {
                println!("{}\t{}\t{}\t{}", c.length_label, c.pii_label, c.size, c.sampled);
            }
            println!("total\t\t{}\t{}", split.len(), sampled.len());
            write_corpus(&out, &sampled)?;
        }
        Command::Detect { corpus, out, rules, fold_age, min_count } => {
            let mut split = read_corpus(&corpus, SplitName::Test)?;
            let pack = match rules {
                Some(dir) => load_rule_pack(&dir)?,
                None => RulePack::builtin(),
            }
            .with_fold_age(fold_age);
            for d in &mut split.documents {
                d.pii_spans = detect_rules(&d.body, &pack);
            }
            let counts = category_counts(std::slice::from_ref(&split));
            let active = filter_rare_categories(std::slice::from_ref(&split), min_count);
            for (c, n) in &counts {
                let mark = if active.contains(c) { "" } else { "\t(rare)" };
                println!("{}\t{}{}", c.as_str(), n, mark);
            }
            write_corpus(&out, &split)?;
        }
        Command::Summarize { config } => {
            let cfg = RunConfig::load(&config).map_err(user)?;
            let s = run_summarize(&cfg)?;
            eprintln!("{} summaries, {} failures", s.records.len(), s.errors.len());
        }
        Command::Evaluate { config, summaries } => {
            let cfg = RunConfig::load(&config).map_err(user)?;
            let report = run_evaluate(&cfg, summaries.as_deref())?;
            print!("{}", report.to_markdown());
        }
        Command::ExportIft { corpus, out, template, lora_rank, lora_alpha, lr } => {
            let split = read_corpus(&corpus, SplitName::Train)?;
            let text = match template.parse::<TemplateId>() {
                Ok(id) => id.builtin().to_string(),
                Err(_) => read_text(Path::new(&template))?,
            };
            let meta = IftMeta { lora_rank, lora_alpha, lr, ..IftMeta::default() };
            let export = export_ift(&split, text.strip_suffix('\n').unwrap_or(&text), meta).map_err(user)?;
            write_jsonl(&out, &export.records)?;
            eprintln!("wrote {} records, skipped {} without a reference", export.records.len(), export.skipped.len());
        }
        Command::Serve { data, addr } => {
            let store = Arc::new(AnnoStore::open(&data).map_err(|e| CliError::Runtime(e.to_string()))?);
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Runtime(e.to_string()))?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await.map_err(user)?;
                eprintln!("listening on {}", listener.local_addr().map_err(user)?);
                crate::server::serve(store, listener).await.map_err(|e| CliError::Runtime(e.to_string()))
            })?;
        }
    }
    Ok(())
}
