//! Stage orchestration behind the command-line subcommands. Every stage
//! computes its outputs in memory first, then writes them atomically into
//! `<out_dir>/<stage>/` together with `config.json` and `manifest.json`.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bench::{self, ChoiceInstance, SwagRow};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::grammar::{self, CheckOptions, Issue, SubprocessChecker};
use crate::io::{sha256_file, sha256_hex, to_jsonl, write_atomic};
use crate::kg_ingest::{self, GlucoseRecord, Loaded, Reject, Split, Triple};
use crate::mlm::{self, DatasetSpec};
use crate::overlap::{self, PairSearch};
use crate::relations::RelationTable;
use crate::stats;
use crate::tokenizer::SubwordVocab;
use crate::verbalizer::{self, ConnectiveTable, FilterReport, NameList, Source, VerbalizedSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    Ingest,
    Verbalize,
    Grammar,
    MlmPrep,
    ConvertCopa,
    ConvertTcr,
    Stats,
    Overlap,
    All,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Ingest,
        Command::Verbalize,
        Command::Grammar,
        Command::MlmPrep,
        Command::ConvertCopa,
        Command::ConvertTcr,
        Command::Stats,
        Command::Overlap,
        Command::All,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Verbalize => "verbalize",
            Command::Grammar => "grammar",
            Command::MlmPrep => "mlm-prep",
            Command::ConvertCopa => "convert-copa",
            Command::ConvertTcr => "convert-tcr",
            Command::Stats => "stats",
            Command::Overlap => "overlap",
            Command::All => "all",
        }
    }

    /// Output directory name under the output root.
    fn dir(self) -> &'static str {
        match self {
            Command::MlmPrep => "mlm",
            Command::ConvertCopa => "copa",
            Command::ConvertTcr => "tcr",
            other => other.name(),
        }
    }
}

impl std::str::FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown subcommand {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    /// sha256 of every input file read, keyed by path.
    pub inputs: BTreeMap<String, String>,
    /// sha256 of every file written, keyed by name relative to the stage dir.
    pub files: BTreeMap<String, String>,
    pub counts: serde_json::Value,
    /// Re-running `command` with `config.json` reproduces these files.
    pub config_file: String,
}

struct StageWriter {
    command: Command,
    dir: PathBuf,
    inputs: BTreeMap<String, String>,
    files: BTreeMap<String, String>,
}

impl StageWriter {
    fn new(cfg: &PipelineConfig, command: Command) -> Self {
        Self {
            command,
            dir: cfg.out_dir().join(command.dir()),
            inputs: BTreeMap::new(),
            files: BTreeMap::new(),
        }
    }

    fn inputs(&mut self, paths: &[PathBuf]) -> Result<()> {
        for p in paths {
            self.inputs.insert(p.display().to_string(), sha256_file(p)?);
        }
        Ok(())
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.files.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    fn finish(self, cfg: &PipelineConfig, counts: serde_json::Value) -> Result<PathBuf> {
        crate::io::write_json(&self.dir.join("config.json"), &cfg.resolved())?;
        let manifest = StageManifest {
            tool_version: crate::VERSION.to_string(),
            command: self.command.name().to_string(),
            seed: cfg.seed,
            inputs: self.inputs,
            files: self.files,
            counts,
            config_file: "config.json".to_string(),
        };
        crate::io::write_json(&self.dir.join("manifest.json"), &manifest)?;
        Ok(self.dir)
    }
}

struct Resources {
    table: RelationTable,
    connectives: ConnectiveTable,
    names: NameList,
}

impl Resources {
    fn load(cfg: &PipelineConfig) -> Result<Self> {
        Ok(Self {
            table: match &cfg.inputs.templates {
                Some(p) => RelationTable::load(p)?,
                None => RelationTable::shipped(),
            },
            connectives: match &cfg.inputs.connectives {
                Some(p) => ConnectiveTable::load(p)?,
                None => ConnectiveTable::shipped(),
            },
            names: match &cfg.inputs.names {
                Some(p) => NameList::from_lines(&crate::io::read_to_string(p)?)?,
                None => NameList::shipped(),
            },
        })
    }

    fn files(cfg: &PipelineConfig) -> Vec<PathBuf> {
        [&cfg.inputs.templates, &cfg.inputs.connectives, &cfg.inputs.names]
            .into_iter()
            .flatten()
            .cloned()
            .collect()
    }
}

#[derive(Debug, Default)]
pub struct Ingested {
    pub atomic: Option<Loaded<Triple>>,
    pub glucose: Option<Loaded<GlucoseRecord>>,
    pub files: Vec<PathBuf>,
}

fn ingest(cfg: &PipelineConfig, res: &Resources) -> Result<Ingested> {
    let mut out = Ingested::default();
    if cfg.inputs.atomic_dir.is_none() && cfg.inputs.glucose.is_none() {
        return Err(Error::Config(
            "no knowledge-graph input configured (inputs.atomic_dir or inputs.glucose)".into(),
        ));
    }
    if let Some(dir) = &cfg.inputs.atomic_dir {
        let mut loaded = Loaded::default();
        for &split in &cfg.atomic_splits {
            let path = kg_ingest::atomic_split_path(dir, split);
            let part = kg_ingest::load_atomic_file(&path, split, &res.table, cfg.accept_auxiliary_relations)?;
            loaded.records.extend(part.records);
            loaded.rejects.extend(part.rejects);
            loaded.input_rows += part.input_rows;
            out.files.push(path);
        }
        out.atomic = Some(loaded);
    }
    if let Some(path) = &cfg.inputs.glucose {
        out.glucose = Some(kg_ingest::load_glucose(path, cfg.glucose)?);
        out.files.push(path.clone());
    }
    out.files.extend(Resources::files(cfg));
    Ok(out)
}

fn load_counts<T>(l: &Option<Loaded<T>>) -> serde_json::Value {
    match l {
        Some(l) => json!({"records": l.records.len(), "rejects": l.rejects.len(), "input_rows": l.input_rows}),
        None => serde_json::Value::Null,
    }
}

/// The verbalized (and, after [`Corpus::normalize`], grammar-normalized)
/// corpus with everything needed by the later stages.
#[derive(Debug, Default)]
pub struct Corpus {
    pub ingested: Ingested,
    pub filtered: Vec<Triple>,
    pub filter_report: Option<FilterReport>,
    pub atomic: Vec<VerbalizedSample>,
    pub glucose: Vec<VerbalizedSample>,
    pub template_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueRow {
    pub source: Source,
    pub id: u64,
    pub sentence: String,
    pub issues: Vec<Issue>,
}

#[derive(Debug, Default)]
pub struct GrammarOutcome {
    pub changed: usize,
    pub issues: Vec<IssueRow>,
    pub warnings: Vec<String>,
}

pub fn build_corpus(cfg: &PipelineConfig) -> Result<Corpus> {
    let res = Resources::load(cfg)?;
    let ingested = ingest(cfg, &res)?;
    let mut corpus = Corpus {
        template_version: res.table.version().to_string(),
        ..Default::default()
    };
    if let Some(atomic) = &ingested.atomic {
        let (kept, report) = verbalizer::filter_triples(atomic.records.clone());
        corpus.atomic = verbalizer::verbalize_triples(&kept, &res.table, &res.names, cfg.seed)?;
        corpus.filtered = kept;
        corpus.filter_report = Some(report);
    }
    if let Some(glucose) = &ingested.glucose {
        let samples = verbalizer::verbalize_glucose_records(&glucose.records, &res.connectives)?;
        let (train, dev) = verbalizer::split_glucose(samples, cfg.seed);
        let mut all = train;
        all.extend(dev);
        all.sort_by_key(|s| s.id);
        corpus.glucose = all;
    }
    corpus.ingested = ingested;
    Ok(corpus)
}

impl Corpus {
    /// Applies the rule engine to every sentence, then the external checker
    /// if one is configured.
    pub fn normalize(&mut self, cfg: &PipelineConfig) -> GrammarOutcome {
        let mut outcome = GrammarOutcome::default();
        for samples in [&mut self.atomic, &mut self.glucose] {
            let changed: usize = samples
                .par_iter_mut()
                .map(|s| {
                    let n = grammar::normalize(&s.text);
                    let changed = n != s.text;
                    s.text = n;
                    changed as usize
                })
                .sum();
            outcome.changed += changed;
        }
        if let Some(command) = &cfg.grammar.checker_command {
            let opts = CheckOptions {
                batch_size: cfg.grammar.batch_size,
                apply_suggestions: cfg.grammar.apply_suggestions,
            };
            for samples in [&mut self.atomic, &mut self.glucose] {
                let sentences: Vec<String> = samples.iter().map(|s| s.text.clone()).collect();
                let report = match SubprocessChecker::new(command.clone()) {
                    Ok(mut checker) => grammar::check_external(&sentences, &mut checker, opts),
                    Err(e) => {
                        outcome.warnings.push(e.to_string());
                        break;
                    }
                };
                outcome.warnings.extend(report.warnings);
                for (s, checked) in samples.iter_mut().zip(report.results) {
                    if !checked.issues.is_empty() {
                        outcome.issues.push(IssueRow {
                            source: s.source,
                            id: s.id,
                            sentence: s.text.clone(),
                            issues: checked.issues,
                        });
                    }
                    if checked.sentence != s.text {
                        s.text = grammar::normalize(&checked.sentence);
                    }
                }
            }
        }
        outcome
    }
}

fn text_lines(samples: &[VerbalizedSample], split: Split) -> Vec<u8> {
    let mut out = String::new();
    for s in samples.iter().filter(|s| s.split == split) {
        out.push_str(&s.text);
        out.push('\n');
    }
    out.into_bytes()
}

fn write_corpus_files(w: &mut StageWriter, corpus: &Corpus) -> Result<serde_json::Value> {
    let mut counts = serde_json::Map::new();
    let parts = [
        ("atomic", corpus.ingested.atomic.is_some(), &corpus.atomic),
        ("glucose", corpus.ingested.glucose.is_some(), &corpus.glucose),
    ];
    for (name, present, samples) in parts {
        if !present {
            continue;
        }
        w.write(&format!("{name}.jsonl"), &to_jsonl(samples))?;
        for split in [Split::Train, Split::Dev] {
            w.write(&format!("{name}_{split}.txt"), &text_lines(samples, split))?;
        }
        let train = samples.iter().filter(|s| s.split == Split::Train).count();
        counts.insert(
            name.to_string(),
            json!({"samples": samples.len(), "train": train, "dev": samples.len() - train}),
        );
    }
    if let Some(report) = &corpus.filter_report {
        counts.insert("filter".to_string(), serde_json::to_value(report).unwrap());
    }
    Ok(serde_json::Value::Object(counts))
}

fn stage_ingest(cfg: &PipelineConfig) -> Result<PathBuf> {
    let res = Resources::load(cfg)?;
    let ing = ingest(cfg, &res)?;
    let mut w = StageWriter::new(cfg, Command::Ingest);
    w.inputs(&ing.files)?;
    let mut rejects: Vec<Reject> = Vec::new();
    if let Some(a) = &ing.atomic {
        w.write("atomic.jsonl", &to_jsonl(&a.records))?;
        rejects.extend(a.rejects.iter().cloned());
    }
    if let Some(g) = &ing.glucose {
        w.write("glucose.jsonl", &to_jsonl(&g.records))?;
        rejects.extend(g.rejects.iter().cloned());
    }
    w.write("rejects.jsonl", &to_jsonl(&rejects))?;
    let counts = json!({"atomic": load_counts(&ing.atomic), "glucose": load_counts(&ing.glucose)});
    w.finish(cfg, counts)
}

fn stage_verbalize(cfg: &PipelineConfig, corpus: &Corpus) -> Result<PathBuf> {
    let mut w = StageWriter::new(cfg, Command::Verbalize);
    w.inputs(&corpus.ingested.files)?;
    let counts = write_corpus_files(&mut w, corpus)?;
    if let Some(report) = &corpus.filter_report {
        w.write_json("filter_report.json", report)?;
    }
    w.finish(cfg, counts)
}

fn stage_grammar(cfg: &PipelineConfig, corpus: &Corpus, outcome: &GrammarOutcome) -> Result<PathBuf> {
    let mut w = StageWriter::new(cfg, Command::Grammar);
    w.inputs(&corpus.ingested.files)?;
    let mut counts = write_corpus_files(&mut w, corpus)?;
    w.write("issues.jsonl", &to_jsonl(&outcome.issues))?;
    counts["ruleset"] = json!(grammar::RULESET_VERSION);
    counts["normalized_changed"] = json!(outcome.changed);
    counts["sentences_with_issues"] = json!(outcome.issues.len());
    counts["checker_warnings"] = json!(outcome.warnings);
    w.finish(cfg, counts)
}

fn load_vocab(cfg: &PipelineConfig) -> Result<(SubwordVocab, Vec<PathBuf>)> {
    let vocab = cfg
        .inputs
        .vocab
        .as_ref()
        .ok_or_else(|| Error::Config("mlm-prep needs inputs.vocab".into()))?;
    match &cfg.inputs.merges {
        Some(merges) => Ok((SubwordVocab::bpe_from_files(vocab, merges)?, vec![vocab.clone(), merges.clone()])),
        None => Ok((SubwordVocab::wordpiece_from_file(vocab)?, vec![vocab.clone()])),
    }
}

fn stage_mlm(cfg: &PipelineConfig, corpus: &Corpus) -> Result<PathBuf> {
    let (vocab, vocab_files) = load_vocab(cfg)?;
    let mut w = StageWriter::new(cfg, Command::MlmPrep);
    w.inputs(&corpus.ingested.files)?;
    w.inputs(&vocab_files)?;
    let mut counts = serde_json::Map::new();
    let parts = [
        ("atomic", corpus.ingested.atomic.is_some(), &corpus.atomic),
        ("glucose", corpus.ingested.glucose.is_some(), &corpus.glucose),
    ];
    for (name, present, samples) in parts {
        if !present {
            continue;
        }
        let spec = DatasetSpec {
            name,
            seed: cfg.seed,
            policy: cfg.masking,
            max_seq_len: cfg.max_seq_len,
            template_version: &corpus.template_version,
        };
        let dir = w.dir.join(name);
        let manifest = mlm::emit_dataset(samples, &vocab, &spec, &dir)?;
        for (file, hash) in &manifest.files {
            w.files.insert(format!("{name}/{file}"), hash.clone());
        }
        counts.insert(name.to_string(), serde_json::to_value(&manifest.counts).unwrap());
    }
    w.finish(cfg, serde_json::Value::Object(counts))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub relations: Vec<stats::RelationCount>,
    pub atomic: stats::LengthStats,
    pub glucose: stats::LengthStats,
    pub combined: stats::LengthStats,
    pub length_limit: usize,
    pub length_claim_holds: bool,
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let combined = stats::length_stats(corpus.atomic.iter().chain(&corpus.glucose).map(|s| s.text.as_str()));
    CorpusStats {
        relations: stats::relation_distribution(&corpus.filtered),
        atomic: stats::sample_length_stats(&corpus.atomic),
        glucose: stats::sample_length_stats(&corpus.glucose),
        length_limit: stats::LENGTH_LIMIT,
        length_claim_holds: combined.claim_holds(),
        combined,
    }
}

fn stage_stats(cfg: &PipelineConfig, corpus: &Corpus) -> Result<PathBuf> {
    let s = corpus_stats(corpus);
    let mut w = StageWriter::new(cfg, Command::Stats);
    w.inputs(&corpus.ingested.files)?;
    w.write("relations.tsv", stats::relation_table_tsv(&s.relations).as_bytes())?;
    w.write(
        "lengths.tsv",
        stats::histogram_tsv(&[("atomic", &s.atomic), ("glucose", &s.glucose)]).as_bytes(),
    )?;
    w.write_json("stats.json", &s)?;
    let counts = json!({
        "samples": s.combined.samples,
        "within_limit": s.combined.within_limit,
        "fraction_within_limit": s.combined.fraction_within_limit,
        "length_claim_holds": s.length_claim_holds,
    });
    w.finish(cfg, counts)
}

fn stage_copa(cfg: &PipelineConfig) -> Result<PathBuf> {
    if cfg.inputs.copa.is_empty() {
        return Err(Error::Config("convert-copa needs inputs.copa".into()));
    }
    let mut w = StageWriter::new(cfg, Command::ConvertCopa);
    let index = cfg
        .inputs
        .easy_hard_index
        .as_ref()
        .map(|p| bench::EasyHardIndex::load(p))
        .transpose()?;
    let mut outputs: Vec<(String, Vec<u8>)> = Vec::new();
    let mut counts = serde_json::Map::new();
    let mut warnings = Vec::new();
    let mut inputs: Vec<PathBuf> = cfg.inputs.copa.values().cloned().collect();
    inputs.extend(cfg.inputs.easy_hard_index.clone());
    for (name, path) in &cfg.inputs.copa {
        let mut items = bench::load_copa(path)?;
        if let (Some(index), "test") = (&index, name.as_str()) {
            warnings.extend(bench::tag_easy_hard(&mut items, index));
        }
        let items: Vec<ChoiceInstance> = if cfg.prompt {
            items.iter().map(bench::add_prompt).collect()
        } else {
            items
        };
        let swag: Vec<SwagRow> = items.iter().map(SwagRow::from).collect();
        outputs.push((format!("{name}.jsonl"), to_jsonl(&items)));
        outputs.push((format!("{name}.swag.jsonl"), to_jsonl(&swag)));
        let cause = items.iter().filter(|i| i.asks_for == bench::AsksFor::Cause).count();
        let mut c = json!({"instances": items.len(), "cause": cause, "effect": items.len() - cause});
        if name == "dev" {
            let (train, dev) = bench::tuning_split(items, cfg.seed);
            c["tuning_train"] = json!(train.len());
            c["tuning_dev"] = json!(dev.len());
            outputs.push(("tuning_train.jsonl".into(), to_jsonl(&train)));
            outputs.push(("tuning_dev.jsonl".into(), to_jsonl(&dev)));
        }
        counts.insert(name.clone(), c);
    }
    counts.insert("warnings".into(), json!(warnings));
    w.inputs(&inputs)?;
    for (name, bytes) in outputs {
        w.write(&name, &bytes)?;
    }
    w.finish(cfg, serde_json::Value::Object(counts))
}

fn stage_tcr(cfg: &PipelineConfig) -> Result<PathBuf> {
    if cfg.inputs.tcr.is_empty() {
        return Err(Error::Config("convert-tcr needs inputs.tcr".into()));
    }
    let mut w = StageWriter::new(cfg, Command::ConvertTcr);
    let mut outputs = Vec::new();
    let mut rejects = Vec::new();
    let mut counts = serde_json::Map::new();
    for (name, path) in &cfg.inputs.tcr {
        let load = bench::load_tcr(path, &cfg.markers)?;
        counts.insert(
            name.clone(),
            json!({"instances": load.instances.len(), "rejects": load.rejects.len()}),
        );
        outputs.push((format!("{name}.jsonl"), to_jsonl(&load.instances)));
        rejects.extend(load.rejects);
    }
    w.inputs(&cfg.inputs.tcr.values().cloned().collect::<Vec<_>>())?;
    for (name, bytes) in outputs {
        w.write(&name, &bytes)?;
    }
    w.write("rejects.jsonl", &to_jsonl(&rejects))?;
    w.finish(cfg, serde_json::Value::Object(counts))
}

fn stage_overlap(cfg: &PipelineConfig) -> Result<PathBuf> {
    let (Some(bench_path), Some(corpus_path)) = (&cfg.inputs.bench_embeddings, &cfg.inputs.corpus_embeddings) else {
        return Err(Error::Config(
            "overlap needs inputs.bench_embeddings and inputs.corpus_embeddings".into(),
        ));
    };
    let mut inputs = vec![bench_path.clone(), corpus_path.clone()];
    let mut bench = overlap::load_embeddings(bench_path)?;
    let corpus = overlap::load_embeddings(corpus_path)?;
    if let Some(subset_path) = &cfg.inputs.bench_subset {
        let text = crate::io::read_to_string(subset_path)?;
        let ids: Vec<serde_json::Value> = serde_json::from_str(&text)
            .map_err(|e| Error::format(subset_path, e.line(), e.to_string()))?;
        let keep: HashSet<String> = ids
            .into_iter()
            .map(|v| match v {
                serde_json::Value::String(s) => s,
                other => other.to_string(),
            })
            .collect();
        bench.retain_ids(&keep);
        inputs.push(subset_path.clone());
    }
    let load_texts = |p: &Option<PathBuf>| -> Result<_> {
        p.as_ref().map(|p| overlap::load_texts(p)).transpose().map(Option::unwrap_or_default)
    };
    let bench_texts = load_texts(&cfg.inputs.bench_texts)?;
    let corpus_texts = load_texts(&cfg.inputs.corpus_texts)?;
    inputs.extend(cfg.inputs.bench_texts.clone());
    inputs.extend(cfg.inputs.corpus_texts.clone());

    let threshold = cfg.thresholds.iter().copied().fold(f64::INFINITY, f64::min);
    let pairs = overlap::pairs_above(&bench, &corpus, threshold, PairSearch { prefilter: cfg.overlap_prefilter })?;
    let report = overlap::report(&pairs, &bench_texts, &corpus_texts, &cfg.thresholds);

    let mut w = StageWriter::new(cfg, Command::Overlap);
    w.inputs(&inputs)?;
    w.write("pairs.jsonl", &report.jsonl)?;
    w.write("report.txt", report.text.as_bytes())?;
    w.write_json("summary.json", &report.summary)?;
    let counts = json!({
        "bench_items": bench.len(),
        "corpus_items": corpus.len(),
        "dimension": bench.dim(),
        "pairs": report.summary.counts,
    });
    w.finish(cfg, counts)
}

/// Result of one command: the stage directories written.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub stages: Vec<(Command, PathBuf)>,
}

/// Runs `command` on a worker pool sized by `cfg.workers`.
pub fn run(command: Command, cfg: &PipelineConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let workers = cfg
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(|| run_on_pool(command, cfg))
}

fn run_on_pool(command: Command, cfg: &PipelineConfig) -> Result<RunSummary> {
    for path in cfg.inputs.paths() {
        if !path.exists() {
            return Err(Error::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)));
        }
    }
    let mut summary = RunSummary::default();
    let mut done = |c: Command, dir: PathBuf| summary.stages.push((c, dir));
    match command {
        Command::Ingest => done(command, stage_ingest(cfg)?),
        Command::Verbalize => done(command, stage_verbalize(cfg, &build_corpus(cfg)?)?),
        Command::Grammar => {
            let mut corpus = build_corpus(cfg)?;
            let outcome = corpus.normalize(cfg);
            done(command, stage_grammar(cfg, &corpus, &outcome)?)
        }
        Command::MlmPrep | Command::Stats => {
            let mut corpus = build_corpus(cfg)?;
            corpus.normalize(cfg);
            let dir = if command == Command::Stats {
                stage_stats(cfg, &corpus)?
            } else {
                stage_mlm(cfg, &corpus)?
            };
            done(command, dir)
        }
        Command::ConvertCopa => done(command, stage_copa(cfg)?),
        Command::ConvertTcr => done(command, stage_tcr(cfg)?),
        Command::Overlap => done(command, stage_overlap(cfg)?),
        Command::All => {
            let inputs = &cfg.inputs;
            let has_kg = inputs.atomic_dir.is_some() || inputs.glucose.is_some();
            let has_overlap = inputs.bench_embeddings.is_some() && inputs.corpus_embeddings.is_some();
            if !has_kg && inputs.copa.is_empty() && inputs.tcr.is_empty() && !has_overlap {
                return Err(Error::Config("`all` found no configured inputs".into()));
            }
            if has_kg {
                done(Command::Ingest, stage_ingest(cfg)?);
                let mut corpus = build_corpus(cfg)?;
                done(Command::Verbalize, stage_verbalize(cfg, &corpus)?);
                let outcome = corpus.normalize(cfg);
                done(Command::Grammar, stage_grammar(cfg, &corpus, &outcome)?);
                done(Command::Stats, stage_stats(cfg, &corpus)?);
                if inputs.vocab.is_some() {
                    done(Command::MlmPrep, stage_mlm(cfg, &corpus)?);
                }
            }
            if !inputs.copa.is_empty() {
                done(Command::ConvertCopa, stage_copa(cfg)?);
            }
            if !inputs.tcr.is_empty() {
                done(Command::ConvertTcr, stage_tcr(cfg)?);
            }
            if has_overlap {
                done(Command::Overlap, stage_overlap(cfg)?);
            }
        }
    }
    Ok(summary)
}

/// Reads a stage manifest back, e.g. to verify recorded hashes.
pub fn read_stage_manifest(stage_dir: &Path) -> Result<StageManifest> {
    let path = stage_dir.join("manifest.json");
    let text = crate::io::read_to_string(&path)?;
    serde_json::from_str(&text).map_err(|e| Error::format(&path, e.line(), e.to_string()))
}
