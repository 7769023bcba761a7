use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use corpusforge::config::PipelineConfig;
use corpusforge::kg_ingest::Split;
use corpusforge::pipeline::{self, Command};

const EXIT_USAGE: u8 = 2;

/// Commonsense corpus builder: knowledge-graph verbalization, MLM dataset
/// preparation, benchmark conversion and overlap analysis.
///
/// Settings come from the JSON file given by --config, then CORPUSFORGE_*
/// environment variables (`__` separates nested keys, e.g.
/// CORPUSFORGE_MASKING__MASK_RATE=0.15), then flags.
#[derive(Debug, Parser)]
#[command(name = "corpusforge", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Pipeline config (JSON).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for name substitution, splits and masking.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads. Outputs are identical for any value.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output root; each stage writes to a subdirectory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
struct KgArgs {
    /// ATOMIC-2020 directory holding train.tsv and dev.tsv.
    #[arg(long, value_name = "DIR")]
    atomic_dir: Option<PathBuf>,
    /// GLUCOSE CSV (or JSONL) file.
    #[arg(long, value_name = "FILE")]
    glucose: Option<PathBuf>,
    /// ATOMIC splits to load, comma separated.
    #[arg(long, value_delimiter = ',', value_name = "SPLITS")]
    splits: Option<Vec<Split>>,
    /// Accept relations outside the 23 core ones that have a template.
    #[arg(long)]
    accept_auxiliary_relations: bool,
}

#[derive(Debug, Args, Default)]
struct GrammarArgs {
    /// External checker program, run once per batch with one sentence per
    /// stdin line; it must print one JSON array of issues per line.
    #[arg(long, value_name = "PROGRAM")]
    checker: Option<String>,
    /// Extra arguments for the checker (repeatable).
    #[arg(long = "checker-arg", value_name = "ARG", allow_hyphen_values = true)]
    checker_args: Vec<String>,
    /// Apply the checker's first suggestion for each issue.
    #[arg(long)]
    apply_suggestions: bool,
}

#[derive(Debug, Args, Default)]
struct MlmArgs {
    /// WordPiece vocab.txt, or byte-level BPE vocab.json together with --merges.
    #[arg(long, value_name = "FILE")]
    vocab: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    merges: Option<PathBuf>,
    #[arg(long)]
    mask_rate: Option<f64>,
    /// Mask every subword of a selected word together.
    #[arg(long)]
    whole_word: bool,
    /// Maximum subword positions per example, delimiters included.
    #[arg(long)]
    max_seq_len: Option<usize>,
}

#[derive(Debug, Args, Default)]
struct CopaArgs {
    /// COPA XML file as NAME=PATH (repeatable), e.g. dev=copa-dev.xml.
    #[arg(long = "copa", value_name = "NAME=PATH", value_parser = parse_named)]
    copa: Vec<(String, PathBuf)>,
    /// Easy/hard index applied to the `test` file.
    #[arg(long, value_name = "FILE")]
    easy_hard_index: Option<PathBuf>,
    /// Prefix choices with "It is because " or "As a result, ".
    #[arg(long)]
    prompt: bool,
}

#[derive(Debug, Args, Default)]
struct TcrArgs {
    /// TCR JSONL file as NAME=PATH (repeatable).
    #[arg(long = "tcr", value_name = "NAME=PATH", value_parser = parse_named)]
    tcr: Vec<(String, PathBuf)>,
}

#[derive(Debug, Args, Default)]
struct OverlapArgs {
    #[arg(long, value_name = "FILE")]
    bench_embeddings: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    corpus_embeddings: Option<PathBuf>,
    /// JSONL {id, text} used to print sentences in the report.
    #[arg(long, value_name = "FILE")]
    bench_texts: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    corpus_texts: Option<PathBuf>,
    /// JSON array of benchmark ids to restrict the search to.
    #[arg(long, value_name = "FILE")]
    bench_subset: Option<PathBuf>,
    /// Similarity threshold (repeatable); pairs at or above the smallest are kept.
    #[arg(long = "threshold", value_name = "T")]
    thresholds: Vec<f64>,
    /// Disable the exact norm-bound prefilter.
    #[arg(long)]
    no_prefilter: bool,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Parse knowledge-graph inputs and write normalized records and rejects.
    Ingest(#[command(flatten)] KgArgs),
    /// Filter, verbalize and split the knowledge graphs into a text corpus.
    Verbalize(#[command(flatten)] KgArgs),
    /// Verbalize, then normalize with the rule engine and optional checker.
    Grammar {
        #[command(flatten)]
        kg: KgArgs,
        #[command(flatten)]
        grammar: GrammarArgs,
    },
    /// Build masked-LM datasets from the normalized corpus.
    MlmPrep {
        #[command(flatten)]
        kg: KgArgs,
        #[command(flatten)]
        grammar: GrammarArgs,
        #[command(flatten)]
        mlm: MlmArgs,
    },
    /// Convert COPA-format XML into choice instances.
    ConvertCopa(#[command(flatten)] CopaArgs),
    /// Convert TCR JSONL into marked relation instances.
    ConvertTcr(#[command(flatten)] TcrArgs),
    /// Relation distribution and token-length histogram of the corpus.
    Stats {
        #[command(flatten)]
        kg: KgArgs,
        #[command(flatten)]
        grammar: GrammarArgs,
    },
    /// Benchmark/corpus embedding pairs above a cosine threshold.
    Overlap(#[command(flatten)] OverlapArgs),
    /// Every stage whose inputs are configured.
    All(Box<AllArgs>),
}

#[derive(Debug, Args)]
struct AllArgs {
    #[command(flatten)]
    kg: KgArgs,
    #[command(flatten)]
    grammar: GrammarArgs,
    #[command(flatten)]
    mlm: MlmArgs,
    #[command(flatten)]
    copa: CopaArgs,
    #[command(flatten)]
    tcr: TcrArgs,
    #[command(flatten)]
    overlap: OverlapArgs,
}

fn parse_named(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => {
            Ok((name.to_string(), PathBuf::from(path)))
        }
        _ => Err(format!("expected NAME=PATH, got {s:?}")),
    }
}

impl KgArgs {
    fn apply(self, cfg: &mut PipelineConfig) {
        set(&mut cfg.inputs.atomic_dir, self.atomic_dir);
        set(&mut cfg.inputs.glucose, self.glucose);
        if let Some(splits) = self.splits {
            cfg.atomic_splits = splits;
        }
        cfg.accept_auxiliary_relations |= self.accept_auxiliary_relations;
    }
}

impl GrammarArgs {
    fn apply(self, cfg: &mut PipelineConfig) {
        if let Some(program) = self.checker {
            let mut command = vec![program];
            command.extend(self.checker_args);
            cfg.grammar.checker_command = Some(command);
        }
        cfg.grammar.apply_suggestions |= self.apply_suggestions;
    }
}

impl MlmArgs {
    fn apply(self, cfg: &mut PipelineConfig) {
        set(&mut cfg.inputs.vocab, self.vocab);
        set(&mut cfg.inputs.merges, self.merges);
        if let Some(r) = self.mask_rate {
            cfg.masking.mask_rate = r;
        }
        cfg.masking.whole_word |= self.whole_word;
        if let Some(n) = self.max_seq_len {
            cfg.max_seq_len = n;
        }
    }
}

impl CopaArgs {
    fn apply(self, cfg: &mut PipelineConfig) {
        cfg.inputs.copa.extend(self.copa);
        set(&mut cfg.inputs.easy_hard_index, self.easy_hard_index);
        cfg.prompt |= self.prompt;
    }
}

impl TcrArgs {
    fn apply(self, cfg: &mut PipelineConfig) {
        cfg.inputs.tcr.extend(self.tcr);
    }
}

impl OverlapArgs {
    fn apply(self, cfg: &mut PipelineConfig) {
        set(&mut cfg.inputs.bench_embeddings, self.bench_embeddings);
        set(&mut cfg.inputs.corpus_embeddings, self.corpus_embeddings);
        set(&mut cfg.inputs.bench_texts, self.bench_texts);
        set(&mut cfg.inputs.corpus_texts, self.corpus_texts);
        set(&mut cfg.inputs.bench_subset, self.bench_subset);
        if !self.thresholds.is_empty() {
            cfg.thresholds = self.thresholds;
        }
        if self.no_prefilter {
            cfg.overlap_prefilter = false;
        }
    }
}

fn set<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

fn apply_command(cmd: Cmd, cfg: &mut PipelineConfig) -> Command {
    match cmd {
        Cmd::Ingest(kg) => {
            kg.apply(cfg);
            Command::Ingest
        }
        Cmd::Verbalize(kg) => {
            kg.apply(cfg);
            Command::Verbalize
        }
        Cmd::Grammar { kg, grammar } => {
            kg.apply(cfg);
            grammar.apply(cfg);
            Command::Grammar
        }
        Cmd::MlmPrep { kg, grammar, mlm } => {
            kg.apply(cfg);
            grammar.apply(cfg);
            mlm.apply(cfg);
            Command::MlmPrep
        }
        Cmd::ConvertCopa(copa) => {
            copa.apply(cfg);
            Command::ConvertCopa
        }
        Cmd::ConvertTcr(tcr) => {
            tcr.apply(cfg);
            Command::ConvertTcr
        }
        Cmd::Stats { kg, grammar } => {
            kg.apply(cfg);
            grammar.apply(cfg);
            Command::Stats
        }
        Cmd::Overlap(overlap) => {
            overlap.apply(cfg);
            Command::Overlap
        }
        Cmd::All(args) => {
            let AllArgs { kg, grammar, mlm, copa, tcr, overlap } = *args;
            kg.apply(cfg);
            grammar.apply(cfg);
            mlm.apply(cfg);
            copa.apply(cfg);
            tcr.apply(cfg);
            overlap.apply(cfg);
            Command::All
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let mut cfg = match PipelineConfig::load(cli.global.config.as_deref(), std::env::vars()) {
        Ok(cfg) => cfg,
        Err(e) => return fail(e),
    };
    set(&mut cfg.workers, cli.global.workers);
    set(&mut cfg.out_dir, cli.global.out);
    if let Some(seed) = cli.global.seed {
        cfg.seed = seed;
    }
    let command = apply_command(cli.command, &mut cfg);

    match pipeline::run(command, &cfg) {
        Ok(summary) => {
            for (stage, dir) in summary.stages {
                println!("{}\t{}", stage.name(), dir.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn fail(e: corpusforge::Error) -> ExitCode {
    log::error!("{e}");
    ExitCode::from(e.exit_code() as u8)
}
