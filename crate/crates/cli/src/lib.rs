//! The `prefcorpus` command line: one binary, one subcommand per stage.
//!
//! Data goes to standard output (or `--out`), statistics and logs to
//! standard error. Exit codes: 0 success, 1 operational error, 2 usage.

pub mod config;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::ffi::OsString;
use std::fmt::Display;
use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use prefcorpus::corpus::{parse_corpus, CorpusEntry, ParseMode};
use prefcorpus::eval::ablation::{ablation_curve, inversions, AblationConfig};
use prefcorpus::eval::{eval_run, EvalOptions, EvalReport, GoldenCheck, IdentitySystem, Metric, RoutedSystem, TranslationSystem};
use prefcorpus::filters::{run_cascade, CascadeDeps, CascadeStatus, FilterStats};
use prefcorpus::lang::{Direction, LanguageTag};
use prefcorpus::langid::{builtin_samples, split_halves, LanguageDetector, ProfileDetector};
use prefcorpus::pipeline::{
    blocklist_from, cold_start, export_training_set, generate_candidates, regular_update, reselect, retrain_due,
    Clock, CorpusStore, FixedClock, ModelRegistry, StageContext, SystemClock,
};
use prefcorpus::providers::mock::PhraseBook;
use prefcorpus::providers::{Translator, DEFAULT_JUDGE_PROMPT};
use prefcorpus::records::{read_candidate_sets, read_preference_pairs, read_sources, write_records, SourceText, WireSource};
use prefcorpus::reward::{best_of_n, label_pairs, train, RewardModelParams, DEFAULT_MAX_PAIRS_PER_SET};
use prefcorpus::util::read_to_string;
use rayon::prelude::*;
use serde::Serialize;
use tracing::{info, warn};

use crate::config::Loaded;

#[derive(Debug, Parser)]
#[command(name = "prefcorpus", version, about = "Build, clean and evaluate preference-aligned translation corpora")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Seed for every random choice (mock providers, sampling, ablation).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// TOML config file; built-in defaults otherwise.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Compute everything but write nothing to the store or output paths.
    #[arg(long, global = true)]
    pub dry_run: bool,
    /// Worker threads for data-parallel stages.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,
    /// Use a fixed clock so output does not depend on the wall time.
    #[arg(long, global = true)]
    pub no_timestamps: bool,
    /// More logging on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the filter cascade over a corpus file.
    Clean(CleanArgs),
    /// Train or apply the n-gram language detectors.
    #[command(subcommand)]
    Langid(LangidCommand),
    /// Sample source sentences from the built-in phrase book.
    Sources(SourcesArgs),
    /// Generate candidate sets from a sources file.
    Generate(GenerateArgs),
    /// Ask the judge for preference pairs over candidate sets.
    Label(LabelArgs),
    /// Train reward-model params from preference pairs.
    TrainRm(TrainRmArgs),
    /// Best-of-N selection over a candidate-set file.
    Select(SelectArgs),
    /// Corpus store stages.
    #[command(subcommand)]
    Pipeline(PipelineCommand),
    /// Write one direction of the store as a training file.
    Export(ExportArgs),
    /// Evaluate a system on a test set.
    Eval(EvalArgs),
    /// Reward-model accuracy against training-set size on synthetic pairs.
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
pub struct CleanArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Passing entries; stdout otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Failing entries with their filter trail.
    #[arg(long)]
    pub rejects: Option<PathBuf>,
    /// Entries whose checks could not complete.
    #[arg(long)]
    pub quarantine: Option<PathBuf>,
    /// Abort on the first malformed line instead of skipping it.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Subcommand)]
pub enum LangidCommand {
    /// Train two detectors on disjoint halves of the samples.
    Train(LangidTrainArgs),
    /// Label texts with both detectors.
    Detect(LangidDetectArgs),
}

#[derive(Debug, Args)]
pub struct LangidTrainArgs {
    /// Directory of `<code>.txt` files, one sample per line; built-in samples otherwise.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    #[arg(long)]
    pub out_a: PathBuf,
    #[arg(long)]
    pub out_b: PathBuf,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct LangidDetectInput {
    #[arg(long)]
    pub text: Option<String>,
    /// File with one text per line.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LangidDetectArgs {
    #[command(flatten)]
    pub input: LangidDetectInput,
}

#[derive(Debug, Args)]
pub struct SourcesArgs {
    #[arg(long)]
    pub lang: String,
    #[arg(long, value_delimiter = ',', required = true)]
    pub targets: Vec<String>,
    #[arg(long, default_value_t = 20)]
    pub count: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub sources: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Candidates per (source, target); the config value otherwise.
    #[arg(short = 'n', long)]
    pub candidates: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub styles: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_PAIRS_PER_SET)]
    pub max_pairs: usize,
}

#[derive(Debug, Args)]
pub struct TrainRmArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum PipelineCommand {
    /// Translate sources with every cold-start provider, clean, store.
    ColdStart {
        #[arg(long)]
        sources: PathBuf,
    },
    /// Generate candidates, clean, select the best, store.
    Update {
        #[arg(long)]
        sources: PathBuf,
        #[arg(long)]
        params: PathBuf,
    },
    /// Re-clean and re-select the retained candidate sets.
    Reselect {
        #[arg(long)]
        params: PathBuf,
    },
    /// Print whether the producer is due for retraining.
    RetrainDue {
        /// Languages of the coming run.
        #[arg(long, value_delimiter = ',')]
        languages: Vec<String>,
    },
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub direction: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Corpus files whose source texts must not be exported.
    #[arg(long)]
    pub blocklist: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub testset: PathBuf,
    /// `identity` or the name of a translate provider.
    #[arg(long, default_value = "identity")]
    pub system: String,
    #[arg(long, value_delimiter = ',', default_value = "chrf")]
    pub metrics: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Stored JSON report to compare against.
    #[arg(long)]
    pub golden: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long, value_delimiter = ',', default_value = "50,200,1000,5000")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub trials: usize,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 1000)]
    pub heldout: usize,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// An operational failure, tagged with the stage that hit it.
#[derive(Debug)]
pub struct CliError {
    pub stage: String,
    pub message: String,
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.stage, self.message)
    }
}

trait At<T> {
    fn at(self, stage: &str) -> Result<T, CliError>;
}

impl<T, E: Display> At<T> for Result<T, E> {
    fn at(self, stage: &str) -> Result<T, CliError> {
        self.map_err(|e| CliError {
            stage: stage.to_string(),
            message: e.to_string(),
        })
    }
}

fn located<E: Display>(path: &Path) -> impl FnOnce(E) -> String + '_ {
    move |e| format!("{}: {e}", path.display())
}

struct Ctx {
    global: GlobalArgs,
}

impl Ctx {
    fn load(&self) -> Result<Loaded, CliError> {
        Loaded::load(self.global.config.as_deref()).at("config")
    }

    fn clock(&self) -> Box<dyn Clock> {
        if self.global.no_timestamps {
            Box::new(FixedClock::epoch())
        } else {
            Box::new(SystemClock)
        }
    }

    /// Data output: stdout without a path, nothing at all on a dry run.
    fn emit(&self, stage: &str, path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
        match path {
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(bytes).and_then(|()| out.flush()).at(stage)
            }
            Some(p) if self.global.dry_run => {
                info!(path = %p.display(), bytes = bytes.len(), "dry run: not written");
                Ok(())
            }
            Some(p) => write_atomic(p, bytes).map_err(located(p)).at(stage),
        }
    }

    fn open_store(&self, loaded: &Loaded) -> Result<CorpusStore, CliError> {
        let root = loaded.store_root();
        if self.global.dry_run {
            CorpusStore::open_dry_run(root, &loaded.registry).at("store")
        } else {
            CorpusStore::open(root, &loaded.registry).at("store")
        }
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

fn open(path: &Path) -> Result<BufReader<File>, String> {
    File::open(path).map(BufReader::new).map_err(located(path))
}

fn jsonl<T: Serialize>(records: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut buf = Vec::new();
    write_records(&mut buf, records).expect("writing to memory");
    buf
}

fn stats<T: Serialize>(stage: &str, value: &T) {
    let body = serde_json::to_value(value).expect("stats serialize");
    eprintln!("{stage}: {body}");
}

/// Parses argv and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_logging(&cli.global);
    if let Some(jobs) = cli.global.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.into()).build_global() {
            warn!(error = %e, "worker pool already initialized");
        }
    }
    let ctx = Ctx { global: cli.global };
    match dispatch(&ctx, cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn init_logging(global: &GlobalArgs) {
    let level = match global.verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        _ => tracing::Level::DEBUG,
    };
    let builder = tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .with_target(false);
    let _ = if global.no_timestamps {
        builder.without_time().try_init()
    } else {
        builder.try_init()
    };
}

fn dispatch(ctx: &Ctx, command: Command) -> Result<(), CliError> {
    match command {
        Command::Clean(a) => clean(ctx, &a),
        Command::Langid(LangidCommand::Train(a)) => langid_train(ctx, &a),
        Command::Langid(LangidCommand::Detect(a)) => langid_detect(ctx, &a),
        Command::Sources(a) => sources(ctx, &a),
        Command::Generate(a) => generate(ctx, &a),
        Command::Label(a) => label(ctx, &a),
        Command::TrainRm(a) => train_rm(ctx, &a),
        Command::Select(a) => select(ctx, &a),
        Command::Pipeline(p) => pipeline(ctx, p),
        Command::Export(a) => export(ctx, &a),
        Command::Eval(a) => eval(ctx, &a),
        Command::Ablate(a) => ablate(ctx, &a),
    }
}

#[derive(Serialize)]
struct CleanStats {
    #[serde(flatten)]
    stats: FilterStats,
    malformed: usize,
    balanced: bool,
}

fn clean(ctx: &Ctx, a: &CleanArgs) -> Result<(), CliError> {
    const STAGE: &str = "clean";
    let loaded = ctx.load()?;
    let filters = loaded.filter_config().at("config")?;
    let (da, db) = loaded.detectors().at("langid")?;
    let pivot = loaded.pivot(Some(ctx.global.seed)).at("config")?;
    let embedder = loaded.embedder().at("config")?;
    let deps = CascadeDeps::new(&loaded.registry)
        .with_detectors(&*da, &*db)
        .with_pivot(&*pivot)
        .with_embedder(&*embedder);
    let mode = if a.strict { ParseMode::Strict } else { ParseMode::Lenient };
    let parsed = parse_corpus(open(&a.input).at(STAGE)?, &loaded.registry, mode)
        .map_err(located(&a.input))
        .at(STAGE)?;
    for e in &parsed.errors {
        warn!("{}: {e}", a.input.display());
    }
    let outcomes = parsed
        .entries
        .par_iter()
        .map(|e| run_cascade(e, &filters, &deps))
        .collect::<Result<Vec<_>, _>>()
        .at(STAGE)?;

    let mut summary = FilterStats::default();
    let (mut passed, mut failed, mut quarantined) = (Vec::new(), Vec::new(), Vec::new());
    for (entry, outcome) in parsed.entries.into_iter().zip(outcomes) {
        summary.record(&outcome);
        let status = outcome.status.clone();
        let mut entry: CorpusEntry = entry.with_trail(outcome.trail).at(STAGE)?;
        match status {
            CascadeStatus::Passed => passed.push(entry),
            CascadeStatus::Failed(_) => failed.push(entry),
            CascadeStatus::Quarantined(q) => {
                entry.set_extra("quarantine_filter", q.filter.as_str().into()).at(STAGE)?;
                entry.set_extra("quarantine_reason", q.reason.into()).at(STAGE)?;
                quarantined.push(entry);
            }
        }
    }
    let lines = |v: &[CorpusEntry]| v.iter().flat_map(|e| [e.to_line(), "\n".into()]).collect::<String>();
    ctx.emit(STAGE, a.out.as_deref(), lines(&passed).as_bytes())?;
    if let Some(p) = &a.rejects {
        ctx.emit(STAGE, Some(p), lines(&failed).as_bytes())?;
    }
    if let Some(p) = &a.quarantine {
        ctx.emit(STAGE, Some(p), lines(&quarantined).as_bytes())?;
    }
    let balanced = summary.balanced();
    stats(
        STAGE,
        &CleanStats {
            stats: summary,
            malformed: parsed.errors.len(),
            balanced,
        },
    );
    Ok(())
}

fn langid_train(ctx: &Ctx, a: &LangidTrainArgs) -> Result<(), CliError> {
    const STAGE: &str = "langid train";
    let loaded = ctx.load()?;
    let samples = match &a.samples {
        None => builtin_samples(&loaded.registry),
        Some(dir) => {
            let mut out = BTreeMap::new();
            let listing = fs::read_dir(dir).map_err(located(dir)).at(STAGE)?;
            for item in listing {
                let path = item.map_err(located(dir)).at(STAGE)?.path();
                if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                    continue;
                }
                let code = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
                let tag = loaded.registry.tag(code).map_err(located(&path)).at(STAGE)?;
                let text = read_to_string(&path).at(STAGE)?;
                let lines: Vec<String> = text.lines().filter(|l| !l.trim().is_empty()).map(str::to_string).collect();
                out.insert(tag, lines);
            }
            out
        }
    };
    let (ha, hb) = split_halves(&samples);
    let da = ProfileDetector::train("profile-a", &ha).at(STAGE)?;
    let db = ProfileDetector::train("profile-b", &hb).at(STAGE)?;
    ctx.emit(STAGE, Some(&a.out_a), da.to_json().as_bytes())?;
    ctx.emit(STAGE, Some(&a.out_b), db.to_json().as_bytes())?;
    let counts: BTreeMap<&str, usize> = samples.iter().map(|(k, v)| (k.code(), v.len())).collect();
    stats(STAGE, &counts);
    Ok(())
}

#[derive(Serialize)]
struct Detection<'a> {
    text: &'a str,
    a: String,
    b: String,
}

fn langid_detect(ctx: &Ctx, a: &LangidDetectArgs) -> Result<(), CliError> {
    const STAGE: &str = "langid detect";
    let loaded = ctx.load()?;
    let (da, db) = loaded.detectors().at("langid")?;
    let texts: Vec<String> = match (&a.input.text, &a.input.input) {
        (Some(t), _) => vec![t.clone()],
        (None, Some(p)) => read_to_string(p)
            .at(STAGE)?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(str::to_string)
            .collect(),
        (None, None) => unreachable!("clap requires one input"),
    };
    let mut rows = Vec::with_capacity(texts.len());
    for (i, t) in texts.iter().enumerate() {
        let where_ = |e: prefcorpus::Error| format!("text {}: {e}", i + 1);
        rows.push(Detection {
            text: t,
            a: da.top1(t).map_err(where_).at(STAGE)?.code().to_string(),
            b: db.top1(t).map_err(where_).at(STAGE)?.code().to_string(),
        });
    }
    ctx.emit(STAGE, None, &jsonl(&rows))
}

fn sources(ctx: &Ctx, a: &SourcesArgs) -> Result<(), CliError> {
    const STAGE: &str = "sources";
    let loaded = ctx.load()?;
    let lang = loaded.registry.tag(&a.lang).at(STAGE)?;
    let targets: Vec<LanguageTag> = a.targets.iter().map(|t| loaded.registry.tag(t)).collect::<Result<_, _>>().at(STAGE)?;
    let codes: Vec<&str> = targets.iter().map(LanguageTag::code).collect();
    let book = PhraseBook::builtin();
    if book.sentences_covering(lang.code(), &codes).is_empty() {
        return Err(CliError {
            stage: STAGE.into(),
            message: format!("phrase book has no sentence covering {} -> {}", lang, codes.join(",")),
        });
    }
    let texts = book.sample_sources(lang.code(), &codes, a.count, ctx.global.seed);
    let rows = texts.into_iter().map(|text| WireSource {
        text,
        lang: lang.code().to_string(),
        targets: codes.iter().map(|c| c.to_string()).collect(),
    });
    ctx.emit(STAGE, a.out.as_deref(), &jsonl(rows))
}

/// Reads sources, giving those without targets the configured defaults.
fn load_sources(loaded: &Loaded, path: &Path, stage: &str) -> Result<Vec<SourceText>, CliError> {
    let mut list = read_sources(open(path).at(stage)?, &loaded.registry)
        .map_err(located(path))
        .at(stage)?;
    let defaults = loaded.default_targets().at("config")?;
    for (i, s) in list.iter_mut().enumerate() {
        if s.targets.is_empty() {
            s.targets = defaults.iter().filter(|t| **t != s.lang).cloned().collect();
        }
        if s.targets.is_empty() {
            return Err(CliError {
                stage: stage.into(),
                message: format!("{}: record {}: no targets and pipeline.targets is empty", path.display(), i + 1),
            });
        }
    }
    Ok(list)
}

fn generate(ctx: &Ctx, a: &GenerateArgs) -> Result<(), CliError> {
    const STAGE: &str = "generate";
    let loaded = ctx.load()?;
    let list = load_sources(&loaded, &a.sources, STAGE)?;
    let producer = loaded.producer(Some(ctx.global.seed)).at("config")?;
    let mut settings = loaded.generation();
    if let Some(n) = a.candidates {
        settings.n = n;
    }
    if let Some(s) = &a.styles {
        settings.styles = s.clone();
    }
    let generated = generate_candidates(&*producer, &list, settings.n, &settings.styles).at(STAGE)?;
    for f in &generated.failures {
        warn!("{}: source {} -> {}: {}", a.sources.display(), f.source_index + 1, f.target, f.error);
    }
    ctx.emit(STAGE, a.out.as_deref(), &jsonl(generated.sets.iter().map(|s| s.to_wire())))?;
    stats(
        STAGE,
        &serde_json::json!({"sets": generated.sets.len(), "failures": generated.failures.len()}),
    );
    Ok(())
}

fn label(ctx: &Ctx, a: &LabelArgs) -> Result<(), CliError> {
    const STAGE: &str = "label";
    let loaded = ctx.load()?;
    let sets = read_candidate_sets(open(&a.input).at(STAGE)?, &loaded.registry)
        .map_err(located(&a.input))
        .at(STAGE)?;
    let judge = loaded.judge().at("config")?;
    let outcome = label_pairs(&*judge, &sets, DEFAULT_JUDGE_PROMPT, a.max_pairs);
    ctx.emit(STAGE, a.out.as_deref(), &jsonl(outcome.pairs.iter().map(|p| p.to_wire())))?;
    stats(
        STAGE,
        &serde_json::json!({"sets": sets.len(), "pairs": outcome.pairs.len(), "skipped_sets": outcome.skipped_sets}),
    );
    Ok(())
}

fn train_rm(ctx: &Ctx, a: &TrainRmArgs) -> Result<(), CliError> {
    const STAGE: &str = "train-rm";
    let loaded = ctx.load()?;
    let pairs = read_preference_pairs(open(&a.pairs).at(STAGE)?, &loaded.registry)
        .map_err(located(&a.pairs))
        .at(STAGE)?;
    let lr = a.lr.unwrap_or(loaded.config.reward.lr);
    let epochs = a.epochs.unwrap_or(loaded.config.reward.epochs);
    let params = train(&pairs, &loaded.rubric, lr, epochs, ctx.global.seed).at(STAGE)?;
    let mut body = params.to_json();
    body.push('\n');
    ctx.emit(STAGE, a.out.as_deref(), body.as_bytes())?;
    stats(
        STAGE,
        &serde_json::json!({"pairs": pairs.len(), "epochs": epochs, "final_loss": params.training_meta.final_loss}),
    );
    Ok(())
}

fn load_params(loaded: &Loaded, path: &Path, stage: &str) -> Result<RewardModelParams, CliError> {
    let params = RewardModelParams::from_json(&read_to_string(path).at(stage)?)
        .map_err(located(path))
        .at(stage)?;
    params.require_rubric(&loaded.rubric).map_err(located(path)).at(stage)?;
    Ok(params)
}

#[derive(Serialize)]
struct Selected<'a> {
    src_text: &'a str,
    src_lang: &'a str,
    tgt_lang: &'a str,
    index: usize,
    text: &'a str,
    score: f64,
}

fn select(ctx: &Ctx, a: &SelectArgs) -> Result<(), CliError> {
    const STAGE: &str = "select";
    let loaded = ctx.load()?;
    let params = load_params(&loaded, &a.params, STAGE)?;
    let sets = read_candidate_sets(open(&a.input).at(STAGE)?, &loaded.registry)
        .map_err(located(&a.input))
        .at(STAGE)?;
    let picks = sets
        .par_iter()
        .enumerate()
        .map(|(i, s)| best_of_n(&params, s, &loaded.rubric).map_err(|e| format!("{}: record {}: {e}", a.input.display(), i + 1)))
        .collect::<Result<Vec<_>, _>>()
        .at(STAGE)?;
    let rows = sets.iter().zip(&picks).map(|(s, (i, scores))| Selected {
        src_text: &s.source_text,
        src_lang: s.source_lang.code(),
        tgt_lang: s.target_lang.code(),
        index: *i,
        text: &s.candidates[*i].text,
        score: scores[*i],
    });
    ctx.emit(STAGE, a.out.as_deref(), &jsonl(rows))
}

fn pipeline(ctx: &Ctx, command: PipelineCommand) -> Result<(), CliError> {
    let loaded = ctx.load()?;
    if let PipelineCommand::RetrainDue { languages } = &command {
        const STAGE: &str = "pipeline retrain-due";
        let store = ctx.open_store(&loaded)?;
        let history = store.manifests().at(STAGE)?;
        let current: BTreeSet<String> = languages
            .iter()
            .map(|l| loaded.registry.tag(l).map(|t| t.code().to_string()))
            .collect::<Result<_, _>>()
            .at(STAGE)?;
        let schedule = chrono::Duration::days(loaded.config.pipeline.schedule_days.into());
        let due = retrain_due(&history, schedule, ctx.clock().now(), &current).at(STAGE)?;
        println!("{due}");
        return Ok(());
    }
    let filters = loaded.filter_config().at("config")?;
    let (da, db) = loaded.detectors().at("langid")?;
    let seed = Some(ctx.global.seed);
    let pivot = loaded.pivot(seed).at("config")?;
    let embedder = loaded.embedder().at("config")?;
    let deps = CascadeDeps::new(&loaded.registry)
        .with_detectors(&*da, &*db)
        .with_pivot(&*pivot)
        .with_embedder(&*embedder);
    let clock = ctx.clock();
    let stage_ctx = StageContext {
        filters: &filters,
        deps,
        clock: &*clock,
        config_hash: &loaded.hash,
    };
    let mut store = ctx.open_store(&loaded)?;
    let (stage, result) = match command {
        PipelineCommand::ColdStart { sources } => {
            const STAGE: &str = "pipeline cold-start";
            let list = load_sources(&loaded, &sources, STAGE)?;
            let providers: Vec<_> = loaded
                .config
                .pipeline
                .cold_start
                .iter()
                .map(|n| loaded.translator(n, seed))
                .collect::<Result<_, _>>()
                .at("config")?;
            let refs: Vec<&dyn Translator> = providers.iter().map(|p| &**p).collect();
            (STAGE, cold_start(&list, &refs, &stage_ctx, &mut store))
        }
        PipelineCommand::Update { sources, params } => {
            const STAGE: &str = "pipeline update";
            let list = load_sources(&loaded, &sources, STAGE)?;
            let params = load_params(&loaded, &params, STAGE)?;
            let producer = loaded.producer(seed).at("config")?;
            let settings = loaded.generation();
            (
                STAGE,
                regular_update(&list, &*producer, &params, &loaded.rubric, &settings, &stage_ctx, &mut store),
            )
        }
        PipelineCommand::Reselect { params } => {
            const STAGE: &str = "pipeline reselect";
            let params = load_params(&loaded, &params, STAGE)?;
            (STAGE, reselect(&params, &loaded.rubric, &stage_ctx, &mut store))
        }
        PipelineCommand::RetrainDue { .. } => unreachable!("handled above"),
    };
    let manifest = result.at(stage)?;
    eprintln!("{stage}: {}", manifest.summary());
    println!("{}", manifest.to_json());
    Ok(())
}

fn export(ctx: &Ctx, a: &ExportArgs) -> Result<(), CliError> {
    const STAGE: &str = "export";
    let loaded = ctx.load()?;
    let direction = Direction::parse(&a.direction, &loaded.registry).at(STAGE)?;
    let mut blocked_texts = Vec::new();
    for p in &a.blocklist {
        let parsed = parse_corpus(open(p).at(STAGE)?, &loaded.registry, ParseMode::Strict)
            .map_err(located(p))
            .at(STAGE)?;
        blocked_texts.extend(parsed.entries.into_iter().map(|e| e.source_text().to_string()));
    }
    let blocklist: HashSet<String> = blocklist_from(blocked_texts.iter().map(String::as_str));
    let store = ctx.open_store(&loaded)?;
    let report = if ctx.global.dry_run {
        let entries = store.read_shard(&direction).at(STAGE)?;
        let blocked = entries
            .iter()
            .filter(|e| blocklist.contains(&prefcorpus::corpus::normalize_text(e.source_text())))
            .count();
        prefcorpus::pipeline::ExportReport {
            written: entries.len() - blocked,
            blocked,
        }
    } else {
        export_training_set(&store, &direction, &a.out, &blocklist).at(STAGE)?
    };
    stats(STAGE, &serde_json::json!({"direction": direction.to_string(), "written": report.written, "blocked": report.blocked}));
    Ok(())
}

fn eval(ctx: &Ctx, a: &EvalArgs) -> Result<(), CliError> {
    const STAGE: &str = "eval";
    let loaded = ctx.load()?;
    let metrics: Vec<Metric> = a.metrics.iter().map(|m| m.parse()).collect::<Result<_, _>>().at(STAGE)?;
    let scorer = loaded.scorer().at("config")?;
    let translator;
    let system: Box<dyn TranslationSystem + '_> = if a.system == "identity" {
        Box::new(IdentitySystem)
    } else {
        translator = loaded.translator(&a.system, Some(ctx.global.seed)).at("config")?;
        let mut models = loaded.models().at("config")?;
        if models.is_empty() {
            models = every_direction(&loaded);
        }
        Box::new(RoutedSystem::new(a.system.clone(), models, &*translator, loaded.registry.english()))
    };
    let options = EvalOptions {
        metrics: &metrics,
        rubric: Some(&loaded.rubric),
        scorer: scorer.as_deref(),
        config_hash: &loaded.hash,
    };
    let report = eval_run(&a.testset, &*system, &loaded.registry, &options).at(STAGE)?;
    let body = match a.format {
        Format::Table => report.to_table(),
        Format::Json => report.to_json() + "\n",
    };
    ctx.emit(STAGE, a.out.as_deref(), body.as_bytes())?;
    if let Some(g) = &a.golden {
        let golden = EvalReport::from_json(&read_to_string(g).at(STAGE)?).map_err(located(g)).at(STAGE)?;
        let fail = |message: String| {
            Err(CliError {
                stage: STAGE.into(),
                message: format!("{}: {message}", g.display()),
            })
        };
        match report.check_golden(&golden, a.tolerance) {
            GoldenCheck::Match => eprintln!("{STAGE}: matches golden {}", g.display()),
            GoldenCheck::Differs(msg) => return fail(format!("differs from golden: {msg}")),
            GoldenCheck::Invalidated { golden, current } => {
                return fail(format!("golden was produced under config {golden}, current config is {current}"))
            }
        }
    }
    Ok(())
}

fn every_direction(loaded: &Loaded) -> ModelRegistry {
    let tags = loaded.registry.tags();
    ModelRegistry::from_directions(
        tags.iter()
            .flat_map(|s| tags.iter().filter_map(move |t| Direction::new(s.clone(), t.clone()).ok())),
    )
}

fn ablate(ctx: &Ctx, a: &AblateArgs) -> Result<(), CliError> {
    const STAGE: &str = "ablate";
    ctx.load()?;
    let mut cfg = AblationConfig {
        trials: a.trials,
        heldout: a.heldout,
        seed: ctx.global.seed,
        ..AblationConfig::default()
    };
    cfg.generator.noise = a.noise;
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(lr) = a.lr {
        cfg.lr = lr;
    }
    let curve = ablation_curve(&a.sizes, &cfg).at(STAGE)?;
    ctx.emit(STAGE, a.out.as_deref(), &jsonl(&curve))?;
    stats(STAGE, &serde_json::json!({"points": curve.len(), "inversions": inversions(&curve)}));
    Ok(())
}
