//! Stage orchestration: cold start, regular update, reselection, export.
//!
//! Every stage maps sources to per-unit outcomes in parallel, then a single
//! writer folds the outcomes into the store in source order, so results do
//! not depend on thread scheduling.

pub mod manifest;
pub mod route;
pub mod store;

use std::collections::{BTreeSet, HashSet};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rayon::prelude::*;
use tracing::{info, warn};

pub use manifest::{PipelineManifest, RunStatus, Stage};
pub use route::{route, ModelRegistry};
pub use store::{CorpusStore, InsertOutcome};

use crate::corpus::{normalize_text, CorpusEntry};
use crate::error::Error;
use crate::filters::{run_cascade, CascadeDeps, CascadeStatus, FilterConfig, Quarantine};
use crate::lang::{Direction, LanguageTag};
use crate::providers::{translate, translate_n, ProviderError, Translator};
use crate::records::{Candidate, CandidateSet, SourceText};
use crate::reward::{best_of_n, RewardModelParams, Rubric};

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Always returns the same instant; makes stage output reproducible.
#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub DateTime<Utc>);

impl FixedClock {
    pub fn epoch() -> Self {
        FixedClock(Utc.timestamp_opt(0, 0).single().expect("epoch is valid"))
    }
}

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        self.0
    }
}

/// What every stage needs besides its inputs and the store.
#[derive(Clone, Copy)]
pub struct StageContext<'a> {
    pub filters: &'a FilterConfig,
    pub deps: CascadeDeps<'a>,
    pub clock: &'a dyn Clock,
    pub config_hash: &'a str,
}

/// Candidate generation settings for the regular update.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationSettings {
    pub n: usize,
    pub styles: Vec<String>,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        Self {
            n: 3,
            styles: ["neutral", "polite", "casual"].map(String::from).to_vec(),
        }
    }
}

enum Unit {
    Passed(CorpusEntry),
    Failed(crate::corpus::FilterName),
    Quarantined(CorpusEntry, Quarantine),
    GenerationFailed,
}

fn check_sources(sources: &[SourceText]) -> Result<(), Error> {
    for (i, s) in sources.iter().enumerate() {
        if s.targets.contains(&s.lang) {
            return Err(Error::Invalid(format!(
                "source {}: target list contains the source language `{}`",
                i + 1,
                s.lang
            )));
        }
    }
    Ok(())
}

fn languages_of(sources: &[SourceText]) -> BTreeSet<String> {
    sources
        .iter()
        .flat_map(|s| std::iter::once(&s.lang).chain(&s.targets))
        .map(|t| t.code().to_string())
        .collect()
}

fn clean(
    source: &str,
    src: &LanguageTag,
    target: &str,
    tgt: &LanguageTag,
    provider: &str,
    at: DateTime<Utc>,
    ctx: &StageContext<'_>,
) -> Result<Unit, Error> {
    let mut entry = CorpusEntry::new(source, src.clone(), target, tgt.clone(), provider, at)?;
    let outcome = run_cascade(&entry, ctx.filters, &ctx.deps)?;
    entry.set_trail(outcome.trail)?;
    Ok(match outcome.status {
        CascadeStatus::Passed => Unit::Passed(entry),
        CascadeStatus::Failed(f) => Unit::Failed(f),
        CascadeStatus::Quarantined(q) => Unit::Quarantined(entry, q),
    })
}

/// Tallies non-selected outcomes and gathers entries bound for the store.
#[derive(Default)]
struct Fold {
    to_insert: Vec<CorpusEntry>,
    quarantine: Vec<(CorpusEntry, Quarantine)>,
}

impl Fold {
    fn add(&mut self, unit: Unit, manifest: &mut PipelineManifest, generation_is_quarantine: bool) {
        match unit {
            Unit::Passed(e) => self.to_insert.push(e),
            Unit::Failed(f) => *manifest.filter_fails.entry(f).or_insert(0) += 1,
            Unit::Quarantined(e, q) => {
                manifest.quarantined += 1;
                self.quarantine.push((e, q));
            }
            Unit::GenerationFailed if generation_is_quarantine => manifest.quarantined += 1,
            Unit::GenerationFailed => manifest.generation_failures += 1,
        }
    }

    /// Writes to the store and finishes the manifest. On a store error the
    /// manifest is marked failed, written if possible, and the error returned.
    fn commit(
        self,
        mut manifest: PipelineManifest,
        store: &mut CorpusStore,
        retained: &[CandidateSet],
        clock: &dyn Clock,
    ) -> Result<PipelineManifest, Error> {
        let written = store.insert_all(&self.to_insert).and_then(|out| {
            store.quarantine(&self.quarantine)?;
            store.retain_candidates(retained)?;
            Ok(out)
        });
        manifest.finished_at = clock.now();
        manifest.dry_run = store.is_dry_run();
        match written {
            Ok(out) => {
                manifest.selected_count = out.inserted;
                manifest.dedup_skipped = out.duplicates;
                debug_assert!(manifest.balanced(), "{}", manifest.summary());
                store.write_manifest(&manifest)?;
                info!("{}", manifest.summary());
                Ok(manifest)
            }
            Err(e) => {
                manifest.status = RunStatus::Failed;
                manifest.error = Some(e.to_string());
                if let Err(w) = store.write_manifest(&manifest) {
                    warn!(error = %w, "could not write failed manifest");
                }
                Err(e)
            }
        }
    }
}

/// Seed corpus construction: one translation per provider for every
/// (source, target), each cleaned by the cascade; survivors are stored.
///
/// A provider failure quarantines only that translation. Re-running with
/// the same inputs adds nothing: every survivor is a dedup skip.
pub fn cold_start(
    sources: &[SourceText],
    providers: &[&dyn Translator],
    ctx: &StageContext<'_>,
    store: &mut CorpusStore,
) -> Result<PipelineManifest, Error> {
    if providers.is_empty() {
        return Err(Error::Config("cold start needs at least one translate provider".into()));
    }
    check_sources(sources)?;
    ctx.deps.check(&ctx.filters.cascade_order)?;
    let started = ctx.clock.now();
    let mut manifest = PipelineManifest::new(Stage::ColdStart, started, ctx.config_hash);
    manifest.languages = languages_of(sources);

    let units: Vec<Vec<Unit>> = sources
        .par_iter()
        .map(|s| {
            let mut out = Vec::with_capacity(s.targets.len() * providers.len());
            for tgt in &s.targets {
                for provider in providers {
                    let unit = match translate(*provider, &s.text, &s.lang, tgt, None) {
                        Ok(mut texts) => {
                            clean(&s.text, &s.lang, &texts.swap_remove(0), tgt, provider.name(), started, ctx)?
                        }
                        Err(e) => {
                            warn!(provider = provider.name(), src = %s.lang, tgt = %tgt, error = %e, "translation failed; quarantined");
                            Unit::GenerationFailed
                        }
                    };
                    out.push(unit);
                }
            }
            Ok(out)
        })
        .collect::<Result<_, Error>>()?;

    let mut fold = Fold::default();
    for unit in units.into_iter().flatten() {
        manifest.input_count += 1;
        fold.add(unit, &mut manifest, true);
    }
    fold.commit(manifest, store, &[], ctx.clock)
}

/// Asks `producer` for up to `n` candidates spread over `styles`, in style
/// order, dropping in-set duplicates. With no styles the provider's own
/// default is used.
pub fn candidates_for(
    producer: &dyn Translator,
    text: &str,
    src: &LanguageTag,
    tgt: &LanguageTag,
    n: usize,
    styles: &[String],
) -> Result<Vec<String>, ProviderError> {
    let mut raw = Vec::with_capacity(n);
    if styles.is_empty() {
        raw = translate_n(producer, text, src, tgt, None, n)?;
    } else {
        for (i, style) in styles.iter().enumerate() {
            let k = n / styles.len() + usize::from(i < n % styles.len());
            if k == 0 {
                continue;
            }
            let mut got = translate_n(producer, text, src, tgt, Some(style), k)?;
            got.truncate(k);
            raw.extend(got);
        }
    }
    let mut out: Vec<String> = Vec::with_capacity(raw.len());
    for t in raw {
        if !out.contains(&t) {
            out.push(t);
        }
    }
    out.truncate(n);
    Ok(out)
}

/// A (source, target) unit the producer could not serve.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationFailure {
    pub source_index: usize,
    pub target: LanguageTag,
    pub error: ProviderError,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Generated {
    pub sets: Vec<CandidateSet>,
    pub failures: Vec<GenerationFailure>,
}

/// Candidate sets for every (source, target). Failed units are skipped
/// with a warning and reported.
pub fn generate_candidates(
    producer: &dyn Translator,
    sources: &[SourceText],
    n: usize,
    styles: &[String],
) -> Result<Generated, Error> {
    if n == 0 {
        return Err(Error::Invalid("candidate count n must be at least 1".into()));
    }
    check_sources(sources)?;
    let per_source: Vec<Vec<Result<CandidateSet, GenerationFailure>>> = sources
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            s.targets
                .iter()
                .map(|tgt| {
                    candidates_for(producer, &s.text, &s.lang, tgt, n, styles)
                        .map(|texts| CandidateSet {
                            source_text: s.text.clone(),
                            source_lang: s.lang.clone(),
                            target_lang: tgt.clone(),
                            candidates: texts
                                .into_iter()
                                .map(|text| Candidate {
                                    text,
                                    provider: producer.name().to_string(),
                                    score: None,
                                })
                                .collect(),
                        })
                        .map_err(|error| {
                            warn!(source = i + 1, tgt = %tgt, %error, "candidate generation failed; skipping");
                            GenerationFailure {
                                source_index: i,
                                target: tgt.clone(),
                                error,
                            }
                        })
                })
                .collect()
        })
        .collect();
    let mut out = Generated::default();
    for r in per_source.into_iter().flatten() {
        match r {
            Ok(set) => out.sets.push(set),
            Err(f) => out.failures.push(f),
        }
    }
    Ok(out)
}

/// Cascade over one candidate set, then best-of-n among the survivors.
struct Selection {
    chosen: Option<CorpusEntry>,
    others: Vec<Unit>,
    survivors: Option<CandidateSet>,
}

fn select(
    set: &CandidateSet,
    params: &RewardModelParams,
    rubric: &Rubric,
    ctx: &StageContext<'_>,
    at: DateTime<Utc>,
) -> Result<Selection, Error> {
    let mut others = Vec::new();
    let mut passed: Vec<(CorpusEntry, &Candidate)> = Vec::new();
    for c in &set.candidates {
        match clean(&set.source_text, &set.source_lang, &c.text, &set.target_lang, &c.provider, at, ctx)? {
            Unit::Passed(e) => passed.push((e, c)),
            other => others.push(other),
        }
    }
    if passed.is_empty() {
        return Ok(Selection {
            chosen: None,
            others,
            survivors: None,
        });
    }
    let mut survivors = CandidateSet {
        source_text: set.source_text.clone(),
        source_lang: set.source_lang.clone(),
        target_lang: set.target_lang.clone(),
        candidates: passed.iter().map(|(_, c)| (*c).clone()).collect(),
    };
    let (best, scores) = best_of_n(params, &survivors, rubric)?;
    for (c, s) in survivors.candidates.iter_mut().zip(&scores) {
        c.score = Some(*s);
    }
    let mut chosen = None;
    for (i, (entry, _)) in passed.into_iter().enumerate() {
        if i == best {
            chosen = Some(entry);
        } else {
            others.push(Unit::Passed(entry));
        }
    }
    Ok(Selection {
        chosen,
        others,
        survivors: Some(survivors),
    })
}

fn fold_selection(sel: Selection, fold: &mut Fold, manifest: &mut PipelineManifest, retained: &mut Vec<CandidateSet>) {
    for unit in sel.others {
        manifest.input_count += 1;
        match unit {
            Unit::Passed(_) => manifest.not_selected += 1,
            u => fold.add(u, manifest, false),
        }
    }
    match sel.chosen {
        Some(e) => {
            manifest.input_count += 1;
            fold.to_insert.push(e);
        }
        None => manifest.units_without_survivor += 1,
    }
    retained.extend(sel.survivors);
}

/// Generate, clean, select, store. Units are candidates; a (source,
/// target) the producer fails on counts once under generation failures.
pub fn regular_update(
    sources: &[SourceText],
    producer: &dyn Translator,
    params: &RewardModelParams,
    rubric: &Rubric,
    generation: &GenerationSettings,
    ctx: &StageContext<'_>,
    store: &mut CorpusStore,
) -> Result<PipelineManifest, Error> {
    params.require_rubric(rubric)?;
    ctx.deps.check(&ctx.filters.cascade_order)?;
    let started = ctx.clock.now();
    let mut manifest = PipelineManifest::new(Stage::RegularUpdate, started, ctx.config_hash);
    manifest.languages = languages_of(sources);
    manifest.rubric_hash = Some(rubric.hash());

    let generated = generate_candidates(producer, sources, generation.n, &generation.styles)?;
    let selections: Vec<Selection> = generated
        .sets
        .par_iter()
        .map(|set| select(set, params, rubric, ctx, started))
        .collect::<Result<_, Error>>()?;

    let mut fold = Fold::default();
    let mut retained = Vec::new();
    for sel in selections {
        fold_selection(sel, &mut fold, &mut manifest, &mut retained);
    }
    for _ in &generated.failures {
        manifest.input_count += 1;
        manifest.generation_failures += 1;
        manifest.units_without_survivor += 1;
    }
    fold.commit(manifest, store, &retained, ctx.clock)
}

/// Re-runs cleaning and selection over the retained candidate sets, for
/// when only the rubric (and so the reward params) changed.
pub fn reselect(
    params: &RewardModelParams,
    rubric: &Rubric,
    ctx: &StageContext<'_>,
    store: &mut CorpusStore,
) -> Result<PipelineManifest, Error> {
    params.require_rubric(rubric)?;
    ctx.deps.check(&ctx.filters.cascade_order)?;
    let started = ctx.clock.now();
    let mut manifest = PipelineManifest::new(Stage::Reselect, started, ctx.config_hash);
    manifest.rubric_hash = Some(rubric.hash());
    let sets = store.retained_candidates()?;
    for s in &sets {
        manifest.languages.insert(s.source_lang.code().to_string());
        manifest.languages.insert(s.target_lang.code().to_string());
    }
    let selections: Vec<Selection> = sets
        .par_iter()
        .map(|set| select(set, params, rubric, ctx, started))
        .collect::<Result<_, Error>>()?;
    let mut fold = Fold::default();
    let mut ignored = Vec::new();
    for sel in selections {
        fold_selection(sel, &mut fold, &mut manifest, &mut ignored);
    }
    fold.commit(manifest, store, &[], ctx.clock)
}

/// Whether the producer should be retrained: the schedule has elapsed
/// since the last successful run, or a language appears that no
/// successful run has covered.
pub fn retrain_due(
    history: &[PipelineManifest],
    schedule: Duration,
    now: DateTime<Utc>,
    current_languages: &BTreeSet<String>,
) -> Result<bool, Error> {
    if schedule <= Duration::zero() {
        return Err(Error::Config("retrain schedule must be positive".into()));
    }
    let done: Vec<&PipelineManifest> = history
        .iter()
        .filter(|m| m.succeeded() && !m.dry_run)
        .collect();
    let Some(last) = done.iter().map(|m| m.finished_at).max() else {
        return Ok(true);
    };
    let known: BTreeSet<&String> = done.iter().flat_map(|m| &m.languages).collect();
    if current_languages.iter().any(|l| !known.contains(l)) {
        return Ok(true);
    }
    Ok(now - last >= schedule)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExportReport {
    pub written: usize,
    /// Entries dropped because their source text is blocklisted.
    pub blocked: usize,
}

/// Writes the entries of one direction, in store order, to `path`. Entries
/// whose normalized source text is in `blocklist` are left out (held-out
/// test sources, for instance). A direction with no entries yields an
/// empty file.
pub fn export_training_set(
    store: &CorpusStore,
    direction: &Direction,
    path: &Path,
    blocklist: &HashSet<String>,
) -> Result<ExportReport, Error> {
    let entries = store.read_shard(direction)?;
    let mut report = ExportReport::default();
    let tmp = path.with_extension("partial");
    let write = |report: &mut ExportReport| -> std::io::Result<()> {
        let mut out = BufWriter::new(File::create(&tmp)?);
        for e in &entries {
            if blocklist.contains(&normalize_text(e.source_text())) {
                report.blocked += 1;
                continue;
            }
            out.write_all(e.to_line().as_bytes())?;
            out.write_all(b"\n")?;
            report.written += 1;
        }
        out.flush()?;
        drop(out);
        fs::rename(&tmp, path)
    };
    write(&mut report).map_err(|e| Error::io(path, e))?;
    info!(direction = %direction, written = report.written, blocked = report.blocked, "exported");
    Ok(report)
}

/// Normalized source texts, for use as an export blocklist.
pub fn blocklist_from<'a>(texts: impl IntoIterator<Item = &'a str>) -> HashSet<String> {
    texts.into_iter().map(normalize_text).collect()
}
