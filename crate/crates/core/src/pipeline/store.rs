//! Append-only corpus store.
//!
//! Layout under the root directory:
//!
//! ```text
//! <src>-<tgt>.jsonl         one shard per direction
//! index                     one entry id per line
//! manifests/<ts>.json       one manifest per stage run
//! quarantine.jsonl          entries whose validation could not finish
//! candidates.jsonl          surviving candidate sets kept for reselection
//! ```
//!
//! Shards are only ever appended to. The index is derived data: on open it
//! is checked against the shards and rebuilt when missing or stale.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use tracing::{info, warn};

use super::manifest::PipelineManifest;
use crate::corpus::{parse_corpus, CorpusEntry, ParseMode};
use crate::error::Error;
use crate::filters::Quarantine;
use crate::lang::{Direction, LanguageRegistry};
use crate::records::{read_candidate_sets, write_records, CandidateSet};

pub const INDEX_FILE: &str = "index";
pub const QUARANTINE_FILE: &str = "quarantine.jsonl";
pub const CANDIDATES_FILE: &str = "candidates.jsonl";
pub const MANIFEST_DIR: &str = "manifests";
const SHARD_EXT: &str = "jsonl";

/// Result of a batch insert.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InsertOutcome {
    pub inserted: usize,
    pub duplicates: usize,
}

#[derive(Debug)]
pub struct CorpusStore {
    root: PathBuf,
    registry: LanguageRegistry,
    ids: HashSet<String>,
    counts: BTreeMap<Direction, usize>,
    dry_run: bool,
}

fn shard_direction(path: &Path, registry: &LanguageRegistry) -> Option<Direction> {
    if path.extension()?.to_str()? != SHARD_EXT {
        return None;
    }
    let stem = path.file_stem()?.to_str()?;
    if stem == "quarantine" || stem == "candidates" {
        return None;
    }
    Direction::parse(stem, registry).ok()
}

impl CorpusStore {
    /// Opens (creating if needed) the store at `root`.
    pub fn open(root: impl Into<PathBuf>, registry: &LanguageRegistry) -> Result<Self, Error> {
        let root = root.into();
        fs::create_dir_all(root.join(MANIFEST_DIR)).map_err(|e| Error::io(&root, e))?;
        let mut store = Self::load(root, registry, false)?;
        store.check_index()?;
        Ok(store)
    }

    /// Opens the store read-only: nothing under `root` is ever written,
    /// and inserts only update the in-memory view.
    pub fn open_dry_run(root: impl Into<PathBuf>, registry: &LanguageRegistry) -> Result<Self, Error> {
        Self::load(root.into(), registry, true)
    }

    fn load(root: PathBuf, registry: &LanguageRegistry, dry_run: bool) -> Result<Self, Error> {
        let mut store = Self {
            root,
            registry: registry.clone(),
            ids: HashSet::new(),
            counts: BTreeMap::new(),
            dry_run,
        };
        for direction in store.shard_directions()? {
            let entries = store.read_shard(&direction)?;
            store.counts.insert(direction.clone(), entries.len());
            for entry in entries {
                if !store.ids.insert(entry.id().to_string()) {
                    return Err(Error::Invalid(format!(
                        "{}: entry {} appears more than once",
                        store.shard_path(&direction).display(),
                        entry.id()
                    )));
                }
            }
        }
        Ok(store)
    }

    fn check_index(&mut self) -> Result<(), Error> {
        let path = self.root.join(INDEX_FILE);
        let listed: Option<HashSet<String>> = match File::open(&path) {
            Ok(f) => Some(
                BufReader::new(f)
                    .lines()
                    .map(|l| l.map(|l| l.trim().to_string()))
                    .filter(|l| !matches!(l, Ok(s) if s.is_empty()))
                    .collect::<Result<_, _>>()
                    .map_err(|e| Error::io(&path, e))?,
            ),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(Error::io(&path, e)),
        };
        if listed.as_ref() != Some(&self.ids) {
            if listed.is_some() {
                warn!(path = %path.display(), "index does not match shards; rebuilding");
            }
            self.rebuild_index()?;
        }
        Ok(())
    }

    /// Rewrites the index from the ids currently held in the shards.
    pub fn rebuild_index(&mut self) -> Result<(), Error> {
        if self.dry_run {
            return Ok(());
        }
        let path = self.root.join(INDEX_FILE);
        let tmp = self.root.join(format!("{INDEX_FILE}.tmp"));
        let mut ids: Vec<&String> = self.ids.iter().collect();
        ids.sort();
        let write = || -> std::io::Result<()> {
            let mut out = BufWriter::new(File::create(&tmp)?);
            for id in ids {
                writeln!(out, "{id}")?;
            }
            out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
            fs::rename(&tmp, &path)
        };
        write().map_err(|e| Error::io(&path, e))?;
        info!(entries = self.ids.len(), "index rebuilt");
        Ok(())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn is_dry_run(&self) -> bool {
        self.dry_run
    }

    pub fn registry(&self) -> &LanguageRegistry {
        &self.registry
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.ids.contains(id)
    }

    pub fn ids(&self) -> &HashSet<String> {
        &self.ids
    }

    /// Directions with at least one stored entry and their sizes.
    pub fn direction_counts(&self) -> &BTreeMap<Direction, usize> {
        &self.counts
    }

    pub fn shard_path(&self, direction: &Direction) -> PathBuf {
        self.root.join(format!("{direction}.{SHARD_EXT}"))
    }

    fn shard_directions(&self) -> Result<Vec<Direction>, Error> {
        let dir = match fs::read_dir(&self.root) {
            Ok(d) => d,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound && self.dry_run => return Ok(Vec::new()),
            Err(e) => return Err(Error::io(&self.root, e)),
        };
        let mut out = Vec::new();
        for item in dir {
            let item = item.map_err(|e| Error::io(&self.root, e))?;
            if let Some(d) = shard_direction(&item.path(), &self.registry) {
                out.push(d);
            }
        }
        out.sort();
        Ok(out)
    }

    /// Entries of one direction in insertion order; empty when no shard exists.
    pub fn read_shard(&self, direction: &Direction) -> Result<Vec<CorpusEntry>, Error> {
        let path = self.shard_path(direction);
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(Error::io(&path, e)),
        };
        let parsed = parse_corpus(BufReader::new(file), &self.registry, ParseMode::Strict)
            .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
        Ok(parsed.entries)
    }

    /// Appends entries not yet present. Order is preserved; later copies of
    /// an id (already stored or earlier in `entries`) are skipped.
    pub fn insert_all(&mut self, entries: &[CorpusEntry]) -> Result<InsertOutcome, Error> {
        let mut outcome = InsertOutcome::default();
        let mut fresh: BTreeMap<Direction, Vec<&CorpusEntry>> = BTreeMap::new();
        for entry in entries {
            if self.ids.insert(entry.id().to_string()) {
                let d = Direction::new(entry.source_lang().clone(), entry.target_lang().clone())?;
                fresh.entry(d).or_default().push(entry);
                outcome.inserted += 1;
            } else {
                outcome.duplicates += 1;
            }
        }
        for (direction, batch) in &fresh {
            *self.counts.entry(direction.clone()).or_insert(0) += batch.len();
        }
        if self.dry_run || fresh.is_empty() {
            return Ok(outcome);
        }
        for (direction, batch) in &fresh {
            let path = self.shard_path(direction);
            append_lines(&path, batch.iter().map(|e| e.to_line()))?;
        }
        let path = self.root.join(INDEX_FILE);
        append_lines(
            &path,
            fresh.values().flatten().map(|e| e.id().to_string()),
        )?;
        Ok(outcome)
    }

    /// Records entries whose cascade could not complete.
    pub fn quarantine(&mut self, entries: &[(CorpusEntry, Quarantine)]) -> Result<(), Error> {
        if self.dry_run || entries.is_empty() {
            return Ok(());
        }
        let mut lines = Vec::with_capacity(entries.len());
        for (entry, q) in entries {
            let mut e = entry.clone();
            e.set_extra("quarantine_filter", q.filter.as_str().into())?;
            e.set_extra("quarantine_reason", q.reason.clone().into())?;
            lines.push(e.to_line());
        }
        append_lines(&self.root.join(QUARANTINE_FILE), lines.into_iter())
    }

    pub fn read_quarantine(&self) -> Result<Vec<CorpusEntry>, Error> {
        let path = self.root.join(QUARANTINE_FILE);
        match File::open(&path) {
            Ok(f) => Ok(parse_corpus(BufReader::new(f), &self.registry, ParseMode::Strict)
                .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?
                .entries),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(Error::io(&path, e)),
        }
    }

    /// Keeps candidate sets so selection can be re-run under a new rubric.
    pub fn retain_candidates(&mut self, sets: &[CandidateSet]) -> Result<(), Error> {
        if self.dry_run || sets.is_empty() {
            return Ok(());
        }
        let path = self.root.join(CANDIDATES_FILE);
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        write_records(&mut out, sets.iter().map(CandidateSet::to_wire))
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(&path, e))
    }

    pub fn retained_candidates(&self) -> Result<Vec<CandidateSet>, Error> {
        let path = self.root.join(CANDIDATES_FILE);
        match File::open(&path) {
            Ok(f) => read_candidate_sets(BufReader::new(f), &self.registry)
                .map_err(|e| Error::Invalid(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(Error::io(&path, e)),
        }
    }

    /// Writes a manifest under `manifests/`, named by its finish time.
    /// Returns `None` in dry-run mode.
    pub fn write_manifest(&self, manifest: &PipelineManifest) -> Result<Option<PathBuf>, Error> {
        if self.dry_run {
            return Ok(None);
        }
        let dir = self.root.join(MANIFEST_DIR);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let stamp = manifest.finished_at.format("%Y%m%dT%H%M%S%.3fZ").to_string();
        let mut path = dir.join(format!("{stamp}.json"));
        let mut n = 1;
        while path.exists() {
            path = dir.join(format!("{stamp}-{n}.json"));
            n += 1;
        }
        fs::write(&path, manifest.to_json() + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(Some(path))
    }

    /// All manifests, ordered by file name (finish time).
    pub fn manifests(&self) -> Result<Vec<PipelineManifest>, Error> {
        let dir = self.root.join(MANIFEST_DIR);
        let mut paths: Vec<PathBuf> = match fs::read_dir(&dir) {
            Ok(d) => d
                .map(|e| e.map(|e| e.path()))
                .collect::<Result<_, _>>()
                .map_err(|e| Error::io(&dir, e))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(Error::io(&dir, e)),
        };
        paths.retain(|p| p.extension().is_some_and(|x| x == "json"));
        paths.sort();
        paths
            .iter()
            .map(|p| {
                let text = crate::util::read_to_string(p)?;
                PipelineManifest::from_json(&text)
                    .map_err(|e| Error::Invalid(format!("{}: {e}", p.display())))
            })
            .collect()
    }
}

fn append_lines(path: &Path, lines: impl Iterator<Item = String>) -> Result<(), Error> {
    let write = || -> std::io::Result<()> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let mut out = BufWriter::new(file);
        for line in lines {
            out.write_all(line.as_bytes())?;
            out.write_all(b"\n")?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn entry(r: &LanguageRegistry, tgt: &str, text: &str) -> CorpusEntry {
        CorpusEntry::new(
            format!("source {text}"),
            r.english(),
            text,
            r.tag(tgt).unwrap(),
            "mock",
            Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn insert_dedups_and_persists() {
        let r = LanguageRegistry::builtin();
        let dir = tempfile::tempdir().unwrap();
        let mut store = CorpusStore::open(dir.path(), &r).unwrap();
        let batch = vec![entry(&r, "es", "uno"), entry(&r, "es", "dos"), entry(&r, "es", "uno"), entry(&r, "ja", "一")];
        let out = store.insert_all(&batch).unwrap();
        assert_eq!(out, InsertOutcome { inserted: 3, duplicates: 1 });
        assert_eq!(store.insert_all(&batch).unwrap().inserted, 0);

        let reopened = CorpusStore::open(dir.path(), &r).unwrap();
        assert_eq!(reopened.len(), 3);
        let es = Direction::parse("en-es", &r).unwrap();
        let shard = reopened.read_shard(&es).unwrap();
        assert_eq!(shard.iter().map(|e| e.target_text()).collect::<Vec<_>>(), ["uno", "dos"]);
        assert_eq!(reopened.direction_counts()[&es], 2);
    }

    #[test]
    fn stale_index_is_rebuilt() {
        let r = LanguageRegistry::builtin();
        let dir = tempfile::tempdir().unwrap();
        let mut store = CorpusStore::open(dir.path(), &r).unwrap();
        store.insert_all(&[entry(&r, "es", "uno"), entry(&r, "fr", "un")]).unwrap();
        fs::write(dir.path().join(INDEX_FILE), "bogus\n").unwrap();
        let reopened = CorpusStore::open(dir.path(), &r).unwrap();
        let index = fs::read_to_string(dir.path().join(INDEX_FILE)).unwrap();
        let listed: HashSet<String> = index.lines().map(str::to_string).collect();
        assert_eq!(&listed, reopened.ids());
        fs::remove_file(dir.path().join(INDEX_FILE)).unwrap();
        CorpusStore::open(dir.path(), &r).unwrap();
        assert!(dir.path().join(INDEX_FILE).exists());
    }

    #[test]
    fn dry_run_writes_nothing() {
        let r = LanguageRegistry::builtin();
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("store");
        let mut store = CorpusStore::open_dry_run(&root, &r).unwrap();
        assert_eq!(store.insert_all(&[entry(&r, "es", "uno")]).unwrap().inserted, 1);
        assert!(store.contains(entry(&r, "es", "uno").id()));
        assert!(!root.exists());
    }

    #[test]
    fn duplicate_ids_in_shards_are_rejected() {
        let r = LanguageRegistry::builtin();
        let dir = tempfile::tempdir().unwrap();
        let e = entry(&r, "es", "uno");
        fs::write(dir.path().join("en-es.jsonl"), format!("{}\n{}\n", e.to_line(), e.to_line())).unwrap();
        assert!(CorpusStore::open(dir.path(), &r).is_err());
    }
}
