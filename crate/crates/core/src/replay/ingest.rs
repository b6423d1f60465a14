//! Corpus ingestion: `<fuzzer>/<trial>/{queue,crashes}/*` plus `fuzz_log.jsonl`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::adapter::Adapter;
use crate::oracle::Label;

pub const LOG_FILE: &str = "fuzz_log.jsonl";
pub const MTIME_ENV: &str = "FRB_SEED_MTIME_FALLBACK";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    /// Path relative to the trial directory, e.g. `queue/id_000003`.
    pub input_id: String,
    #[serde(skip)]
    pub bytes: Vec<u8>,
    pub timestamp_s: f64,
    pub label: Label,
    pub fuzzer: String,
    pub trial_index: u32,
    /// Timestamp came from the file's mtime rather than the log.
    pub mtime_fallback: bool,
}

/// One line of `fuzz_log.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub file: String,
    pub t: f64,
    pub kind: Label,
}

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub records: Vec<InputRecord>,
    pub warnings: Vec<String>,
    pub malformed_log_lines: usize,
    /// Inputs that could not be read or decoded.
    pub hard_errors: usize,
}

impl Ingested {
    fn merge(&mut self, other: Ingested) {
        self.records.extend(other.records);
        self.warnings.extend(other.warnings);
        self.malformed_log_lines += other.malformed_log_lines;
        self.hard_errors += other.hard_errors;
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}: no queue/ or crashes/ directory")]
    Layout(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError {
    let path = path.to_path_buf();
    move |source| IngestError::Io { path, source }
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub adapter: Adapter,
    pub mtime_fallback: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            adapter: Adapter::Auto,
            mtime_fallback: std::env::var(MTIME_ENV).map(|v| v != "0").unwrap_or(true),
        }
    }
}

/// Parse a fuzzing log. Malformed lines are skipped and reported.
pub fn parse_log(text: &str) -> (Vec<LogEntry>, Vec<String>) {
    let mut entries = Vec::new();
    let mut bad = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<LogEntry>(line) {
            Ok(e) if e.t.is_finite() && e.t >= 0.0 => entries.push(e),
            Ok(_) => bad.push(format!("line {}: negative or non-finite timestamp", i + 1)),
            Err(e) => bad.push(format!("line {}: {e}", i + 1)),
        }
    }
    (entries, bad)
}

fn list_files(dir: &Path) -> Result<Vec<PathBuf>, IngestError> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .filter(|p| !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.')))
        .collect();
    out.sort();
    Ok(out)
}

fn mtime(path: &Path) -> Option<SystemTime> {
    std::fs::metadata(path).and_then(|m| m.modified()).ok()
}

/// Ingest one trial directory. `log` defaults to `<trial>/fuzz_log.jsonl`.
pub fn ingest_trial(
    trial_dir: &Path,
    log: Option<&Path>,
    fuzzer: &str,
    trial_index: u32,
    opts: &IngestOptions,
) -> Result<Ingested, IngestError> {
    let mut out = Ingested::default();
    let mut files: BTreeMap<String, (PathBuf, Label)> = BTreeMap::new();
    let mut any_dir = false;
    for (sub, label) in [("queue", Label::Queue), ("crashes", Label::Crash)] {
        let d = trial_dir.join(sub);
        any_dir |= d.is_dir();
        for f in list_files(&d)? {
            let name = f.file_name().unwrap().to_string_lossy().to_string();
            files.insert(format!("{sub}/{name}"), (f, label));
        }
    }
    if !any_dir {
        return Err(IngestError::Layout(trial_dir.to_path_buf()));
    }

    let log_path = log.map(Path::to_path_buf).unwrap_or_else(|| trial_dir.join(LOG_FILE));
    let mut times: BTreeMap<String, f64> = BTreeMap::new();
    if log_path.exists() {
        let text = std::fs::read_to_string(&log_path).map_err(io_err(&log_path))?;
        let (entries, bad) = parse_log(&text);
        out.malformed_log_lines = bad.len();
        for b in bad {
            out.warnings.push(format!("{}: malformed log {b}", log_path.display()));
        }
        for e in entries {
            if !files.contains_key(&e.file) {
                out.warnings.push(format!(
                    "{}: log references missing file `{}`, dropped",
                    log_path.display(),
                    e.file
                ));
                continue;
            }
            let t = times.entry(e.file).or_insert(e.t);
            *t = t.min(e.t);
        }
    }

    let unlogged: Vec<&String> = files.keys().filter(|k| !times.contains_key(*k)).collect();
    let baseline = if unlogged.is_empty() || !opts.mtime_fallback {
        None
    } else {
        files.values().filter_map(|(p, _)| mtime(p)).min()
    };

    for (id, (path, label)) in &files {
        let (timestamp_s, fallback) = match times.get(id) {
            Some(t) => (*t, false),
            None if opts.mtime_fallback => {
                let t = match (mtime(path), baseline) {
                    (Some(m), Some(b)) => m.duration_since(b).map(|d| d.as_secs_f64()).unwrap_or(0.0),
                    _ => 0.0,
                };
                out.warnings.push(format!(
                    "{}: `{id}` not in fuzzing log, timestamp {t:.3} s taken from file mtime",
                    trial_dir.display()
                ));
                (t, true)
            }
            None => {
                out.warnings.push(format!(
                    "{}: `{id}` not in fuzzing log and mtime fallback disabled, dropped",
                    trial_dir.display()
                ));
                continue;
            }
        };
        let raw = match std::fs::read(path) {
            Ok(b) => b,
            Err(e) => {
                out.warnings.push(format!("{}: unreadable: {e}", path.display()));
                out.hard_errors += 1;
                continue;
            }
        };
        let bytes = match opts.adapter.apply(&raw) {
            Ok(b) => b,
            Err(e) => {
                out.warnings.push(format!("{}: {e}", path.display()));
                out.hard_errors += 1;
                continue;
            }
        };
        out.records.push(InputRecord {
            input_id: id.clone(),
            bytes,
            timestamp_s,
            label: *label,
            fuzzer: fuzzer.to_string(),
            trial_index,
            mtime_fallback: fallback,
        });
    }
    sort_records(&mut out.records);
    Ok(out)
}

/// Order by (timestamp, input id).
pub fn sort_records(records: &mut [InputRecord]) {
    records.sort_by(|a, b| {
        a.timestamp_s
            .total_cmp(&b.timestamp_s)
            .then_with(|| a.input_id.cmp(&b.input_id))
    });
}

/// Trailing digits of a directory name, e.g. `trial_07` -> 7.
pub fn trial_index_of(name: &str) -> Option<u32> {
    let digits: String = name.chars().rev().take_while(|c| c.is_ascii_digit()).collect();
    let digits: String = digits.chars().rev().collect();
    digits.parse().ok()
}

fn subdirs(dir: &Path) -> Result<Vec<PathBuf>, IngestError> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    out.sort();
    Ok(out)
}

/// One trial of one fuzzer inside a campaign directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialDir {
    pub fuzzer: String,
    pub trial_index: u32,
    pub path: PathBuf,
}

/// Trials under `<root>/<fuzzer>/<trial>/`. A root that is itself a trial
/// (has `queue/` or `crashes/`) yields one trial named after the directory.
pub fn discover_trials(root: &Path) -> Result<Vec<TrialDir>, IngestError> {
    let is_trial = |p: &Path| p.join("queue").is_dir() || p.join("crashes").is_dir();
    let name_of = |p: &Path| p.file_name().map(|n| n.to_string_lossy().to_string()).unwrap_or_default();
    if is_trial(root) {
        return Ok(vec![TrialDir {
            fuzzer: name_of(root),
            trial_index: 0,
            path: root.to_path_buf(),
        }]);
    }
    let mut out = Vec::new();
    for fuzzer_dir in subdirs(root)? {
        let fuzzer = name_of(&fuzzer_dir);
        for (i, t) in subdirs(&fuzzer_dir)?.into_iter().filter(|p| is_trial(p)).enumerate() {
            let trial_index = trial_index_of(&name_of(&t)).unwrap_or(i as u32);
            out.push(TrialDir {
                fuzzer: fuzzer.clone(),
                trial_index,
                path: t,
            });
        }
    }
    Ok(out)
}

/// Ingest every trial below `corpus_dir`. `log` overrides the per-trial log
/// and is only meaningful when `corpus_dir` is a single trial.
pub fn ingest_campaign(
    corpus_dir: &Path,
    log: Option<&Path>,
    opts: &IngestOptions,
) -> Result<Ingested, IngestError> {
    let trials = discover_trials(corpus_dir)?;
    if trials.is_empty() {
        return Err(IngestError::Layout(corpus_dir.to_path_buf()));
    }
    let mut out = Ingested::default();
    for t in &trials {
        let log = if trials.len() == 1 { log } else { None };
        out.merge(ingest_trial(&t.path, log, &t.fuzzer, t.trial_index, opts)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_lines() {
        let (e, bad) = parse_log(
            "{\"file\":\"queue/a\",\"t\":1.5,\"kind\":\"queue\"}\nnot json\n{\"file\":\"x\",\"t\":-1,\"kind\":\"crash\"}\n",
        );
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].t, 1.5);
        assert_eq!(bad.len(), 2);
    }

    #[test]
    fn trial_names() {
        assert_eq!(trial_index_of("trial_07"), Some(7));
        assert_eq!(trial_index_of("3"), Some(3));
        assert_eq!(trial_index_of("main"), None);
    }
}
