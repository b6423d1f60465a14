//! Fixture bundles: minivm targets, Ravens, seed corpora and expected outcomes.
//!
//! Sources live under `fixtures/<bundle>/` (`target.s`, `ravens/`, `seeds.json`,
//! optional `campaign.json`). Everything else in the tree is generated from them
//! by [`FixtureSuite::write`].

mod sources;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::minivm::{assemble_with_labels, AsmError, TargetImage};
use crate::oracle::{parse_meta, BugState, Label, LoadError, RavenSet};
use crate::raven::RavenSource;
use crate::replay::ingest::{sort_records, InputRecord, LogEntry, LOG_FILE};
use crate::replay::{replay_all, write_jsonl, ReplayOptions, ReplayOutcome};

/// Fuzzer name of a bundle's own corpus (the `corpus/` trial directory).
pub const CORPUS_FUZZER: &str = "corpus";

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("{bundle}: {source}")]
    Asm { bundle: String, source: AsmError },
    #[error("{bundle}: {message}")]
    Source { bundle: String, message: String },
    #[error("{bundle}: {source}")]
    Ravens { bundle: String, source: LoadError },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Hand-traced expectation for one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expect {
    /// `Termination::kind()` of the replay.
    pub termination: String,
    /// Bugs not listed are expected NotReached.
    #[serde(default)]
    pub bugs: BTreeMap<String, BugState>,
    #[serde(default)]
    pub first_triggered: Option<String>,
    #[serde(default)]
    pub multi_bug: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seed {
    pub name: String,
    pub kind: Label,
    pub t: f64,
    pub hex: String,
    pub expect: Expect,
    #[serde(default)]
    pub trace: String,
}

impl Seed {
    pub fn bytes(&self) -> Vec<u8> {
        hex::decode(&self.hex).expect("validated at load")
    }
}

#[derive(Deserialize)]
struct SeedFile {
    seeds: Vec<Seed>,
}

/// Multi-trial campaign over a bundle's seeds: per fuzzer, per trial, a list
/// of `(timestamp, seed name)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub horizon_s: f64,
    pub fuzzers: BTreeMap<String, Vec<Vec<(f64, String)>>>,
}

/// One file of a generated corpus trial.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusFile {
    /// Relative to the trial directory, e.g. `queue/id_000002_benign`.
    pub path: String,
    pub bytes: Vec<u8>,
    pub t: f64,
    pub label: Label,
}

#[derive(Debug, Clone)]
pub struct Bundle {
    pub name: String,
    pub image: TargetImage,
    pub labels: BTreeMap<String, u32>,
    pub seeds: Vec<Seed>,
    pub campaign: Option<Campaign>,
    files: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct FixtureSuite {
    pub bundles: Vec<Bundle>,
}

/// Assemble and load every bundle from the embedded sources.
pub fn build_fixtures() -> Result<FixtureSuite, FixtureError> {
    let mut bundles = Vec::new();
    for src in sources::BUNDLES {
        let bundle = src.name.to_string();
        let file = |name: &str| src.files.iter().find(|(n, _)| *n == name).map(|(_, t)| *t);
        let bad = |message: String| FixtureError::Source { bundle: bundle.clone(), message };
        let (image, labels) = assemble_with_labels(file("target.s").unwrap())
            .map_err(|source| FixtureError::Asm { bundle: bundle.clone(), source })?;
        let seeds: SeedFile = serde_json::from_str(file("seeds.json").unwrap())
            .map_err(|e| bad(format!("seeds.json: {e}")))?;
        for s in &seeds.seeds {
            hex::decode(&s.hex).map_err(|e| bad(format!("seed {}: {e}", s.name)))?;
        }
        let campaign: Option<Campaign> = file("campaign.json")
            .map(|t| serde_json::from_str(t).map_err(|e| bad(format!("campaign.json: {e}"))))
            .transpose()?;
        if let Some(c) = &campaign {
            for (_, name) in c.fuzzers.values().flatten().flatten() {
                if !seeds.seeds.iter().any(|s| &s.name == name) {
                    return Err(bad(format!("campaign.json: unknown seed `{name}`")));
                }
            }
        }
        let b = Bundle {
            name: bundle.clone(),
            image,
            labels,
            seeds: seeds.seeds,
            campaign,
            files: src.files.iter().map(|(n, t)| (n.to_string(), t.to_string())).collect(),
        };
        b.ravens().map_err(|source| FixtureError::Ravens { bundle, source })?;
        bundles.push(b);
    }
    Ok(FixtureSuite { bundles })
}

impl FixtureSuite {
    pub fn bundle(&self, name: &str) -> Option<&Bundle> {
        self.bundles.iter().find(|b| b.name == name)
    }

    /// Write sources and generated artifacts for every bundle under `root`.
    pub fn write(&self, root: &Path) -> Result<(), FixtureError> {
        for b in &self.bundles {
            b.write(&root.join(&b.name))?;
        }
        Ok(())
    }
}

impl Bundle {
    /// Ravens of `ravens/`.
    pub fn ravens(&self) -> Result<RavenSet, LoadError> {
        self.ravens_in("ravens")
    }

    /// Ravens of one source directory, e.g. `ravens_overbroad`.
    pub fn ravens_in(&self, dir: &str) -> Result<RavenSet, LoadError> {
        let prefix = format!("{dir}/");
        let mut sources = Vec::new();
        for (name, text) in &self.files {
            let Some(stem) = name.strip_prefix(&prefix).and_then(|n| n.strip_suffix(".raven")) else {
                continue;
            };
            let sidecar = format!("{prefix}{stem}.json");
            let meta = match self.files.iter().find(|(n, _)| *n == sidecar) {
                Some((_, raw)) => parse_meta(raw).map_err(|source| LoadError::Meta {
                    path: sidecar.clone().into(),
                    source,
                })?,
                None => Vec::new(),
            };
            sources.push((RavenSource::new(text.clone(), name.clone()), meta));
        }
        sources.sort_by(|a, b| a.0.origin.cmp(&b.0.origin));
        RavenSet::from_sources(&sources)
    }

    /// Source file names, relative to the bundle directory.
    pub fn source_files(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn seed(&self, name: &str) -> Option<&Seed> {
        self.seeds.iter().find(|s| s.name == name)
    }

    pub fn label(&self, name: &str) -> u64 {
        self.labels[name] as u64
    }

    /// The bundle's own corpus, one file per seed.
    pub fn corpus(&self) -> Vec<CorpusFile> {
        corpus_files(self.seeds.iter().map(|s| (s.t, s)))
    }

    /// `(fuzzer, trial_index, files)` for every campaign trial.
    pub fn campaign_trials(&self) -> Vec<(String, u32, Vec<CorpusFile>)> {
        let Some(c) = &self.campaign else { return Vec::new() };
        let mut out = Vec::new();
        for (fuzzer, trials) in &c.fuzzers {
            for (i, entries) in trials.iter().enumerate() {
                let files = corpus_files(entries.iter().map(|(t, n)| (*t, self.seed(n).unwrap())));
                out.push((fuzzer.clone(), i as u32, files));
            }
        }
        out
    }

    /// Records as ingestion of `corpus/` produces them.
    pub fn records(&self) -> Vec<InputRecord> {
        to_records(CORPUS_FUZZER, 0, &self.corpus())
    }

    pub fn campaign_records(&self) -> Vec<InputRecord> {
        let mut out = Vec::new();
        for (fuzzer, idx, files) in self.campaign_trials() {
            out.extend(to_records(&fuzzer, idx, &files));
        }
        out
    }

    /// Replay of `corpus/` in Replay mode with all Ravens of `ravens/`.
    pub fn replay_corpus(&self) -> Result<Vec<ReplayOutcome>, LoadError> {
        replay_all(&self.records(), &self.image, &self.ravens()?, &ReplayOptions::default())
    }

    pub fn replay_campaign(&self) -> Result<Vec<ReplayOutcome>, LoadError> {
        replay_all(&self.campaign_records(), &self.image, &self.ravens()?, &ReplayOptions::default())
    }

    /// Compare each corpus outcome with its seed's hand-traced expectation.
    pub fn check(&self, outcomes: &[ReplayOutcome]) -> Vec<String> {
        let mut bad = Vec::new();
        let by_id: BTreeMap<&str, &ReplayOutcome> = outcomes.iter().map(|o| (o.input_id.as_str(), o)).collect();
        for (file, seed) in self.corpus().iter().zip(&self.seeds) {
            match by_id.get(file.path.as_str()) {
                Some(o) => bad.extend(check_outcome(seed, o).into_iter().map(|m| format!("{}/{}: {m}", self.name, seed.name))),
                None => bad.push(format!("{}/{}: no outcome", self.name, seed.name)),
            }
        }
        bad
    }

    fn write(&self, dir: &Path) -> Result<(), FixtureError> {
        for (name, text) in &self.files {
            put(&dir.join(name), text.as_bytes())?;
        }
        put(&dir.join("target.img"), &self.image.to_bytes())?;
        write_trial(&dir.join("corpus"), &self.corpus())?;
        let err = |source| FixtureError::Ravens { bundle: self.name.clone(), source };
        put(&dir.join("expected.jsonl"), &jsonl(&self.replay_corpus().map_err(err)?))?;
        if self.campaign.is_some() {
            for (fuzzer, idx, files) in self.campaign_trials() {
                write_trial(&dir.join("campaign").join(fuzzer).join(format!("trial_{idx:02}")), &files)?;
            }
            put(&dir.join("campaign_expected.jsonl"), &jsonl(&self.replay_campaign().map_err(err)?))?;
        }
        Ok(())
    }
}

/// Mismatches between a seed's expectation and its replay.
pub fn check_outcome(seed: &Seed, o: &ReplayOutcome) -> Vec<String> {
    let e = &seed.expect;
    let mut bad = Vec::new();
    if o.termination.kind() != e.termination {
        bad.push(format!("termination {} != {}", o.termination.kind(), e.termination));
    }
    for obs in &o.observations {
        let want = e.bugs.get(&obs.bug_id).copied().unwrap_or(BugState::NotReached);
        if obs.state != want {
            bad.push(format!("{} is {} not {}", obs.bug_id, obs.state, want));
        }
    }
    for b in e.bugs.keys() {
        if !o.observations.iter().any(|obs| &obs.bug_id == b) {
            bad.push(format!("no observation for {b}"));
        }
    }
    let triggered: Vec<&String> = e.bugs.iter().filter(|(_, s)| **s >= BugState::Triggered).map(|(b, _)| b).collect();
    let want_first = e.first_triggered.clone().or_else(|| (triggered.len() == 1).then(|| triggered[0].clone()));
    if o.first_triggered != want_first {
        bad.push(format!("first_triggered {:?} != {:?}", o.first_triggered, want_first));
    }
    if o.flags.multi_bug != e.multi_bug {
        bad.push(format!("multi_bug {}", o.flags.multi_bug));
    }
    let mismatch = (seed.kind == Label::Crash) != o.is_crash();
    if o.flags.label_mismatch != mismatch {
        bad.push(format!("label_mismatch {}", o.flags.label_mismatch));
    }
    bad
}

fn corpus_files<'a>(entries: impl Iterator<Item = (f64, &'a Seed)>) -> Vec<CorpusFile> {
    let (mut nq, mut nc) = (0, 0);
    entries
        .map(|(t, s)| {
            let (dir, n) = match s.kind {
                Label::Queue => ("queue", &mut nq),
                Label::Crash => ("crashes", &mut nc),
            };
            let path = format!("{dir}/id_{:06}_{}", *n, s.name);
            *n += 1;
            CorpusFile {
                path,
                bytes: s.bytes(),
                t,
                label: s.kind,
            }
        })
        .collect()
}

fn to_records(fuzzer: &str, trial_index: u32, files: &[CorpusFile]) -> Vec<InputRecord> {
    let mut out: Vec<InputRecord> = files
        .iter()
        .map(|f| InputRecord {
            input_id: f.path.clone(),
            bytes: f.bytes.clone(),
            timestamp_s: f.t,
            label: f.label,
            fuzzer: fuzzer.to_string(),
            trial_index,
            mtime_fallback: false,
        })
        .collect();
    sort_records(&mut out);
    out
}

fn write_trial(dir: &Path, files: &[CorpusFile]) -> Result<(), FixtureError> {
    let mut log = String::new();
    for f in files {
        put(&dir.join(&f.path), &f.bytes)?;
        let entry = LogEntry {
            file: f.path.clone(),
            t: f.t,
            kind: f.label,
        };
        log.push_str(&serde_json::to_string(&entry).unwrap());
        log.push('\n');
    }
    put(&dir.join(LOG_FILE), log.as_bytes())
}

fn jsonl(outcomes: &[ReplayOutcome]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_jsonl(outcomes, &mut buf).unwrap();
    buf
}

fn put(path: &Path, bytes: &[u8]) -> Result<(), FixtureError> {
    let io = |source| FixtureError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    std::fs::write(path, bytes).map_err(io)
}
