//! Replay engine: run every corpus input through the backend with the bug
//! interpreter attached and record per-input outcomes.

pub mod adapter;
pub mod ingest;

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::emu::{ExecutionResult, RunLimits, Termination};
use crate::minivm::{MiniVm, TargetImage};
use crate::oracle::{BugObservation, Flags, Label, LoadError, Mode, OracleSession, RavenSet};
use crate::raven::DEFAULT_STEP_BUDGET;

pub use adapter::Adapter;
pub use ingest::{ingest_campaign, ingest_trial, InputRecord, IngestOptions, Ingested};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over the little-endian bytes of every frame, outermost first.
pub fn stack_hash(shadow_stack: &[u64]) -> u64 {
    let mut h = FNV_OFFSET;
    for frame in shadow_stack {
        for b in frame.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}

/// Hex SHA-256 of a serialized image.
pub fn target_hash(image: &TargetImage) -> String {
    format!("{:x}", Sha256::digest(image.to_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayOutcome {
    pub fuzzer: String,
    pub trial_index: u32,
    pub input_id: String,
    pub timestamp_s: f64,
    pub label: Label,
    pub observations: Vec<BugObservation>,
    pub termination: Termination,
    pub instructions_executed: u64,
    pub crash_sig_pc_lr: Option<(u64, u64)>,
    pub crash_sig_stack: Option<u64>,
    pub covered_blocks: Vec<u64>,
    pub first_triggered: Option<String>,
    pub flags: Flags,
    pub target_hash: String,
    pub diagnostics: Vec<String>,
}

impl ReplayOutcome {
    pub fn state_of(&self, bug_id: &str) -> crate::oracle::BugState {
        self.observations
            .iter()
            .find(|o| o.bug_id == bug_id)
            .map(|o| o.state)
            .unwrap_or(crate::oracle::BugState::NotReached)
    }

    pub fn is_crash(&self) -> bool {
        self.termination.is_crash()
    }
}

#[derive(Debug, Clone)]
pub struct ReplayOptions {
    /// Worker threads; 0 means one per available core.
    pub jobs: usize,
    pub mode: Mode,
    pub active: BTreeSet<String>,
    pub limits: RunLimits,
    pub step_budget: u64,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        ReplayOptions {
            jobs: 1,
            mode: Mode::Replay,
            active: BTreeSet::new(),
            limits: RunLimits::default(),
            step_budget: DEFAULT_STEP_BUDGET,
        }
    }
}

/// Backend plus oracle for one worker thread.
pub struct Worker<'a> {
    vm: MiniVm,
    oracle: OracleSession<'a>,
    target_hash: String,
    limits: RunLimits,
}

impl<'a> Worker<'a> {
    pub fn new(image: &TargetImage, ravens: &'a RavenSet, opts: &ReplayOptions) -> Result<Self, LoadError> {
        let mut vm = MiniVm::new(image.clone()).map_err(LoadError::Target)?;
        let mut oracle = OracleSession::load(ravens, &mut vm, opts.mode, opts.active.clone())?;
        oracle.set_step_budget(opts.step_budget);
        Ok(Worker {
            vm,
            oracle,
            target_hash: target_hash(image),
            limits: opts.limits,
        })
    }

    pub fn replay(&mut self, rec: &InputRecord) -> ReplayOutcome {
        let (result, verdict) =
            self.oracle
                .replay(&mut self.vm, &rec.input_id, &rec.bytes, &self.limits, Some(rec.label));
        build_outcome(rec, result, verdict, &self.target_hash)
    }

    pub fn oracle(&self) -> &OracleSession<'a> {
        &self.oracle
    }
}

fn build_outcome(
    rec: &InputRecord,
    result: ExecutionResult,
    verdict: crate::oracle::InputVerdict,
    target_hash: &str,
) -> ReplayOutcome {
    let (pc_lr, stack) = match &result.termination {
        Termination::Crash {
            pc, lr, shadow_stack, ..
        } => (Some((*pc, *lr)), Some(stack_hash(shadow_stack))),
        _ => (None, None),
    };
    let mut diagnostics = verdict.diagnostics;
    if rec.mtime_fallback {
        diagnostics.push("timestamp from file mtime".into());
    }
    ReplayOutcome {
        fuzzer: rec.fuzzer.clone(),
        trial_index: rec.trial_index,
        input_id: rec.input_id.clone(),
        timestamp_s: rec.timestamp_s,
        label: rec.label,
        observations: verdict.observations,
        termination: result.termination,
        instructions_executed: result.instructions_executed,
        crash_sig_pc_lr: pc_lr,
        crash_sig_stack: stack,
        covered_blocks: result.covered_blocks.into_iter().collect(),
        first_triggered: verdict.first_triggered,
        flags: verdict.flags,
        target_hash: target_hash.to_string(),
        diagnostics,
    }
}

/// Replay `records` in parallel. Output order matches input order.
pub fn replay_all(
    records: &[InputRecord],
    image: &TargetImage,
    ravens: &RavenSet,
    opts: &ReplayOptions,
) -> Result<Vec<ReplayOutcome>, LoadError> {
    // Surface setup errors once, before fanning out.
    let mut first = Worker::new(image, ravens, opts)?;
    if opts.jobs == 1 || records.len() <= 1 {
        return Ok(records.iter().map(|r| first.replay(r)).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .expect("thread pool");
    Ok(pool.install(|| {
        records
            .par_iter()
            .map_init(
                || Worker::new(image, ravens, opts).expect("worker setup succeeded once"),
                |w, r| w.replay(r),
            )
            .collect()
    }))
}

pub fn write_jsonl<W: Write>(outcomes: &[ReplayOutcome], mut w: W) -> std::io::Result<()> {
    for o in outcomes {
        serde_json::to_writer(&mut w, o)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<ReplayOutcome>, String> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 1))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_stack_is_offset_basis() {
        assert_eq!(stack_hash(&[]), 0xcbf29ce484222325);
    }

    #[test]
    fn stack_hash_matches_reference_fnv() {
        // Independent byte-at-a-time FNV-1a over the concatenated frames.
        fn fnv(bytes: &[u8]) -> u64 {
            bytes.iter().fold(0xcbf29ce484222325u64, |h, b| {
                (h ^ *b as u64).wrapping_mul(0x100000001b3)
            })
        }
        let frames = [0x0800_0010u64, 0xFFFF_FFF9, 0x40];
        let bytes: Vec<u8> = frames.iter().flat_map(|f| f.to_le_bytes()).collect();
        assert_eq!(stack_hash(&frames), fnv(&bytes));
        assert_ne!(stack_hash(&[1, 2]), stack_hash(&[1, 3, 2]));
    }
}
