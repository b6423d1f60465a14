//! Crash-bucketing heuristics compared against oracle bug IDs.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::replay::ReplayOutcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heuristic {
    PcLr,
    StackHash,
}

impl Heuristic {
    pub const ALL: [Heuristic; 2] = [Heuristic::PcLr, Heuristic::StackHash];

    pub fn name(self) -> &'static str {
        match self {
            Heuristic::PcLr => "pc_lr",
            Heuristic::StackHash => "stack_hash",
        }
    }

    fn signature(self, o: &ReplayOutcome) -> Option<(u64, u64)> {
        match self {
            Heuristic::PcLr => o.crash_sig_pc_lr,
            Heuristic::StackHash => o.crash_sig_stack.map(|h| (h, 0)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupRow {
    pub heuristic: Heuristic,
    pub crashes: usize,
    /// Distinct signatures.
    pub groups: usize,
    /// Distinct oracle bug IDs among the crashes.
    pub oracle_bugs: usize,
    /// Groups holding crashes of two or more oracle bugs.
    pub conflations: usize,
    /// Oracle bugs whose crashes fall into two or more groups.
    pub splits: usize,
}

/// Compare each heuristic's grouping of crashing outcomes with their
/// `first_triggered` bug. Crashes without an oracle ID still form groups.
pub fn dedup_compare(outcomes: &[ReplayOutcome]) -> Vec<DedupRow> {
    let crashes: Vec<&ReplayOutcome> = outcomes.iter().filter(|o| o.is_crash()).collect();
    let oracle: BTreeSet<&str> = crashes.iter().filter_map(|o| o.first_triggered.as_deref()).collect();
    Heuristic::ALL
        .iter()
        .map(|h| {
            let mut group_bugs: BTreeMap<(u64, u64), BTreeSet<&str>> = BTreeMap::new();
            let mut bug_groups: BTreeMap<&str, BTreeSet<(u64, u64)>> = BTreeMap::new();
            for o in &crashes {
                let Some(sig) = h.signature(o) else { continue };
                let entry = group_bugs.entry(sig).or_default();
                if let Some(b) = o.first_triggered.as_deref() {
                    entry.insert(b);
                    bug_groups.entry(b).or_default().insert(sig);
                }
            }
            DedupRow {
                heuristic: *h,
                crashes: crashes.len(),
                groups: group_bugs.len(),
                oracle_bugs: oracle.len(),
                conflations: group_bugs.values().filter(|s| s.len() >= 2).count(),
                splits: bug_groups.values().filter(|s| s.len() >= 2).count(),
            }
        })
        .collect()
}
