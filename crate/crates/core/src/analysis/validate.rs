//! Raven-set validation over replayed crashing seeds.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::oracle::BugState;
use crate::replay::ReplayOutcome;

/// A crash matched by more than one bug.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossMatch {
    pub input_id: String,
    pub bugs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub crashes: usize,
    /// Crashing inputs no Raven matched.
    pub unlabeled: Vec<String>,
    pub cross_matches: Vec<CrossMatch>,
    /// Matched crashing seeds per bug, including bugs with zero matches.
    pub matched: BTreeMap<String, usize>,
    pub complete: bool,
}

/// A crash is matched by a bug whose state is at least Triggered. The set is
/// complete when every crash is matched.
pub fn validate_ravens(bugs: &BTreeSet<String>, outcomes: &[ReplayOutcome]) -> ValidationReport {
    let mut matched: BTreeMap<String, usize> = bugs.iter().map(|b| (b.clone(), 0)).collect();
    let mut unlabeled = Vec::new();
    let mut cross_matches = Vec::new();
    let mut crashes = 0;
    for o in outcomes.iter().filter(|o| o.is_crash()) {
        crashes += 1;
        let hits: Vec<String> = o
            .observations
            .iter()
            .filter(|ob| ob.state >= BugState::Triggered)
            .map(|ob| ob.bug_id.clone())
            .collect();
        for h in &hits {
            *matched.entry(h.clone()).or_default() += 1;
        }
        match hits.len() {
            0 => unlabeled.push(o.input_id.clone()),
            1 => {}
            _ => cross_matches.push(CrossMatch {
                input_id: o.input_id.clone(),
                bugs: hits,
            }),
        }
    }
    ValidationReport {
        crashes,
        complete: unlabeled.is_empty(),
        unlabeled,
        cross_matches,
        matched,
    }
}
