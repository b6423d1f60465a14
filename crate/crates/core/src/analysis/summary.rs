//! Per-trial earliest reach/trigger/detect times.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::oracle::BugState;
use crate::replay::ReplayOutcome;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BugTimes {
    pub reached_s: Option<f64>,
    pub triggered_s: Option<f64>,
    pub detected_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub fuzzer: String,
    pub trial_index: u32,
    pub horizon_s: f64,
    pub bugs: BTreeMap<String, BugTimes>,
}

/// State of `bug` in `o` after applying the first-triggered rule: only the
/// input's first triggered bug keeps Triggered/Detected, any other bug that
/// triggered in the same input counts as Reached.
pub fn credited_state(o: &ReplayOutcome, bug: &str, state: BugState) -> BugState {
    if state >= BugState::Triggered && o.first_triggered.as_deref() != Some(bug) {
        BugState::Reached
    } else {
        state
    }
}

fn earliest(slot: &mut Option<f64>, t: f64) {
    *slot = Some(slot.map_or(t, |s| s.min(t)));
}

/// Earliest time each bug of `bugs` reached each state in one trial's outcomes.
/// Inputs after `horizon_s` are ignored, so unset times are censored at the horizon.
pub fn summarize_trial(
    fuzzer: &str,
    trial_index: u32,
    outcomes: &[ReplayOutcome],
    bugs: &BTreeSet<String>,
    horizon_s: f64,
) -> TrialSummary {
    let mut out: BTreeMap<String, BugTimes> =
        bugs.iter().map(|b| (b.clone(), BugTimes::default())).collect();
    for o in outcomes.iter().filter(|o| o.timestamp_s <= horizon_s) {
        for obs in &o.observations {
            let Some(times) = out.get_mut(&obs.bug_id) else {
                continue;
            };
            let state = credited_state(o, &obs.bug_id, obs.state);
            if state >= BugState::Reached {
                earliest(&mut times.reached_s, o.timestamp_s);
            }
            if state >= BugState::Triggered {
                earliest(&mut times.triggered_s, o.timestamp_s);
            }
            if state == BugState::Detected {
                earliest(&mut times.detected_s, o.timestamp_s);
            }
        }
    }
    TrialSummary {
        fuzzer: fuzzer.to_string(),
        trial_index,
        horizon_s,
        bugs: out,
    }
}
