//! Campaign report (`frb_report_v1`) and its CSV companions.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::consistency::consistency;
use super::dedup::{dedup_compare, DedupRow};
use super::intersections::{intersections, IntersectionGroup};
use super::summary::{summarize_trial, TrialSummary};
use super::survival::{format_median, format_percent, kaplan_meier, SurvivalCurve};
use crate::replay::ReplayOutcome;

pub const SCHEMA: &str = "frb_report_v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugInfo {
    pub bug_id: String,
    pub false_positive: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugCounts {
    pub triggered: usize,
    pub triggered_tp: usize,
    pub triggered_fp: usize,
    pub detected: usize,
    pub detected_tp: usize,
    pub detected_fp: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BugStats {
    pub bug_id: String,
    pub false_positive: bool,
    pub trials_reached: u32,
    pub trials_triggered: u32,
    pub trials_detected: u32,
    /// Fraction of trials that triggered the bug.
    pub hit_rate: f64,
    pub hit_rate_detected: f64,
    pub median_reached_s: Option<f64>,
    pub median_triggered_s: Option<f64>,
    pub median_detected_s: Option<f64>,
    /// Time-to-trigger survival.
    pub survival: SurvivalCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzerReport {
    pub fuzzer: String,
    pub trials: u32,
    pub counts: BugCounts,
    pub consistency: f64,
    pub consistency_detected: f64,
    pub bugs: Vec<BugStats>,
    pub trial_summaries: Vec<TrialSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub schema: String,
    pub target_hash: String,
    pub horizon_s: f64,
    pub bugs: Vec<BugInfo>,
    pub fuzzers: Vec<FuzzerReport>,
    /// Over triggered bugs.
    pub intersections: Vec<IntersectionGroup>,
    pub intersections_detected: Vec<IntersectionGroup>,
    pub dedup: Vec<DedupRow>,
    pub inputs: usize,
    pub crashes: usize,
    pub label_mismatches: usize,
    pub multi_bug_inputs: usize,
}

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error("outcomes come from different targets: {0} and {1}")]
    MixedTargets(String, String),
    #[error("no outcomes")]
    Empty,
    #[error("no known bugs in outcomes")]
    NoBugs,
}

impl CampaignReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<CampaignReport, String> {
        let r: CampaignReport = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if r.schema != SCHEMA {
            return Err(format!("unsupported report schema `{}`", r.schema));
        }
        Ok(r)
    }
}

/// Aggregate outcomes of every fuzzer and trial into one report.
pub fn analyze(outcomes: &[ReplayOutcome], horizon_s: f64) -> Result<CampaignReport, AnalyzeError> {
    let first = outcomes.first().ok_or(AnalyzeError::Empty)?;
    if let Some(o) = outcomes.iter().find(|o| o.target_hash != first.target_hash) {
        return Err(AnalyzeError::MixedTargets(first.target_hash.clone(), o.target_hash.clone()));
    }
    let mut fp: BTreeMap<String, bool> = BTreeMap::new();
    for o in outcomes {
        for ob in &o.observations {
            *fp.entry(ob.bug_id.clone()).or_default() |= ob.false_positive;
        }
    }
    if fp.is_empty() {
        return Err(AnalyzeError::NoBugs);
    }
    let bug_ids: BTreeSet<String> = fp.keys().cloned().collect();

    let mut by_trial: BTreeMap<(&str, u32), Vec<ReplayOutcome>> = BTreeMap::new();
    for o in outcomes {
        by_trial.entry((&o.fuzzer, o.trial_index)).or_default().push(o.clone());
    }
    let mut by_fuzzer: BTreeMap<&str, Vec<TrialSummary>> = BTreeMap::new();
    for ((fuzzer, trial), outs) in &by_trial {
        by_fuzzer
            .entry(fuzzer)
            .or_default()
            .push(summarize_trial(fuzzer, *trial, outs, &bug_ids, horizon_s));
    }

    let mut fuzzers = Vec::new();
    let mut triggered_sets = BTreeMap::new();
    let mut detected_sets = BTreeMap::new();
    for (fuzzer, summaries) in by_fuzzer {
        let t = summaries.len() as u32;
        let mut bugs = Vec::new();
        let mut counts = BugCounts::default();
        let mut trig_counts = Vec::new();
        let mut det_counts = Vec::new();
        let mut trig_set = BTreeSet::new();
        let mut det_set = BTreeSet::new();
        for bug in &bug_ids {
            let times: Vec<_> = summaries.iter().map(|s| s.bugs[bug]).collect();
            let reached: Vec<Option<f64>> = times.iter().map(|x| x.reached_s).collect();
            let triggered: Vec<Option<f64>> = times.iter().map(|x| x.triggered_s).collect();
            let detected: Vec<Option<f64>> = times.iter().map(|x| x.detected_s).collect();
            let n = |v: &[Option<f64>]| v.iter().filter(|x| x.is_some()).count() as u32;
            let survival = kaplan_meier(&triggered, horizon_s);
            let is_fp = fp[bug];
            let (nt, nd) = (n(&triggered), n(&detected));
            if nt > 0 {
                counts.triggered += 1;
                if is_fp { counts.triggered_fp += 1 } else { counts.triggered_tp += 1 }
                trig_set.insert(bug.clone());
            }
            if nd > 0 {
                counts.detected += 1;
                if is_fp { counts.detected_fp += 1 } else { counts.detected_tp += 1 }
                det_set.insert(bug.clone());
            }
            trig_counts.push(nt as u64);
            det_counts.push(nd as u64);
            bugs.push(BugStats {
                bug_id: bug.clone(),
                false_positive: is_fp,
                trials_reached: n(&reached),
                trials_triggered: nt,
                trials_detected: nd,
                hit_rate: nt as f64 / t as f64,
                hit_rate_detected: nd as f64 / t as f64,
                median_reached_s: kaplan_meier(&reached, horizon_s).median_s,
                median_triggered_s: survival.median_s,
                median_detected_s: kaplan_meier(&detected, horizon_s).median_s,
                survival,
            });
        }
        let nb = bug_ids.len() as u64;
        fuzzers.push(FuzzerReport {
            fuzzer: fuzzer.to_string(),
            trials: t,
            counts,
            consistency: consistency(&trig_counts, t as u64, nb).expect("counts bounded by trials"),
            consistency_detected: consistency(&det_counts, t as u64, nb).expect("counts bounded by trials"),
            bugs,
            trial_summaries: summaries,
        });
        triggered_sets.insert(fuzzer.to_string(), trig_set);
        detected_sets.insert(fuzzer.to_string(), det_set);
    }

    let is_fp = |b: &str| fp.get(b).copied().unwrap_or(false);
    Ok(CampaignReport {
        schema: SCHEMA.to_string(),
        target_hash: first.target_hash.clone(),
        horizon_s,
        bugs: fp
            .iter()
            .map(|(b, f)| BugInfo { bug_id: b.clone(), false_positive: *f })
            .collect(),
        fuzzers,
        intersections: intersections(&triggered_sets, is_fp),
        intersections_detected: intersections(&detected_sets, is_fp),
        dedup: dedup_compare(outcomes),
        inputs: outcomes.len(),
        crashes: outcomes.iter().filter(|o| o.is_crash()).count(),
        label_mismatches: outcomes.iter().filter(|o| o.flags.label_mismatch).count(),
        multi_bug_inputs: outcomes.iter().filter(|o| o.flags.multi_bug).count(),
    })
}

/// Per-fuzzer, per-bug table.
pub fn bugs_csv(report: &CampaignReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "fuzzer",
        "bug_id",
        "false_positive",
        "trials",
        "trials_reached",
        "trials_triggered",
        "trials_detected",
        "hit_rate",
        "median_reached",
        "median_triggered",
        "median_detected",
        "median_triggered_s",
    ])
    .unwrap();
    for f in &report.fuzzers {
        for b in &f.bugs {
            w.write_record([
                f.fuzzer.clone(),
                b.bug_id.clone(),
                b.false_positive.to_string(),
                f.trials.to_string(),
                b.trials_reached.to_string(),
                b.trials_triggered.to_string(),
                b.trials_detected.to_string(),
                format_percent(b.hit_rate),
                format_median(b.median_reached_s),
                format_median(b.median_triggered_s),
                format_median(b.median_detected_s),
                b.median_triggered_s.map(|m| m.to_string()).unwrap_or_default(),
            ])
            .unwrap();
        }
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

pub fn survival_csv(curve: &SurvivalCurve) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["time_s", "prob", "ci_low", "ci_high"]).unwrap();
    for p in &curve.points {
        w.write_record([
            p.time_s.to_string(),
            p.prob.to_string(),
            p.ci_low.to_string(),
            p.ci_high.to_string(),
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

/// Write `report.json`, `bugs.csv` and `survival/<fuzzer>_<bug>.csv` under `dir`.
pub fn write_report(report: &CampaignReport, dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir.join("survival"))?;
    std::fs::write(dir.join("report.json"), report.to_json())?;
    std::fs::write(dir.join("bugs.csv"), bugs_csv(report))?;
    for f in &report.fuzzers {
        for b in &f.bugs {
            let name = format!("{}_{}.csv", sanitize(&f.fuzzer), sanitize(&b.bug_id));
            std::fs::write(dir.join("survival").join(name), survival_csv(&b.survival))?;
        }
    }
    Ok(())
}

/// File-name-safe version of an identifier.
pub fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' })
        .collect()
}
