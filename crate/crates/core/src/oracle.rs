//! Bug interpreter: registers Raven reflection points as backend hooks,
//! dispatches introspection functions and turns their reports into per-input
//! bug states.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emu::{
    Backend, CpuView, EmuError, ExecutionResult, HookAction, HookHandler, HookId, RunLimits,
    Termination,
};
use crate::raven::{
    eval_hook, parse_raven, GlobalState, Intrinsics, RavenProgram, RavenSource, ReportKind,
    DEFAULT_STEP_BUDGET,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BugState {
    NotReached,
    Reached,
    Triggered,
    Detected,
}

impl fmt::Display for BugState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BugState::NotReached => "not_reached",
            BugState::Reached => "reached",
            BugState::Triggered => "triggered",
            BugState::Detected => "detected",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Queue,
    Crash,
}

/// One entry of a Raven's metadata sidecar.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugMeta {
    pub bug_id: String,
    #[serde(default)]
    pub cwe: Option<String>,
    #[serde(default)]
    pub false_positive: bool,
    #[serde(default)]
    pub active: bool,
}

#[derive(Debug, Clone)]
pub struct LoadedRaven {
    pub origin: String,
    pub program: RavenProgram,
    pub meta: Vec<BugMeta>,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{0}")]
    Parse(#[from] crate::raven::Diagnostic),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: bad metadata: {source}")]
    Meta {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("target: {0}")]
    Target(EmuError),
    #[error("{origin}: reflection point {address:#x} for `{function}` rejected: {source}")]
    Hook {
        origin: String,
        address: u64,
        function: String,
        source: EmuError,
    },
}

/// The Ravens of one target.
#[derive(Debug, Clone, Default)]
pub struct RavenSet {
    pub ravens: Vec<LoadedRaven>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MetaFile {
    Many(Vec<BugMeta>),
    One(BugMeta),
}

/// Parse a metadata sidecar: one object or an array of them.
pub fn parse_meta(raw: &str) -> Result<Vec<BugMeta>, serde_json::Error> {
    Ok(match serde_json::from_str(raw)? {
        MetaFile::Many(v) => v,
        MetaFile::One(m) => vec![m],
    })
}

impl RavenSet {
    pub fn from_sources(sources: &[(RavenSource, Vec<BugMeta>)]) -> Result<RavenSet, LoadError> {
        let mut ravens = Vec::new();
        for (src, meta) in sources {
            let parsed = parse_raven(src)?;
            ravens.push(LoadedRaven {
                origin: src.origin.clone(),
                program: parsed.program,
                meta: meta.clone(),
            });
        }
        Ok(RavenSet { ravens })
    }

    /// Every `*.raven` file in `dir` (sorted by name), each with an optional
    /// `<stem>.json` metadata sidecar.
    pub fn load_dir(dir: &Path) -> Result<RavenSet, LoadError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| LoadError::Io { path, source }
        };
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(io(dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "raven"))
            .collect();
        files.sort();
        let mut sources = Vec::new();
        for f in files {
            let text = std::fs::read_to_string(&f).map_err(io(&f))?;
            let sidecar = f.with_extension("json");
            let meta = if sidecar.exists() {
                let raw = std::fs::read_to_string(&sidecar).map_err(io(&sidecar))?;
                parse_meta(&raw).map_err(|source| LoadError::Meta {
                    path: sidecar.clone(),
                    source,
                })?
            } else {
                Vec::new()
            };
            sources.push((RavenSource::new(text, f.display().to_string()), meta));
        }
        RavenSet::from_sources(&sources)
    }

    /// Append another set's Ravens, e.g. from a second `--ravens` directory.
    pub fn extend(&mut self, other: RavenSet) {
        self.ravens.extend(other.ravens);
    }

    /// All bug IDs named by reports or metadata, sorted.
    pub fn bug_ids(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for r in &self.ravens {
            out.extend(r.program.bug_ids());
            out.extend(r.meta.iter().map(|m| m.bug_id.clone()));
        }
        out
    }

    pub fn meta(&self, bug_id: &str) -> Option<&BugMeta> {
        self.ravens.iter().flat_map(|r| &r.meta).find(|m| m.bug_id == bug_id)
    }

    /// `FP_` prefix or the metadata flag.
    pub fn is_false_positive(&self, bug_id: &str) -> bool {
        bug_id.starts_with("FP_") || self.meta(bug_id).is_some_and(|m| m.false_positive)
    }

    /// Bugs marked active in metadata.
    pub fn default_active(&self) -> BTreeSet<String> {
        self.ravens
            .iter()
            .flat_map(|r| &r.meta)
            .filter(|m| m.active)
            .map(|m| m.bug_id.clone())
            .collect()
    }

    /// Origins of the Ravens that report `bug_id`.
    pub fn origins_of(&self, bug_id: &str) -> Vec<&str> {
        self.ravens
            .iter()
            .filter(|r| r.program.bug_ids().contains(bug_id))
            .map(|r| r.origin.as_str())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Replay,
    Live,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugObservation {
    pub input_id: String,
    pub bug_id: String,
    pub state: BugState,
    pub false_positive: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    pub multi_bug: bool,
    pub label_mismatch: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputVerdict {
    pub observations: Vec<BugObservation>,
    pub first_triggered: Option<String>,
    pub flags: Flags,
    pub diagnostics: Vec<String>,
}

/// One `report_*` call as seen during a replay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportEvent {
    pub hook: HookId,
    pub kind: ReportKind,
    pub bug_id: String,
}

struct Bridge<'a> {
    cpu: &'a dyn CpuView,
    reports: Vec<(ReportKind, String)>,
}

impl Intrinsics for Bridge<'_> {
    fn reg_state(&mut self, reg: u64) -> Result<u64, String> {
        self.cpu.read_register(reg).map_err(|e| e.to_string())
    }

    fn mem_read(&mut self, addr: u64, size: u8) -> Result<u64, String> {
        self.cpu.read_memory(addr, size).map_err(|e| e.to_string())
    }

    fn report(&mut self, kind: ReportKind, bug_id: &str) {
        self.reports.push((kind, bug_id.to_string()));
    }
}

/// Oracle state for one backend session.
pub struct OracleSession<'a> {
    set: &'a RavenSet,
    /// HookId -> (raven index, function name).
    hooks: Vec<(usize, String)>,
    globals: Vec<GlobalState>,
    /// Running state; `Triggered` here means "condition satisfied".
    states: BTreeMap<String, BugState>,
    trigger_order: Vec<String>,
    events: Vec<ReportEvent>,
    diagnostics: Vec<String>,
    mode: Mode,
    active: BTreeSet<String>,
    step_budget: u64,
}

impl<'a> OracleSession<'a> {
    /// Register every reflection point of `set` on `backend`.
    pub fn load(
        set: &'a RavenSet,
        backend: &mut dyn Backend,
        mode: Mode,
        active: BTreeSet<String>,
    ) -> Result<OracleSession<'a>, LoadError> {
        let mut hooks = Vec::new();
        for (i, r) in set.ravens.iter().enumerate() {
            for e in &r.program.reflection_table {
                let id = hooks.len() as HookId;
                backend.register_hook(e.address, id).map_err(|source| LoadError::Hook {
                    origin: r.origin.clone(),
                    address: e.address,
                    function: e.function.clone(),
                    source,
                })?;
                hooks.push((i, e.function.clone()));
            }
        }
        let mut s = OracleSession {
            set,
            hooks,
            globals: Vec::new(),
            states: BTreeMap::new(),
            trigger_order: Vec::new(),
            events: Vec::new(),
            diagnostics: Vec::new(),
            mode,
            active,
            step_budget: DEFAULT_STEP_BUDGET,
        };
        s.reset();
        Ok(s)
    }

    pub fn set_step_budget(&mut self, budget: u64) {
        self.step_budget = budget;
    }

    pub fn hook_count(&self) -> usize {
        self.hooks.len()
    }

    /// Fresh globals and bug states for the next input.
    pub fn reset(&mut self) {
        self.globals = self.set.ravens.iter().map(|r| GlobalState::new(&r.program)).collect();
        self.states = self
            .set
            .bug_ids()
            .into_iter()
            .map(|b| (b, BugState::NotReached))
            .collect();
        self.trigger_order.clear();
        self.events.clear();
        self.diagnostics.clear();
    }

    /// Whether satisfying `bug_id` aborts execution.
    pub fn live_guard(&self, bug_id: &str) -> bool {
        self.mode == Mode::Live && self.active.contains(bug_id)
    }

    pub fn events(&self) -> &[ReportEvent] {
        &self.events
    }

    pub fn globals(&self) -> &[GlobalState] {
        &self.globals
    }

    /// Reset, run `input` on `backend` with this session as hook handler, finalize.
    pub fn replay(
        &mut self,
        backend: &mut dyn Backend,
        input_id: &str,
        input: &[u8],
        limits: &RunLimits,
        label: Option<Label>,
    ) -> (ExecutionResult, InputVerdict) {
        self.reset();
        let result = backend.run(input, limits, self);
        let verdict = self.finalize(&result, input_id, label);
        (result, verdict)
    }

    pub fn finalize(&self, result: &ExecutionResult, input_id: &str, label: Option<Label>) -> InputVerdict {
        let crashed = result.termination.is_crash();
        let observations = self
            .states
            .iter()
            .map(|(bug, s)| {
                let state = match s {
                    BugState::Triggered => {
                        let aborted_here = matches!(
                            &result.termination,
                            Termination::OracleAbort { bug_id } if bug_id == bug
                        );
                        if crashed || aborted_here {
                            BugState::Detected
                        } else {
                            BugState::Triggered
                        }
                    }
                    other => *other,
                };
                BugObservation {
                    input_id: input_id.to_string(),
                    bug_id: bug.clone(),
                    state,
                    false_positive: self.set.is_false_positive(bug),
                }
            })
            .collect();
        let label_mismatch = match label {
            Some(Label::Crash) => !crashed,
            Some(Label::Queue) => crashed,
            None => false,
        };
        InputVerdict {
            observations,
            first_triggered: self.trigger_order.first().cloned(),
            flags: Flags {
                multi_bug: self.trigger_order.len() >= 2,
                label_mismatch,
            },
            diagnostics: self.diagnostics.clone(),
        }
    }

    fn record(&mut self, hook: HookId, kind: ReportKind, bug_id: &str) {
        let new = match kind {
            ReportKind::Reached => BugState::Reached,
            ReportKind::DetectedTriggered => BugState::Triggered,
        };
        let slot = self.states.entry(bug_id.to_string()).or_insert(BugState::NotReached);
        if new > *slot {
            *slot = new;
        }
        if new == BugState::Triggered && !self.trigger_order.iter().any(|b| b == bug_id) {
            self.trigger_order.push(bug_id.to_string());
        }
        self.events.push(ReportEvent {
            hook,
            kind,
            bug_id: bug_id.to_string(),
        });
    }
}

impl HookHandler for OracleSession<'_> {
    fn on_hook(&mut self, hook: HookId, cpu: &dyn CpuView) -> HookAction {
        let (ri, func) = match self.hooks.get(hook as usize) {
            Some((ri, f)) => (*ri, f.clone()),
            None => return HookAction::Continue,
        };
        let raven = &self.set.ravens[ri];
        let saved = self.globals[ri].clone();
        let mut bridge = Bridge {
            cpu,
            reports: Vec::new(),
        };
        let outcome = eval_hook(
            &raven.program,
            &func,
            &mut bridge,
            &mut self.globals[ri],
            self.step_budget,
        );
        if let Err(e) = outcome {
            self.globals[ri] = saved;
            self.diagnostics
                .push(format!("{} at {:#x}: {e}", raven.origin, cpu.pc()));
        }
        let mut abort = None;
        for (kind, bug) in bridge.reports {
            self.record(hook, kind, &bug);
            if kind == ReportKind::DetectedTriggered && abort.is_none() && self.live_guard(&bug) {
                abort = Some(bug);
            }
        }
        match abort {
            Some(b) => HookAction::Abort(b),
            None => HookAction::Continue,
        }
    }
}
