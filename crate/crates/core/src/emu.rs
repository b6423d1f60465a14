//! Backend-neutral emulator contract used by the bug interpreter.
//!
//! A backend owns one loaded target. Hooks are registered before `run`; each
//! `run` starts from a fresh machine state, so one backend value can replay many
//! inputs in sequence. See `docs/backend-api.md` for the versioned description.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Version of the contract below. Bumped on any change visible to adapters.
pub const BACKEND_API_VERSION: &str = "1.0";

/// Default per-input instruction limit.
pub const DEFAULT_STEP_LIMIT: u64 = 10_000_000;

pub type HookId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub has_shadow_stack: bool,
    pub has_interrupts: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrashReason {
    UnmappedRead,
    UnmappedWrite,
    ExecOutsideRom,
    InvalidOpcode,
    StackUnderflow,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    HaltedNormally,
    InputExhausted,
    Crash {
        reason: CrashReason,
        pc: u64,
        lr: u64,
        /// Return addresses, outermost first.
        shadow_stack: Vec<u64>,
    },
    StepLimit,
    OracleAbort {
        bug_id: String,
    },
}

impl Termination {
    pub fn is_crash(&self) -> bool {
        matches!(self, Termination::Crash { .. })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Termination::HaltedNormally => "halted_normally",
            Termination::InputExhausted => "input_exhausted",
            Termination::Crash { .. } => "crash",
            Termination::StepLimit => "step_limit",
            Termination::OracleAbort { .. } => "oracle_abort",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub termination: Termination,
    pub instructions_executed: u64,
    pub covered_blocks: BTreeSet<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunLimits {
    pub max_instructions: u64,
}

impl Default for RunLimits {
    fn default() -> Self {
        RunLimits {
            max_instructions: DEFAULT_STEP_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmuError {
    #[error("unknown register {0}")]
    UnknownRegister(u64),
    #[error("invalid width {0}")]
    InvalidWidth(u8),
    #[error("unmapped address {0:#x}")]
    Unmapped(u64),
    #[error("address {0:#x} is not executable")]
    NotExecutable(u64),
    #[error("malformed image: {0}")]
    Image(String),
}

/// Read-only view of a paused machine.
pub trait CpuView {
    /// Register value zero-extended to 64 bits.
    fn read_register(&self, reg: u64) -> Result<u64, EmuError>;
    /// Little-endian load of `size` bytes; `size` must be 1, 2, 4 or 8.
    fn read_memory(&self, addr: u64, size: u8) -> Result<u64, EmuError>;
    fn pc(&self) -> u64;
    /// Digest of all guest-visible state, for checking that introspection has no side effects.
    fn state_digest(&self) -> u64;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HookAction {
    Continue,
    /// Stop execution with `Termination::OracleAbort`.
    Abort(String),
}

pub trait HookHandler {
    fn on_hook(&mut self, hook: HookId, cpu: &dyn CpuView) -> HookAction;
}

/// Handler that ignores every hook.
pub struct NoHooks;

impl HookHandler for NoHooks {
    fn on_hook(&mut self, _hook: HookId, _cpu: &dyn CpuView) -> HookAction {
        HookAction::Continue
    }
}

pub trait Backend: Send {
    fn capabilities(&self) -> Capabilities;

    /// Pause before the instruction at `address` executes and call the handler with `hook`.
    /// Several hooks at one address fire in registration order.
    fn register_hook(&mut self, address: u64, hook: HookId) -> Result<(), EmuError>;

    fn clear_hooks(&mut self);

    /// Execute `input` from a fresh machine state.
    fn run(
        &mut self,
        input: &[u8],
        limits: &RunLimits,
        handler: &mut dyn HookHandler,
    ) -> ExecutionResult;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn termination_json_is_tagged() {
        let t = Termination::Crash {
            reason: CrashReason::UnmappedWrite,
            pc: 0x40,
            lr: 8,
            shadow_stack: vec![8],
        };
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(
            s,
            r#"{"kind":"crash","reason":"unmapped_write","pc":64,"lr":8,"shadow_stack":[8]}"#
        );
        assert_eq!(serde_json::from_str::<Termination>(&s).unwrap(), t);
        assert_eq!(
            serde_json::to_string(&Termination::HaltedNormally).unwrap(),
            r#"{"kind":"halted_normally"}"#
        );
    }
}
