use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet};
use std::hash::{Hash, Hasher};

use crate::emu::{
    Backend, Capabilities, CpuView, CrashReason, EmuError, ExecutionResult, HookAction,
    HookHandler, HookId, RunLimits, Termination,
};

use super::image::TargetImage;
use super::isa::{Instr, Op, INSTR_SIZE, LR, NO_REG, PC, SP};
use super::{EXC_RETURN, MMIO_BASE, MMIO_SIZE, RAM_BASE};

/// Registers saved on interrupt entry and restored by the handler's return.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct IrqFrame {
    regs: [u32; 16],
    eq: bool,
    lt: bool,
    shadow_depth: usize,
}

/// Complete architectural state. `regs[15]` is the pc.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MachineState {
    pub regs: [u32; 16],
    pub flag_eq: bool,
    pub flag_lt: bool,
    pub ram: Vec<u8>,
    /// Last bytes the guest loaded from each MMIO cell.
    pub mmio_seen: Vec<u8>,
    pub input_cursor: usize,
    pub shadow_stack: Vec<u32>,
    irq: Vec<IrqFrame>,
    pub executed: u64,
}

impl MachineState {
    fn fresh(image: &TargetImage) -> Self {
        let mut regs = [0u32; 16];
        regs[SP as usize] = RAM_BASE.wrapping_add(image.ram_size);
        regs[PC as usize] = image.entry;
        MachineState {
            regs,
            flag_eq: false,
            flag_lt: false,
            ram: vec![0; image.ram_size as usize],
            mmio_seen: vec![0; MMIO_SIZE as usize],
            input_cursor: 0,
            shadow_stack: Vec::new(),
            irq: Vec::new(),
            executed: 0,
        }
    }

    pub fn in_interrupt(&self) -> bool {
        !self.irq.is_empty()
    }
}

enum Region {
    Rom(usize),
    Ram(usize),
    Mmio(usize),
}

fn region(image: &TargetImage, addr: u64, len: u64) -> Option<Region> {
    let ram_base = RAM_BASE as u64;
    let mmio_base = MMIO_BASE as u64;
    if addr >= ram_base && addr + len <= ram_base + image.ram_size as u64 {
        return Some(Region::Ram((addr - ram_base) as usize));
    }
    if addr >= mmio_base && addr + len <= mmio_base + MMIO_SIZE as u64 {
        return Some(Region::Mmio((addr - mmio_base) as usize));
    }
    image.rom_offset(addr, len).map(Region::Rom)
}

fn le(bytes: &[u8]) -> u64 {
    bytes.iter().rev().fold(0u64, |acc, b| (acc << 8) | *b as u64)
}

/// Paused-machine view handed to hook handlers.
struct View<'a> {
    image: &'a TargetImage,
    state: &'a MachineState,
}

impl CpuView for View<'_> {
    fn read_register(&self, reg: u64) -> Result<u64, EmuError> {
        if reg < 16 {
            Ok(self.state.regs[reg as usize] as u64)
        } else {
            Err(EmuError::UnknownRegister(reg))
        }
    }

    fn read_memory(&self, addr: u64, size: u8) -> Result<u64, EmuError> {
        if !matches!(size, 1 | 2 | 4 | 8) {
            return Err(EmuError::InvalidWidth(size));
        }
        let n = size as usize;
        match region(self.image, addr, size as u64).ok_or(EmuError::Unmapped(addr))? {
            Region::Rom(o) => Ok(le(&self.image.rom[o..o + n])),
            Region::Ram(o) => Ok(le(&self.state.ram[o..o + n])),
            Region::Mmio(o) => Ok(le(&self.state.mmio_seen[o..o + n])),
        }
    }

    fn pc(&self) -> u64 {
        self.state.regs[PC as usize] as u64
    }

    fn state_digest(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.state.hash(&mut h);
        h.finish()
    }
}

enum Flow {
    Next,
    Jump(u32),
    Halt,
}

/// The reference backend: one loaded image plus registered hooks.
pub struct MiniVm {
    image: TargetImage,
    hooks: BTreeMap<u64, Vec<HookId>>,
    state: MachineState,
    trace: Option<Vec<u32>>,
}

impl MiniVm {
    pub fn new(image: TargetImage) -> Result<MiniVm, EmuError> {
        image.validate()?;
        let state = MachineState::fresh(&image);
        Ok(MiniVm {
            image,
            hooks: BTreeMap::new(),
            state,
            trace: None,
        })
    }

    pub fn image(&self) -> &TargetImage {
        &self.image
    }

    /// State left by the last `run`.
    pub fn state(&self) -> &MachineState {
        &self.state
    }

    /// Record the pc of every executed instruction during subsequent runs.
    pub fn set_trace(&mut self, on: bool) {
        self.trace = on.then(Vec::new);
    }

    pub fn trace(&self) -> &[u32] {
        self.trace.as_deref().unwrap_or(&[])
    }

    fn crash(&self, reason: CrashReason, pc: u32) -> Termination {
        Termination::Crash {
            reason,
            pc: pc as u64,
            lr: self.state.regs[LR as usize] as u64,
            shadow_stack: self.state.shadow_stack.iter().map(|a| *a as u64).collect(),
        }
    }

    fn reg(&self, r: u8, pc: u32) -> u32 {
        if r == PC {
            pc
        } else {
            self.state.regs[r as usize]
        }
    }

    fn write(&mut self, r: u8, v: u32) -> Flow {
        if r == PC {
            Flow::Jump(v)
        } else {
            self.state.regs[r as usize] = v;
            Flow::Next
        }
    }

    fn load(&mut self, addr: u32, width: u32, input: &[u8], pc: u32) -> Result<u32, Termination> {
        let n = width as usize;
        match region(&self.image, addr as u64, width as u64) {
            Some(Region::Rom(o)) => Ok(le(&self.image.rom[o..o + n]) as u32),
            Some(Region::Ram(o)) => Ok(le(&self.state.ram[o..o + n]) as u32),
            Some(Region::Mmio(o)) => {
                let cur = self.state.input_cursor;
                if cur + n > input.len() {
                    return Err(Termination::InputExhausted);
                }
                let bytes = &input[cur..cur + n];
                self.state.mmio_seen[o..o + n].copy_from_slice(bytes);
                self.state.input_cursor += n;
                Ok(le(bytes) as u32)
            }
            None => Err(self.crash(CrashReason::UnmappedRead, pc)),
        }
    }

    fn store(&mut self, addr: u32, width: u32, value: u32, pc: u32) -> Result<(), Termination> {
        let n = width as usize;
        match region(&self.image, addr as u64, width as u64) {
            Some(Region::Ram(o)) => {
                self.state.ram[o..o + n].copy_from_slice(&value.to_le_bytes()[..n]);
                Ok(())
            }
            // Peripheral writes have no modeled effect.
            Some(Region::Mmio(_)) => Ok(()),
            _ => Err(self.crash(CrashReason::UnmappedWrite, pc)),
        }
    }

    fn exec(&mut self, ins: Instr, pc: u32, input: &[u8]) -> Result<Flow, Termination> {
        let imm = ins.imm;
        let src2 = |vm: &Self, r: u8| if r == NO_REG { imm } else { vm.reg(r, pc) };
        Ok(match ins.op {
            Op::Movi => self.write(ins.a, imm),
            Op::Mov => {
                let v = self.reg(ins.b, pc);
                self.write(ins.a, v)
            }
            Op::Ldb | Op::Ldh | Op::Ldw => {
                let base = if ins.b == NO_REG { 0 } else { self.reg(ins.b, pc) };
                let v = self.load(base.wrapping_add(imm), ins.op.width().unwrap(), input, pc)?;
                self.write(ins.a, v)
            }
            Op::Stb | Op::Sth | Op::Stw => {
                let base = if ins.b == NO_REG { 0 } else { self.reg(ins.b, pc) };
                let v = self.reg(ins.a, pc);
                self.store(base.wrapping_add(imm), ins.op.width().unwrap(), v, pc)?;
                Flow::Next
            }
            Op::Add | Op::Sub | Op::Mul | Op::And | Op::Or | Op::Xor | Op::Shl | Op::Shr => {
                let x = self.reg(ins.b, pc);
                let y = src2(self, ins.c);
                let v = match ins.op {
                    Op::Add => x.wrapping_add(y),
                    Op::Sub => x.wrapping_sub(y),
                    Op::Mul => x.wrapping_mul(y),
                    Op::And => x & y,
                    Op::Or => x | y,
                    Op::Xor => x ^ y,
                    Op::Shl => x.checked_shl(y).unwrap_or(0),
                    _ => x.checked_shr(y).unwrap_or(0),
                };
                self.write(ins.a, v)
            }
            Op::Cmp => {
                let x = self.reg(ins.a, pc);
                let y = src2(self, ins.b);
                self.state.flag_eq = x == y;
                self.state.flag_lt = (x as i32) < (y as i32);
                Flow::Next
            }
            Op::Beq | Op::Bne | Op::Blt | Op::Bge => {
                let s = &self.state;
                let taken = match ins.op {
                    Op::Beq => s.flag_eq,
                    Op::Bne => !s.flag_eq,
                    Op::Blt => s.flag_lt,
                    _ => !s.flag_lt,
                };
                if taken {
                    Flow::Jump(pc.wrapping_add(imm))
                } else {
                    Flow::Next
                }
            }
            Op::Jmp => Flow::Jump(imm),
            Op::Jmpr => Flow::Jump(self.reg(ins.a, pc)),
            Op::Call | Op::Callr => {
                let target = if ins.op == Op::Call { imm } else { self.reg(ins.a, pc) };
                let ret = pc.wrapping_add(INSTR_SIZE);
                self.state.regs[LR as usize] = ret;
                self.state.shadow_stack.push(ret);
                Flow::Jump(target)
            }
            Op::Ret => {
                let lr = self.state.regs[LR as usize];
                if lr == EXC_RETURN && self.state.in_interrupt() {
                    let frame = self.state.irq.pop().unwrap();
                    let resume = self.state.shadow_stack[frame.shadow_depth];
                    self.state.shadow_stack.truncate(frame.shadow_depth);
                    self.state.regs = frame.regs;
                    self.state.flag_eq = frame.eq;
                    self.state.flag_lt = frame.lt;
                    Flow::Jump(resume)
                } else {
                    if self.state.shadow_stack.pop().is_none() {
                        return Err(self.crash(CrashReason::StackUnderflow, pc));
                    }
                    Flow::Jump(lr)
                }
            }
            Op::Halt => Flow::Halt,
        })
    }

    fn enter_interrupt(&mut self, handler: u32) {
        let s = &mut self.state;
        let resume = s.regs[PC as usize];
        s.irq.push(IrqFrame {
            regs: s.regs,
            eq: s.flag_eq,
            lt: s.flag_lt,
            shadow_depth: s.shadow_stack.len(),
        });
        s.shadow_stack.push(resume);
        s.regs[LR as usize] = EXC_RETURN;
        s.regs[PC as usize] = handler;
    }

    fn execute(
        &mut self,
        input: &[u8],
        limits: &RunLimits,
        handler: &mut dyn HookHandler,
        blocks: &mut BTreeSet<u64>,
    ) -> Termination {
        let mut block_start = true;
        let irq = match (self.image.handler, self.image.period) {
            (Some(h), Some(p)) => Some((h, p as u64)),
            _ => None,
        };
        loop {
            if self.state.executed >= limits.max_instructions {
                return Termination::StepLimit;
            }
            let pc = self.state.regs[PC as usize];
            let off = match self.image.rom_offset(pc as u64, INSTR_SIZE as u64) {
                Some(o) => o,
                None => return self.crash(CrashReason::ExecOutsideRom, pc),
            };
            if block_start {
                blocks.insert(pc as u64);
            }
            if let Some(ids) = self.hooks.get(&(pc as u64)) {
                let view = View {
                    image: &self.image,
                    state: &self.state,
                };
                for id in ids {
                    if let HookAction::Abort(bug_id) = handler.on_hook(*id, &view) {
                        return Termination::OracleAbort { bug_id };
                    }
                }
            }
            let bytes: &[u8; 8] = self.image.rom[off..off + 8].try_into().unwrap();
            let ins = match Instr::decode(bytes) {
                Some(i) => i,
                None => return self.crash(CrashReason::InvalidOpcode, pc),
            };
            let flow = match self.exec(ins, pc, input) {
                Ok(f) => f,
                Err(t) => return t,
            };
            self.state.executed += 1;
            if let Some(t) = self.trace.as_mut() {
                t.push(pc);
            }
            match flow {
                Flow::Halt => return Termination::HaltedNormally,
                Flow::Next => {
                    self.state.regs[PC as usize] = pc.wrapping_add(INSTR_SIZE);
                    // Fall-through of a conditional branch starts a block too.
                    block_start = matches!(ins.op, Op::Beq | Op::Bne | Op::Blt | Op::Bge);
                }
                Flow::Jump(t) => {
                    self.state.regs[PC as usize] = t;
                    block_start = true;
                }
            }
            if let Some((h, period)) = irq {
                if self.state.executed % period == 0 && !self.state.in_interrupt() {
                    self.enter_interrupt(h);
                    block_start = true;
                }
            }
        }
    }
}

impl Backend for MiniVm {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            has_shadow_stack: true,
            has_interrupts: true,
        }
    }

    fn register_hook(&mut self, address: u64, hook: HookId) -> Result<(), EmuError> {
        if !self.image.is_executable(address) {
            return Err(EmuError::NotExecutable(address));
        }
        self.hooks.entry(address).or_default().push(hook);
        Ok(())
    }

    fn clear_hooks(&mut self) {
        self.hooks.clear();
    }

    fn run(
        &mut self,
        input: &[u8],
        limits: &RunLimits,
        handler: &mut dyn HookHandler,
    ) -> ExecutionResult {
        self.state = MachineState::fresh(&self.image);
        if let Some(t) = self.trace.as_mut() {
            t.clear();
        }
        let mut blocks = BTreeSet::new();
        let termination = self.execute(input, limits, handler, &mut blocks);
        ExecutionResult {
            termination,
            instructions_executed: self.state.executed,
            covered_blocks: blocks,
        }
    }
}
