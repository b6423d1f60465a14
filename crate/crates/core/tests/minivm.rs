use frb_core::emu::{
    Backend, CpuView, CrashReason, EmuError, HookAction, HookHandler, HookId, NoHooks, RunLimits, Termination,
};
use frb_core::fixtures::build_fixtures;
use frb_core::minivm::{assemble, assemble_with_labels, MiniVm, TargetImage, EXC_RETURN};

/// Calls a closure at every hook.
struct With<F>(F);

impl<F: FnMut(HookId, &dyn CpuView) -> HookAction> HookHandler for With<F> {
    fn on_hook(&mut self, hook: HookId, cpu: &dyn CpuView) -> HookAction {
        (self.0)(hook, cpu)
    }
}

fn vm(src: &str) -> (MiniVm, std::collections::BTreeMap<String, u32>) {
    let (img, labels) = assemble_with_labels(src).unwrap();
    (MiniVm::new(img).unwrap(), labels)
}

const LOOP3: &str = "
.base 0x08000000
.entry start
.org 0x08005e20
start:
    MOVI r1, #0
spot:
    ADD r1, r1, #1
    CMP r1, #3
    BLT spot
    HALT
";

#[test]
fn entry_hook_fires_once_before_first_instruction() {
    let (mut m, labels) = vm(".entry start\nstart: MOVI r0, #7\nHALT\n");
    m.register_hook(labels["start"] as u64, 0).unwrap();
    let mut seen = Vec::new();
    m.run(&[], &RunLimits::default(), &mut With(|_, cpu: &dyn CpuView| {
        seen.push((cpu.pc(), cpu.read_register(0).unwrap()));
        HookAction::Continue
    }));
    assert_eq!(seen, vec![(0, 0)]);
}

#[test]
fn hook_count_matches_instruction_trace() {
    let (mut m, labels) = vm(LOOP3);
    let spot = labels["spot"];
    assert_eq!(spot, 0x0800_5e28);
    m.set_trace(true);
    m.register_hook(spot as u64, 0).unwrap();
    let mut fired = 0;
    let r = m.run(&[], &RunLimits::default(), &mut With(|_, _: &dyn CpuView| {
        fired += 1;
        HookAction::Continue
    }));
    assert_eq!(r.termination, Termination::HaltedNormally);
    let in_trace = m.trace().iter().filter(|pc| **pc == spot).count();
    assert_eq!(in_trace, 3);
    assert_eq!(fired, in_trace);
    assert_eq!(r.instructions_executed as usize, m.trace().len());
}

#[test]
fn hooks_at_one_address_fire_in_registration_order() {
    let (mut m, labels) = vm(LOOP3);
    m.register_hook(labels["spot"] as u64, 7).unwrap();
    m.register_hook(labels["spot"] as u64, 3).unwrap();
    let mut ids = Vec::new();
    m.run(&[], &RunLimits::default(), &mut With(|id, _: &dyn CpuView| {
        ids.push(id);
        HookAction::Continue
    }));
    assert_eq!(ids, vec![7, 3, 7, 3, 7, 3]);
}

#[test]
fn hook_outside_rom_is_rejected() {
    let (mut m, _) = vm("HALT\n");
    assert_eq!(m.register_hook(0x2000_0000, 0), Err(EmuError::NotExecutable(0x2000_0000)));
    assert!(m.register_hook(0x8, 0).is_err());
    assert!(m.register_hook(0x0, 0).is_ok());
}

#[test]
fn register_reads() {
    let (mut m, labels) = vm("MOVI r0, #7\nspot: HALT\n");
    m.register_hook(labels["spot"] as u64, 0).unwrap();
    let mut got = None;
    m.run(&[], &RunLimits::default(), &mut With(|_, cpu: &dyn CpuView| {
        got = Some((
            cpu.read_register(0),
            cpu.read_register(15),
            cpu.read_register(13),
            cpu.read_register(99),
        ));
        HookAction::Continue
    }));
    let (r0, pc, sp, bad) = got.unwrap();
    assert_eq!(r0, Ok(7));
    assert_eq!(pc, Ok(labels["spot"] as u64));
    assert_eq!(sp, Ok(0x2000_1000));
    assert_eq!(bad, Err(EmuError::UnknownRegister(99)));
}

#[test]
fn memory_reads_are_little_endian_and_side_effect_free() {
    let src = "
.equ MMIO, 0x40000000
    MOVI r1, #0x0800f7e4
    STW r1, [0x20000104]
    LDH r2, [MMIO+2]
spot:
    HALT
";
    let (mut m, labels) = vm(src);
    m.register_hook(labels["spot"] as u64, 0).unwrap();
    let mut got = Vec::new();
    m.run(&[0x34, 0x12], &RunLimits::default(), &mut With(|_, cpu: &dyn CpuView| {
        let before = cpu.state_digest();
        got.push(cpu.read_memory(0x2000_0104, 4));
        got.push(cpu.read_memory(0x2000_0104, 1));
        got.push(cpu.read_memory(0x2000_0104, 3));
        got.push(cpu.read_memory(0x4000_0000, 4));
        got.push(cpu.read_memory(0x4000_0002, 2));
        got.push(cpu.read_memory(0x4000_0002, 2));
        got.push(cpu.read_memory(0x3000_0000, 4));
        got.push(cpu.read_memory(0x0, 8).map(|_| 1));
        assert_eq!(before, cpu.state_digest());
        HookAction::Continue
    }));
    assert_eq!(
        got,
        vec![
            Ok(0x0800_f7e4),
            Ok(0xe4),
            Err(EmuError::InvalidWidth(3)),
            Ok(0x1234_0000),
            Ok(0x1234),
            Ok(0x1234),
            Err(EmuError::Unmapped(0x3000_0000)),
            Ok(1),
        ]
    );
    assert_eq!(m.state().regs[2], 0x1234);
}

#[test]
fn untouched_mmio_reads_zero() {
    let (mut m, labels) = vm("spot: HALT\n");
    m.register_hook(labels["spot"] as u64, 0).unwrap();
    let mut v = None;
    m.run(&[1, 2, 3], &RunLimits::default(), &mut With(|_, cpu: &dyn CpuView| {
        v = Some(cpu.read_memory(0x4000_0000, 8));
        HookAction::Continue
    }));
    assert_eq!(v, Some(Ok(0)));
}

#[test]
fn empty_input_exhausts_before_first_branch() {
    let suite = build_fixtures().unwrap();
    let b = suite.bundle("overflow").unwrap();
    let mut m = MiniVm::new(b.image.clone()).unwrap();
    let r = m.run(&[], &RunLimits::default(), &mut NoHooks);
    assert_eq!(r.termination, Termination::InputExhausted);
    assert_eq!(r.instructions_executed, 0);
}

#[test]
fn overflow_crash_at_traced_fault_site() {
    let suite = build_fixtures().unwrap();
    let b = suite.bundle("overflow").unwrap();
    let mut m = MiniVm::new(b.image.clone()).unwrap();
    m.set_trace(true);
    let mut input = vec![17u8];
    input.extend([0x58; 17]);
    let r = m.run(&input, &RunLimits::default(), &mut NoHooks);
    let put = b.label("put");
    match &r.termination {
        Termination::Crash { reason, pc, .. } => {
            assert_eq!(*reason, CrashReason::UnmappedWrite);
            assert_eq!(*pc, put);
        }
        t => panic!("expected a crash, got {t:?}"),
    }
    // The faulting store is not counted; the trace ends with the LDB before it
    // and holds 16 completed stores.
    let trace = m.trace();
    assert_eq!(*trace.last().unwrap() as u64, put - 8);
    assert_eq!(trace.iter().filter(|pc| **pc as u64 == put).count(), 16);
    assert_eq!(r.instructions_executed as usize, trace.len());
}

#[test]
fn step_limit_on_infinite_loop() {
    let (mut m, _) = vm("spin: JMP spin\n");
    let r = m.run(&[], &RunLimits { max_instructions: 100 }, &mut NoHooks);
    assert_eq!(r.termination, Termination::StepLimit);
    assert_eq!(r.instructions_executed, 100);
}

#[test]
fn wild_jump_and_stack_underflow() {
    let (mut m, _) = vm("MOVI r1, #0x41414141\nJMPR r1\n");
    match m.run(&[], &RunLimits::default(), &mut NoHooks).termination {
        Termination::Crash { reason, pc, .. } => {
            assert_eq!(reason, CrashReason::ExecOutsideRom);
            assert_eq!(pc, 0x4141_4141);
        }
        t => panic!("{t:?}"),
    }
    let (mut m, _) = vm("RET\n");
    match m.run(&[], &RunLimits::default(), &mut NoHooks).termination {
        Termination::Crash { reason, pc, shadow_stack, .. } => {
            assert_eq!(reason, CrashReason::StackUnderflow);
            assert_eq!(pc, 0);
            assert!(shadow_stack.is_empty());
        }
        t => panic!("{t:?}"),
    }
}

#[test]
fn call_and_ret_maintain_shadow_stack() {
    let src = "
    CALL f
    HALT
f:  MOV r9, lr
    CALL g
    MOV lr, r9
    RET
g:  MOVI r1, #0x30000000
    LDW r2, [r1+0]
";
    let (mut m, labels) = vm(src);
    match m.run(&[], &RunLimits::default(), &mut NoHooks).termination {
        Termination::Crash { reason, pc, lr, shadow_stack } => {
            assert_eq!(reason, CrashReason::UnmappedRead);
            assert_eq!(pc, labels["g"] as u64 + 8);
            assert_eq!(lr, labels["f"] as u64 + 16);
            assert_eq!(shadow_stack, vec![8, labels["f"] as u64 + 16]);
        }
        t => panic!("{t:?}"),
    }
}

#[test]
fn interrupt_entry_and_exit_restore_context() {
    let src = "
.entry start
.handler isr
.period 5
.equ COUNT, 0x20000000
start:
    MOVI r1, #0
loop:
    ADD r1, r1, #1
    CMP r1, #20
    BLT loop
    HALT
isr:
    MOVI r1, #0x7777
    CMP r1, #0
    LDW r2, [COUNT]
    ADD r2, r2, #1
    STW r2, [COUNT]
    RET
";
    let (mut m, labels) = vm(src);
    m.register_hook(labels["isr"] as u64, 0).unwrap();
    let mut entries = Vec::new();
    let r = m.run(&[], &RunLimits::default(), &mut With(|_, cpu: &dyn CpuView| {
        entries.push((cpu.read_register(14).unwrap(), cpu.read_memory(0x2000_0000, 4).unwrap()));
        HookAction::Continue
    }));
    assert_eq!(r.termination, Termination::HaltedNormally);
    // The handler clobbers r1 and the flags; main still counts to 20.
    assert_eq!(m.state().regs[1], 20);
    let count = m.state().ram[0] as usize;
    assert_eq!(count, entries.len());
    assert!(count > 3);
    assert!(entries.iter().all(|(lr, _)| *lr == EXC_RETURN as u64));
    assert!(entries.iter().enumerate().all(|(i, (_, c))| *c == i as u64));
    assert!(m.state().shadow_stack.is_empty());
}

#[test]
fn interrupt_timing_shadow_stacks() {
    let suite = build_fixtures().unwrap();
    let b = suite.bundle("interrupt_timing").unwrap();
    let mut m = MiniVm::new(b.image.clone()).unwrap();
    let mut stacks = Vec::new();
    for name in ["bad_main", "bad_filter", "bad_smooth"] {
        let r = m.run(&b.seed(name).unwrap().bytes(), &RunLimits::default(), &mut NoHooks);
        match r.termination {
            Termination::Crash { pc, lr, shadow_stack, .. } => {
                assert_eq!(pc, b.label("tick_read"));
                assert_eq!(lr, EXC_RETURN as u64);
                stacks.push(shadow_stack);
            }
            t => panic!("{name}: {t:?}"),
        }
    }
    let ret_filter = b.label("run_filter") + 8;
    assert_eq!(stacks[0], vec![b.label("loop") + 8]);
    assert_eq!(stacks[1], vec![ret_filter, b.label("filter_loop")]);
    assert_eq!(stacks[2][..2], [ret_filter, b.label("filter_loop") + 8]);
    assert_eq!(stacks[2].len(), 3);
}

#[test]
fn fixture_runs_are_deterministic_and_cover_rom_only() {
    let suite = build_fixtures().unwrap();
    for b in &suite.bundles {
        let mut m = MiniVm::new(b.image.clone()).unwrap();
        for s in &b.seeds {
            let a = m.run(&s.bytes(), &RunLimits::default(), &mut NoHooks);
            let c = m.run(&s.bytes(), &RunLimits::default(), &mut NoHooks);
            assert_eq!(a, c, "{}/{}", b.name, s.name);
            for blk in &a.covered_blocks {
                assert!(b.image.is_executable(*blk), "{}/{}: block {blk:#x}", b.name, s.name);
            }
        }
    }
}

#[test]
fn read_only_hooks_do_not_perturb_execution() {
    let suite = build_fixtures().unwrap();
    for b in &suite.bundles {
        let mut plain = MiniVm::new(b.image.clone()).unwrap();
        let mut hooked = MiniVm::new(b.image.clone()).unwrap();
        for addr in b.labels.values() {
            if b.image.is_executable(*addr as u64) {
                hooked.register_hook(*addr as u64, 0).unwrap();
            }
        }
        for s in &b.seeds {
            let a = plain.run(&s.bytes(), &RunLimits::default(), &mut NoHooks);
            let h = hooked.run(&s.bytes(), &RunLimits::default(), &mut With(|_, cpu: &dyn CpuView| {
                let d = cpu.state_digest();
                for r in 0..16 {
                    cpu.read_register(r).unwrap();
                }
                let _ = cpu.read_memory(0x4000_0000, 8);
                let _ = cpu.read_memory(0x2000_0000, 4);
                assert_eq!(d, cpu.state_digest());
                HookAction::Continue
            }));
            assert_eq!(a, h, "{}/{}", b.name, s.name);
        }
    }
}

#[test]
fn images_round_trip_through_bytes() {
    let suite = build_fixtures().unwrap();
    for b in &suite.bundles {
        let back = TargetImage::from_bytes(&b.image.to_bytes()).unwrap();
        assert_eq!(back, b.image);
    }
    assert!(TargetImage::from_bytes(b"nope").is_err());
    assert!(assemble(".entry nowhere\nHALT\n").is_err());
}
