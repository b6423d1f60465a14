use std::collections::BTreeMap;

use frb_core::fixtures::build_fixtures;
use frb_core::raven::{
    eval_hook, parse_raven, print, GlobalState, IntType, Intrinsics, RavenSource, ReportKind, DEFAULT_STEP_BUDGET,
};
use num::{BigInt, Integer, One, Signed, ToPrimitive, Zero};
use proptest::prelude::*;

/// Registers and memory drawn from a fixed table; records reports.
#[derive(Default)]
struct Fake {
    regs: [u64; 16],
    mem: BTreeMap<u64, u8>,
    reports: Vec<(ReportKind, String)>,
}

impl Intrinsics for Fake {
    fn reg_state(&mut self, reg: u64) -> Result<u64, String> {
        self.regs.get(reg as usize).copied().ok_or_else(|| format!("no register {reg}"))
    }
    fn mem_read(&mut self, addr: u64, size: u8) -> Result<u64, String> {
        let mut v = 0u64;
        for i in (0..size as u64).rev() {
            v = v << 8 | *self.mem.get(&addr.wrapping_add(i)).unwrap_or(&0) as u64;
        }
        Ok(v)
    }
    fn report(&mut self, kind: ReportKind, bug_id: &str) {
        self.reports.push((kind, bug_id.to_string()));
    }
}

// Independent model of the integer semantics, on unbounded integers.

#[derive(Debug, Clone, Copy, PartialEq)]
struct Ty {
    width: u32,
    signed: bool,
}

const TYPES: [(&str, Ty); 10] = [
    ("uint8_t", Ty { width: 8, signed: false }),
    ("int8_t", Ty { width: 8, signed: true }),
    ("uint16_t", Ty { width: 16, signed: false }),
    ("int16_t", Ty { width: 16, signed: true }),
    ("uint32_t", Ty { width: 32, signed: false }),
    ("int32_t", Ty { width: 32, signed: true }),
    ("uint64_t", Ty { width: 64, signed: false }),
    ("int64_t", Ty { width: 64, signed: true }),
    ("int", Ty { width: 32, signed: true }),
    ("unsigned", Ty { width: 32, signed: false }),
];

fn reduce(v: BigInt, t: Ty) -> BigInt {
    let m = BigInt::one() << t.width;
    let r = v.mod_floor(&m);
    if t.signed && r >= (BigInt::one() << (t.width - 1)) {
        r - m
    } else {
        r
    }
}

fn promote(t: Ty) -> Ty {
    if t.width < 32 {
        Ty { width: 32, signed: true }
    } else {
        t
    }
}

fn common(a: Ty, b: Ty) -> Ty {
    let (a, b) = (promote(a), promote(b));
    if a.width != b.width {
        if a.width > b.width {
            a
        } else {
            b
        }
    } else {
        Ty { width: a.width, signed: a.signed && b.signed }
    }
}

#[derive(Debug, Clone)]
enum E {
    Leaf(usize),
    Un(&'static str, Box<E>),
    Bin(&'static str, Box<E>, Box<E>),
}

fn print_e(e: &E) -> String {
    match e {
        E::Leaf(i) => format!("v{i}"),
        E::Un(op, a) => format!("{op}({})", print_e(a)),
        E::Bin(op, a, b) => format!("({} {op} {})", print_e(a), print_e(b)),
    }
}

/// `None` means division by zero.
fn model(e: &E, leaves: &[(BigInt, Ty)]) -> Option<(BigInt, Ty)> {
    Some(match e {
        E::Leaf(i) => leaves[*i].clone(),
        E::Un(op, a) => {
            let (v, t) = model(a, leaves)?;
            let t = promote(t);
            match *op {
                "-" => (reduce(-v, t), t),
                "~" => (reduce(-v - 1, t), t),
                _ => (BigInt::from(v.is_zero() as i32), Ty { width: 32, signed: true }),
            }
        }
        E::Bin(op, a, b) => {
            let (x, tx) = model(a, leaves)?;
            let bool_ty = Ty { width: 32, signed: true };
            let flag = |c: bool| (BigInt::from(c as i32), bool_ty);
            // The right operand of a decided && or || is never evaluated.
            if (*op == "&&" && x.is_zero()) || (*op == "||" && !x.is_zero()) {
                return Some(flag(*op == "||"));
            }
            let (y, ty) = model(b, leaves)?;
            if *op == "<<" || *op == ">>" {
                let t = promote(tx);
                let x = reduce(x, t);
                let out_of_range = y.is_negative() || y >= BigInt::from(t.width);
                let r = if out_of_range {
                    if *op == ">>" && x.is_negative() {
                        BigInt::from(-1)
                    } else {
                        BigInt::zero()
                    }
                } else {
                    let n = y.to_u32().unwrap();
                    if *op == "<<" {
                        x << n
                    } else {
                        x.div_floor(&(BigInt::one() << n))
                    }
                };
                return Some((reduce(r, t), t));
            }
            if *op == "&&" {
                return Some(flag(!x.is_zero() && !y.is_zero()));
            }
            if *op == "||" {
                return Some(flag(!x.is_zero() || !y.is_zero()));
            }
            let t = common(tx, ty);
            let (x, y) = (reduce(x, t), reduce(y, t));
            match *op {
                "+" => (reduce(x + y, t), t),
                "-" => (reduce(x - y, t), t),
                "*" => (reduce(x * y, t), t),
                "/" | "%" if y.is_zero() => return None,
                "/" => (reduce(&x / &y, t), t),
                "%" => (reduce(&x % &y, t), t),
                "&" | "|" | "^" => {
                    // Bitwise ops on the unsigned image of both operands.
                    let u = Ty { width: t.width, signed: false };
                    let (p, q) = (reduce(x, u), reduce(y, u));
                    let r = match *op {
                        "&" => p & q,
                        "|" => p | q,
                        _ => p ^ q,
                    };
                    (reduce(r, t), t)
                }
                "==" => flag(x == y),
                "!=" => flag(x != y),
                "<" => flag(x < y),
                "<=" => flag(x <= y),
                ">" => flag(x > y),
                _ => flag(x >= y),
            }
        }
    })
}

fn expr(leaves: usize) -> impl Strategy<Value = E> {
    let leaf = (0..leaves).prop_map(E::Leaf);
    leaf.prop_recursive(5, 40, 2, |inner| {
        prop_oneof![
            (prop::sample::select(vec!["-", "~", "!"]), inner.clone()).prop_map(|(op, a)| E::Un(op, Box::new(a))),
            (
                prop::sample::select(vec![
                    "+", "-", "*", "/", "%", "&", "|", "^", "<<", ">>", "==", "!=", "<", "<=", ">", ">=", "&&", "||"
                ]),
                inner.clone(),
                inner
            )
                .prop_map(|(op, a, b)| E::Bin(op, Box::new(a), Box::new(b))),
        ]
    })
}

fn leaf_values() -> impl Strategy<Value = Vec<(usize, u64)>> {
    // Small values make shifts and divisions interesting; wide ones exercise wrapping.
    let bits = prop_oneof![0u64..70, any::<u64>(), Just(u64::MAX), Just(1u64 << 63), Just(0x8000_0000)];
    prop::collection::vec((0..TYPES.len(), bits), 4)
}

fn program_text(leaves: &[(usize, u64)], out_ty: usize, e: &E) -> String {
    let mut s = String::from("context_struct hooks[] = {\n    {0x100, F},\n};\n\n");
    s.push_str(&format!("{} out = 0;\n\nvoid F() {{\n", TYPES[out_ty].0));
    for (i, (t, bits)) in leaves.iter().enumerate() {
        s.push_str(&format!("    {} v{i} = ({}){bits:#x};\n", TYPES[*t].0, TYPES[*t].0));
    }
    s.push_str(&format!("    out = {};\n}}\n", print_e(e)));
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn arithmetic_matches_unbounded_model(leaves in leaf_values(), out_ty in 0..TYPES.len(), e in expr(4)) {
        let text = program_text(&leaves, out_ty, &e);
        let program = parse_raven(&RavenSource::new(text.clone(), "gen.raven")).unwrap().program;
        let mut globals = GlobalState::new(&program);
        let r = eval_hook(&program, "F", &mut Fake::default(), &mut globals, DEFAULT_STEP_BUDGET);

        let vals: Vec<(BigInt, Ty)> = leaves
            .iter()
            .map(|(t, bits)| (reduce(BigInt::from(*bits), TYPES[*t].1), TYPES[*t].1))
            .collect();
        match model(&e, &vals) {
            None => prop_assert!(r.is_err(), "{text}"),
            Some((v, _)) => {
                prop_assert!(r.is_ok(), "{text}: {r:?}");
                let ot = TYPES[out_ty].1;
                let want = reduce(v, ot);
                let got = globals.get(&program, "out", 0).unwrap();
                prop_assert_eq!(got.ty(), IntType::new(ot.width as u8, ot.signed).unwrap());
                let got_big = if ot.signed { BigInt::from(got.bits() as i64) } else { BigInt::from(got.bits()) };
                prop_assert_eq!(got_big, want, "{}", text);
            }
        }
    }

    #[test]
    fn print_then_parse_is_identity(leaves in leaf_values(), out_ty in 0..TYPES.len(), e in expr(4)) {
        let text = program_text(&leaves, out_ty, &e);
        let p1 = parse_raven(&RavenSource::new(text, "gen.raven")).unwrap().program;
        let printed = print(&p1);
        let p2 = parse_raven(&RavenSource::new(printed.clone(), "printed.raven")).unwrap().program;
        prop_assert_eq!(&p1, &p2);
        prop_assert_eq!(print(&p2), printed);
    }

    #[test]
    fn fixture_ravens_are_deterministic(
        regs in prop::array::uniform16(prop_oneof![any::<u64>(), 0u64..64, 0x2000_0000u64..0x2000_0200]),
        mem in prop::collection::btree_map(0x2000_0000u64..0x2000_0200, any::<u8>(), 0..64),
    ) {
        let suite = build_fixtures().unwrap();
        for b in &suite.bundles {
            let set = b.ravens().unwrap();
            {
                for r in &set.ravens {
                    for entry in &r.program.reflection_table {
                        let mut runs = Vec::new();
                        for _ in 0..2 {
                            let mut fake = Fake { regs, mem: mem.clone(), reports: Vec::new() };
                            let mut g = GlobalState::new(&r.program);
                            // Two consecutive firings so persistent globals matter.
                            let a = eval_hook(&r.program, &entry.function, &mut fake, &mut g, DEFAULT_STEP_BUDGET);
                            let c = eval_hook(&r.program, &entry.function, &mut fake, &mut g, DEFAULT_STEP_BUDGET);
                            runs.push((a, c, fake.reports, g));
                        }
                        prop_assert_eq!(&runs[0], &runs[1]);
                    }
                }
            }
        }
    }
}

#[test]
fn fixture_ravens_round_trip_through_printer() {
    let suite = build_fixtures().unwrap();
    let mut n = 0;
    for b in &suite.bundles {
        let set = b.ravens().unwrap();
        {
            for r in &set.ravens {
                let printed = print(&r.program);
                let again = parse_raven(&RavenSource::new(printed, "printed.raven")).unwrap().program;
                assert_eq!(again, r.program, "{}", r.origin);
                n += 1;
            }
        }
    }
    assert!(n >= 10);
}

#[test]
fn model_self_check() {
    let t = Ty { width: 8, signed: true };
    assert_eq!(reduce(BigInt::from(200), t), BigInt::from(-56));
    assert_eq!(common(Ty { width: 32, signed: true }, Ty { width: 32, signed: false }).signed, false);
    assert_eq!(promote(Ty { width: 16, signed: false }), Ty { width: 32, signed: true });
}
