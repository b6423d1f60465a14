//! The Raven oracle language: a small C subset with a hook table, introspection
//! intrinsics and wrapping integer semantics.

use std::fmt;

pub mod ast;
pub mod interp;
mod lexer;
mod parser;
pub mod printer;
pub mod value;

pub use ast::{RavenProgram, ReflectionEntry, ReportKind};
pub use interp::{eval_hook, EvalError, GlobalState, Intrinsics, DEFAULT_STEP_BUDGET};
pub use parser::literal_type;
pub use printer::print;
pub use value::{IntType, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RavenSource {
    pub text: String,
    /// File path or label used in diagnostics.
    pub origin: String,
}

impl RavenSource {
    pub fn new(text: impl Into<String>, origin: impl Into<String>) -> Self {
        RavenSource {
            text: text.into(),
            origin: origin.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct Diagnostic {
    pub origin: String,
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl Diagnostic {
    pub fn new(origin: &str, line: usize, col: usize, message: impl Into<String>) -> Self {
        Diagnostic {
            origin: origin.to_string(),
            line,
            col,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}: {}", self.origin, self.line, self.col, self.message)
    }
}

/// A successful parse plus non-fatal warnings.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub program: RavenProgram,
    pub warnings: Vec<Diagnostic>,
}

pub fn parse_raven(source: &RavenSource) -> Result<Parsed, Diagnostic> {
    parser::parse(source)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MF04: &str = r#"
context_struct hook_addresses[] = {
    {0x08005e28, BUG_MF04},
    ...
}

void BUG_MF04() {
    report_reached("MF04");
    //canbus fail to verify device type
    uint32_t read_addr = frb_reg_state[0] + 0x4;
    if (frb_mem_read(read_addr,4) != 0x0800f7e4){
        report_detected_triggered("MF04");
    }
}
"#;

    struct Fake {
        r0: u64,
        word: u64,
        reports: Vec<(ReportKind, String)>,
    }

    impl Intrinsics for Fake {
        fn reg_state(&mut self, reg: u64) -> Result<u64, String> {
            match reg {
                0 => Ok(self.r0),
                _ => Err("unknown register".into()),
            }
        }
        fn mem_read(&mut self, addr: u64, size: u8) -> Result<u64, String> {
            if addr == self.r0 + 4 && size == 4 {
                Ok(self.word)
            } else {
                Err("unmapped".into())
            }
        }
        fn report(&mut self, kind: ReportKind, bug_id: &str) {
            self.reports.push((kind, bug_id.to_string()));
        }
    }

    fn run(word: u64) -> Vec<(ReportKind, String)> {
        let p = parse_raven(&RavenSource::new(MF04, "mf04.raven")).unwrap().program;
        let mut fake = Fake { r0: 0x2000_0100, word, reports: vec![] };
        let mut g = GlobalState::new(&p);
        eval_hook(&p, "BUG_MF04", &mut fake, &mut g, DEFAULT_STEP_BUDGET).unwrap();
        fake.reports
    }

    #[test]
    fn mf04_parses() {
        let parsed = parse_raven(&RavenSource::new(MF04, "mf04.raven")).unwrap();
        assert!(parsed.warnings.is_empty());
        let p = parsed.program;
        assert_eq!(
            p.reflection_table,
            vec![ReflectionEntry { address: 0x0800_5e28, function: "BUG_MF04".into() }]
        );
        assert_eq!(p.functions.len(), 1);
        assert_eq!(p.bug_ids().into_iter().collect::<Vec<_>>(), vec!["MF04".to_string()]);
    }

    #[test]
    fn mf04_can_table_is_reached_only() {
        assert_eq!(run(0x0800_f7e4), vec![(ReportKind::Reached, "MF04".into())]);
    }

    #[test]
    fn mf04_wrong_table_triggers() {
        assert_eq!(
            run(0xDEAD_BEEF),
            vec![
                (ReportKind::Reached, "MF04".into()),
                (ReportKind::DetectedTriggered, "MF04".into())
            ]
        );
    }

    #[test]
    fn schema_listing_parses() {
        let src = r#"
/* Reflection*/
context_struct hook_addresses[] = {
    {0x1000, func_1},
    ...
};

/* Introspection*/
void func_1() {
    report_reached("B1");
    uint32_t r = frb_reg_state(0);
    uint32_t m = frb_mem_read(0x20000000, 4);
    if (r != m) {
        report_detected_triggered("B1");
    }
}
"#;
        let p = parse_raven(&RavenSource::new(src, "schema")).unwrap().program;
        assert_eq!(p.reflection_table.len(), 1);
        assert_eq!(p.reflection_table[0].address, 0x1000);
        assert_eq!(p.functions.len(), 1);
    }

    #[test]
    fn empty_table_warns() {
        let parsed =
            parse_raven(&RavenSource::new("context_struct hook_addresses[] = {};", "e")).unwrap();
        assert!(parsed.program.reflection_table.is_empty());
        assert_eq!(parsed.warnings.len(), 1);
        assert_eq!(parsed.warnings[0].message, "no reflection points");
    }

    #[test]
    fn runaway_loop_hits_budget_after_report() {
        let src = r#"context_struct t[] = {{0x0, f}};
void f() { report_reached("X"); while(1){} }"#;
        let p = parse_raven(&RavenSource::new(src, "loop")).unwrap().program;
        let mut fake = Fake { r0: 0, word: 0, reports: vec![] };
        let mut g = GlobalState::new(&p);
        let err = eval_hook(&p, "f", &mut fake, &mut g, 10_000).unwrap_err();
        assert!(matches!(err, EvalError::StepBudgetExceeded { budget: 10_000, .. }));
        assert!(err.to_string().contains("step budget"));
        assert_eq!(fake.reports, vec![(ReportKind::Reached, "X".into())]);
    }

    #[test]
    fn diagnostics_carry_position() {
        let d = parse_raven(&RavenSource::new("void f() {\n  x = 1;\n}", "u.raven")).unwrap_err();
        assert_eq!((d.line, d.col), (2, 3));
        assert!(d.message.contains("unknown identifier"));
        let d = parse_raven(&RavenSource::new("struct s { int a; };", "s")).unwrap_err();
        assert!(d.message.starts_with("unsupported construct"));
        let d = parse_raven(&RavenSource::new("context_struct t[] = {{0x10, nope}};", "n"))
            .unwrap_err();
        assert!(d.message.contains("undefined function"));
        assert!(d.to_string().starts_with("n:1:"));
    }

    #[test]
    fn size_three_rejected() {
        let d = parse_raven(&RavenSource::new(
            "uint32_t g; void f() { g = frb_mem_read(0, 3); }",
            "s",
        ))
        .unwrap_err();
        assert!(d.message.contains("size"));
    }
}
