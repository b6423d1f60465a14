//! Canonical source rendering. Binary expressions are fully parenthesized so the
//! output re-parses to the same tree.

use std::fmt::Write;

use super::ast::*;
use super::value::{IntType, Value};

pub fn print(program: &RavenProgram) -> String {
    let mut out = String::new();
    let table = program.table_name.as_deref().unwrap_or("hook_addresses");
    if program.table_name.is_some() || !program.reflection_table.is_empty() {
        writeln!(out, "context_struct {table}[] = {{").unwrap();
        for e in &program.reflection_table {
            writeln!(out, "    {{{:#x}, {}}},", e.address, e.function).unwrap();
        }
        out.push_str("};\n");
    }
    for g in &program.globals {
        out.push('\n');
        write!(out, "{} {}", g.ty, g.name).unwrap();
        match g.len {
            Some(n) => {
                write!(out, "[{n}]").unwrap();
                if g.explicit_init {
                    let vals: Vec<String> = g.init.iter().map(|b| lit(Value::new(*b, g.ty))).collect();
                    write!(out, " = {{{}}}", vals.join(", ")).unwrap();
                }
            }
            None => {
                if g.explicit_init {
                    write!(out, " = {}", lit(Value::new(g.init[0], g.ty))).unwrap();
                }
            }
        }
        out.push_str(";");
    }
    if !program.globals.is_empty() {
        out.push('\n');
    }
    for f in &program.functions {
        writeln!(out, "\nvoid {}(void) {{", f.name).unwrap();
        for s in &f.body {
            stmt(&mut out, s, 1);
        }
        out.push_str("}\n");
    }
    out
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    match s {
        Stmt::Expr(e) => {
            out.push_str(&expr(e));
            out.push_str(";\n");
        }
        Stmt::Local { .. } | Stmt::Decls(_) => {
            out.push_str(&decl(s));
            out.push_str(";\n");
        }
        Stmt::If(c, t, e) => {
            write!(out, "if ({})", expr(c)).unwrap();
            sub(out, t, depth);
            if let Some(e) = e {
                indent(out, depth);
                out.push_str("else");
                sub(out, e, depth);
            }
        }
        Stmt::While(c, b) => {
            write!(out, "while ({})", expr(c)).unwrap();
            sub(out, b, depth);
        }
        Stmt::For {
            init,
            cond,
            step,
            body,
        } => {
            let init = match init.as_deref() {
                None => String::new(),
                Some(Stmt::Expr(e)) => expr(e),
                Some(d) => decl(d),
            };
            let cond = cond.as_ref().map(expr).unwrap_or_default();
            let step = step.as_ref().map(expr).unwrap_or_default();
            write!(out, "for ({init}; {cond}; {step})").unwrap();
            sub(out, body, depth);
        }
        Stmt::Block(stmts) => {
            out.push_str("{\n");
            block_items(out, stmts, depth);
        }
        Stmt::Return => out.push_str("return;\n"),
        Stmt::Break => out.push_str("break;\n"),
        Stmt::Continue => out.push_str("continue;\n"),
        Stmt::Empty => out.push_str(";\n"),
    }
}

fn block_items(out: &mut String, stmts: &[Stmt], depth: usize) {
    for s in stmts {
        stmt(out, s, depth + 1);
    }
    indent(out, depth);
    out.push_str("}\n");
}

/// Body of a branch or loop; blocks open on the header line.
fn sub(out: &mut String, s: &Stmt, depth: usize) {
    match s {
        Stmt::Block(stmts) => {
            out.push_str(" {\n");
            block_items(out, stmts, depth);
        }
        other => {
            out.push('\n');
            stmt(out, other, depth + 1);
        }
    }
}

/// Declaration without the trailing `;`.
fn decl(s: &Stmt) -> String {
    let one = |name: &str, init: &Option<Expr>| match init {
        Some(e) => format!("{name} = {}", expr(e)),
        None => name.to_string(),
    };
    match s {
        Stmt::Local { name, ty, init, .. } => format!("{ty} {}", one(name, init)),
        Stmt::Decls(ds) => {
            let mut ty0 = IntType::I32;
            let mut parts = Vec::new();
            for d in ds {
                if let Stmt::Local { name, ty, init, .. } = d {
                    ty0 = *ty;
                    parts.push(one(name, init));
                }
            }
            format!("{ty0} {}", parts.join(", "))
        }
        _ => String::new(),
    }
}

/// Literal spelled with the suffix that reproduces its C type.
fn lit(v: Value) -> String {
    let neg = v.is_signed() && v.as_i128() < 0;
    let mag = v.as_i128().unsigned_abs();
    let body = match v.ty() {
        IntType::I32 => format!("{mag}"),
        IntType::U32 => format!("{mag}u"),
        IntType::I64 => format!("{mag}ll"),
        IntType::U64 => format!("{mag}ull"),
        ty => format!("({ty}){mag}"),
    };
    match (neg, v.ty()) {
        (false, _) => body,
        (true, IntType::I32) => format!("(-{mag})"),
        (true, ty) => format!("({ty})(-{mag}ull)"),
    }
}

fn place(p: &Place) -> String {
    match p {
        Place::Var(v) => v.name.clone(),
        Place::Element { name, index, .. } => format!("{name}[{}]", expr(index)),
    }
}

pub fn expr(e: &Expr) -> String {
    match e {
        Expr::Lit(v) => lit(*v),
        Expr::Var(v) => v.name.clone(),
        Expr::Element { name, index, .. } => format!("{name}[{}]", expr(index)),
        Expr::Unary(op, a) => {
            let sym = match op {
                UnaryOp::Neg => "-",
                UnaryOp::Plus => "+",
                UnaryOp::BitNot => "~",
                UnaryOp::Not => "!",
            };
            format!("{sym}({})", expr(a))
        }
        Expr::Binary(op, a, b) => format!("({} {} {})", expr(a), op.symbol(), expr(b)),
        Expr::Assign { place: p, op, value } => {
            let sym = op.map(|o| format!("{}=", o.symbol())).unwrap_or_else(|| "=".into());
            format!("({} {sym} {})", place(p), expr(value))
        }
        Expr::IncDec {
            place: p,
            increment,
            prefix,
        } => {
            let sym = if *increment { "++" } else { "--" };
            if *prefix {
                format!("{sym}{}", place(p))
            } else {
                format!("{}{sym}", place(p))
            }
        }
        Expr::Cond(c, a, b) => format!("({} ? {} : {})", expr(c), expr(a), expr(b)),
        Expr::Cast(ty, a) => format!("({ty})({})", expr(a)),
        Expr::RegState(r) => format!("frb_reg_state({})", expr(r)),
        Expr::MemRead(a, s) => format!("frb_mem_read({}, {})", expr(a), expr(s)),
        Expr::Report(kind, id) => {
            let escaped = id.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n");
            format!("{}(\"{escaped}\")", kind.intrinsic_name())
        }
        Expr::Call(name) => format!("{name}()"),
    }
}
