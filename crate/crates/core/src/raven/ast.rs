//! Syntax tree of a parsed Raven.
//!
//! Identifiers are resolved while parsing: variables carry both their source
//! name (for printing) and the storage slot the interpreter uses.

use std::collections::BTreeSet;

use super::value::{IntType, Value};

/// One `{address, function}` element of a `context_struct` hook table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReflectionEntry {
    pub address: u64,
    pub function: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalDecl {
    pub name: String,
    pub ty: IntType,
    /// `Some(n)` for arrays.
    pub len: Option<usize>,
    /// Normalized initial contents, one entry per element.
    pub init: Vec<u64>,
    /// Whether the source carried an explicit initializer.
    pub explicit_init: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Function {
    pub name: String,
    pub locals: Vec<IntType>,
    pub body: Vec<Stmt>,
}

/// Reference to a scalar variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarRef {
    pub name: String,
    pub slot: Slot,
    pub ty: IntType,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Global(usize),
    Local(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Place {
    Var(VarRef),
    Element {
        name: String,
        global: usize,
        ty: IntType,
        index: Box<Expr>,
    },
}

impl Place {
    pub fn ty(&self) -> IntType {
        match self {
            Place::Var(v) => v.ty,
            Place::Element { ty, .. } => *ty,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Plus,
    BitNot,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Shl,
    Shr,
    BitAnd,
    BitOr,
    BitXor,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    LogicAnd,
    LogicOr,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Rem => "%",
            BinaryOp::Shl => "<<",
            BinaryOp::Shr => ">>",
            BinaryOp::BitAnd => "&",
            BinaryOp::BitOr => "|",
            BinaryOp::BitXor => "^",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::LogicAnd => "&&",
            BinaryOp::LogicOr => "||",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    Reached,
    DetectedTriggered,
}

impl ReportKind {
    pub fn intrinsic_name(self) -> &'static str {
        match self {
            ReportKind::Reached => "report_reached",
            ReportKind::DetectedTriggered => "report_detected_triggered",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Lit(Value),
    Var(VarRef),
    Element {
        name: String,
        global: usize,
        ty: IntType,
        index: Box<Expr>,
    },
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    /// Plain or compound assignment; `op` is `None` for `=`.
    Assign {
        place: Place,
        op: Option<BinaryOp>,
        value: Box<Expr>,
    },
    IncDec {
        place: Place,
        increment: bool,
        prefix: bool,
    },
    Cond(Box<Expr>, Box<Expr>, Box<Expr>),
    Cast(IntType, Box<Expr>),
    RegState(Box<Expr>),
    MemRead(Box<Expr>, Box<Expr>),
    Report(ReportKind, String),
    Call(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Expr(Expr),
    Local {
        name: String,
        slot: usize,
        ty: IntType,
        init: Option<Expr>,
    },
    If(Expr, Box<Stmt>, Option<Box<Stmt>>),
    While(Expr, Box<Stmt>),
    For {
        init: Option<Box<Stmt>>,
        cond: Option<Expr>,
        step: Option<Expr>,
        body: Box<Stmt>,
    },
    Block(Vec<Stmt>),
    /// `int a, b;`: several declarations in the enclosing scope.
    Decls(Vec<Stmt>),
    Return,
    Break,
    Continue,
    Empty,
}

/// A parsed Raven: hook table, introspection functions and persistent globals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RavenProgram {
    /// Name of the hook-table array (`hook_addresses` in the usual idiom).
    pub table_name: Option<String>,
    pub reflection_table: Vec<ReflectionEntry>,
    pub functions: Vec<Function>,
    pub globals: Vec<GlobalDecl>,
}

impl RavenProgram {
    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }

    /// Every bug ID named by a `report_*` call, sorted.
    pub fn bug_ids(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for f in &self.functions {
            for s in &f.body {
                collect_stmt(s, &mut out);
            }
        }
        out
    }
}

fn collect_stmt(s: &Stmt, out: &mut BTreeSet<String>) {
    match s {
        Stmt::Expr(e) => collect_expr(e, out),
        Stmt::Local { init, .. } => {
            if let Some(e) = init {
                collect_expr(e, out)
            }
        }
        Stmt::If(c, t, e) => {
            collect_expr(c, out);
            collect_stmt(t, out);
            if let Some(e) = e {
                collect_stmt(e, out);
            }
        }
        Stmt::While(c, b) => {
            collect_expr(c, out);
            collect_stmt(b, out);
        }
        Stmt::For {
            init,
            cond,
            step,
            body,
        } => {
            if let Some(i) = init {
                collect_stmt(i, out);
            }
            for e in cond.iter().chain(step.iter()) {
                collect_expr(e, out);
            }
            collect_stmt(body, out);
        }
        Stmt::Block(b) | Stmt::Decls(b) => b.iter().for_each(|s| collect_stmt(s, out)),
        Stmt::Return | Stmt::Break | Stmt::Continue | Stmt::Empty => {}
    }
}

fn collect_expr(e: &Expr, out: &mut BTreeSet<String>) {
    match e {
        Expr::Report(_, id) => {
            out.insert(id.clone());
        }
        Expr::Lit(_) | Expr::Var(_) | Expr::Call(_) => {}
        Expr::Element { index, .. } => collect_expr(index, out),
        Expr::Unary(_, a) | Expr::Cast(_, a) | Expr::RegState(a) => collect_expr(a, out),
        Expr::Binary(_, a, b) | Expr::MemRead(a, b) => {
            collect_expr(a, out);
            collect_expr(b, out);
        }
        Expr::Assign { place, value, .. } => {
            if let Place::Element { index, .. } = place {
                collect_expr(index, out);
            }
            collect_expr(value, out);
        }
        Expr::IncDec { place, .. } => {
            if let Place::Element { index, .. } = place {
                collect_expr(index, out);
            }
        }
        Expr::Cond(a, b, c) => {
            collect_expr(a, out);
            collect_expr(b, out);
            collect_expr(c, out);
        }
    }
}
