//! Recursive-descent parser for the Raven C subset.

use std::collections::HashMap;

use super::ast::*;
use super::interp::const_eval;
use super::lexer::{tokenize, Tok, Token};
use super::value::{IntType, Value};
use super::{Diagnostic, Parsed, RavenSource};

const UNSUPPORTED_KEYWORDS: &[&str] = &[
    "struct", "union", "enum", "typedef", "switch", "case", "default", "goto", "do", "float",
    "double", "sizeof", "static", "extern", "const", "volatile", "char", "short", "long",
    "signed", "auto", "register", "inline", "restrict", "_Bool", "bool",
];

pub fn parse(source: &RavenSource) -> Result<Parsed, Diagnostic> {
    if source.text.trim().is_empty() {
        return Err(Diagnostic::new(&source.origin, 1, 1, "empty Raven source"));
    }
    let tokens = tokenize(&source.text, &source.origin)?;
    let mut p = Parser {
        origin: &source.origin,
        toks: tokens,
        pos: 0,
        globals: Vec::new(),
        global_index: HashMap::new(),
        functions: Vec::new(),
        prototypes: HashMap::new(),
        fn_refs: Vec::new(),
        scopes: Vec::new(),
        locals: Vec::new(),
        loop_depth: 0,
        table_name: None,
        table: Vec::new(),
        saw_table: false,
        warnings: Vec::new(),
    };
    p.program()?;
    p.finish()
}

struct Parser<'a> {
    origin: &'a str,
    toks: Vec<Token>,
    pos: usize,
    globals: Vec<GlobalDecl>,
    global_index: HashMap<String, usize>,
    functions: Vec<Function>,
    prototypes: HashMap<String, (usize, usize)>,
    /// Function names referenced before they may be defined: (name, line, col).
    fn_refs: Vec<(String, usize, usize)>,
    scopes: Vec<HashMap<String, (usize, IntType)>>,
    locals: Vec<IntType>,
    loop_depth: usize,
    table_name: Option<String>,
    table: Vec<ReflectionEntry>,
    saw_table: bool,
    warnings: Vec<Diagnostic>,
}

type PResult<T> = Result<T, Diagnostic>;

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, line: usize, col: usize, msg: impl Into<String>) -> Diagnostic {
        Diagnostic::new(self.origin, line, col, msg)
    }

    fn error(&self, msg: impl Into<String>) -> Diagnostic {
        let (l, c) = self.here();
        self.error_at(l, c, msg)
    }

    fn unsupported(&self, what: &str) -> Diagnostic {
        self.error(format!("unsupported construct: {what}"))
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn eat(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> PResult<()> {
        if self.eat(p) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{p}`, found {}", describe(self.peek()))))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.check_keyword(&s)?;
                self.bump();
                Ok(s)
            }
            other => Err(self.error(format!("expected identifier, found {}", describe(&other)))),
        }
    }

    fn check_keyword(&self, s: &str) -> PResult<()> {
        if UNSUPPORTED_KEYWORDS.contains(&s) {
            return Err(self.unsupported(&format!("`{s}`")));
        }
        Ok(())
    }

    fn check_token(&self) -> PResult<()> {
        match self.peek() {
            Tok::Unsupported(what) => Err(self.unsupported(what)),
            Tok::Ident(s) => self.check_keyword(s),
            _ => Ok(()),
        }
    }

    /// Parses a type name if one starts here.
    fn try_type(&mut self) -> PResult<Option<IntType>> {
        let name = match self.peek() {
            Tok::Ident(s) => s.clone(),
            _ => return Ok(None),
        };
        let ty = match name.as_str() {
            "uint8_t" => IntType::U8,
            "uint16_t" => IntType::U16,
            "uint32_t" => IntType::U32,
            "uint64_t" => IntType::U64,
            "int8_t" => IntType::I8,
            "int16_t" => IntType::I16,
            "int32_t" | "int" => IntType::I32,
            "int64_t" => IntType::I64,
            "unsigned" => {
                self.bump();
                if matches!(self.peek(), Tok::Ident(s) if s == "int") {
                    self.bump();
                }
                return Ok(Some(IntType::U32));
            }
            _ => return Ok(None),
        };
        self.bump();
        if self.is_punct("*") {
            return Err(self.unsupported("pointer type"));
        }
        Ok(Some(ty))
    }

    fn starts_type(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if matches!(s.as_str(),
            "uint8_t" | "uint16_t" | "uint32_t" | "uint64_t" | "int8_t" | "int16_t"
            | "int32_t" | "int64_t" | "int" | "unsigned"))
    }

    // ---- top level ----

    fn program(&mut self) -> PResult<()> {
        while *self.peek() != Tok::Eof {
            self.check_token()?;
            if self.eat(";") {
                continue;
            }
            match self.peek().clone() {
                Tok::Ident(s) if s == "context_struct" => self.hook_table()?,
                Tok::Ident(s) if s == "void" => self.function()?,
                _ => {
                    if let Some(ty) = self.try_type()? {
                        self.global_decl(ty)?;
                    } else {
                        return Err(self.error(format!(
                            "expected declaration, found {}",
                            describe(self.peek())
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn hook_table(&mut self) -> PResult<()> {
        self.bump();
        let name = self.ident()?;
        if self.saw_table {
            if self.table_name.as_deref() != Some(name.as_str()) {
                return Err(self.error("only one hook table per Raven is supported"));
            }
        }
        self.saw_table = true;
        self.table_name = Some(name);
        self.expect("[")?;
        self.expect("]")?;
        self.expect("=")?;
        self.expect("{")?;
        loop {
            if self.eat("}") {
                break;
            }
            if self.eat("...") {
                self.eat(",");
                continue;
            }
            self.expect("{")?;
            let address = match self.peek().clone() {
                Tok::Int { value, .. } => {
                    self.bump();
                    value
                }
                other => {
                    return Err(self.error(format!(
                        "hook address must be an integer literal, found {}",
                        describe(&other)
                    )))
                }
            };
            self.expect(",")?;
            let (l, c) = self.here();
            let function = self.ident()?;
            self.fn_refs.push((function.clone(), l, c));
            self.eat(",");
            self.expect("}")?;
            self.table.push(ReflectionEntry { address, function });
            if !self.eat(",") {
                self.expect("}")?;
                break;
            }
        }
        self.eat(";");
        Ok(())
    }

    fn global_decl(&mut self, ty: IntType) -> PResult<()> {
        loop {
            let (l, c) = self.here();
            let name = self.ident()?;
            if self.is_punct("(") {
                return Err(self.unsupported("non-void function"));
            }
            if self.global_index.contains_key(&name) {
                return Err(self.error_at(l, c, format!("redefinition of `{name}`")));
            }
            let mut len = None;
            let mut inferred_len = false;
            if self.eat("[") {
                if self.eat("]") {
                    inferred_len = true;
                } else {
                    match self.peek().clone() {
                        Tok::Int { value, .. } if value > 0 && value <= 1 << 20 => {
                            self.bump();
                            len = Some(value as usize);
                        }
                        _ => return Err(self.error("array length must be a positive integer literal")),
                    }
                    self.expect("]")?;
                }
                if self.is_punct("[") {
                    return Err(self.unsupported("multi-dimensional array"));
                }
            }
            let is_array = len.is_some() || inferred_len;
            let mut explicit_init = false;
            let init = if self.eat("=") {
                explicit_init = true;
                if is_array {
                    self.expect("{")?;
                    let mut vals = Vec::new();
                    while !self.eat("}") {
                        vals.push(self.const_expr(ty)?);
                        if !self.eat(",") {
                            self.expect("}")?;
                            break;
                        }
                    }
                    if inferred_len {
                        if vals.is_empty() {
                            return Err(self.error_at(l, c, "zero-length array"));
                        }
                        len = Some(vals.len());
                    }
                    let n = len.unwrap_or(0);
                    if vals.len() > n {
                        return Err(self.error_at(l, c, format!("too many initializers for `{name}`")));
                    }
                    vals.resize(n, 0);
                    vals
                } else {
                    vec![self.const_expr(ty)?]
                }
            } else {
                if inferred_len {
                    return Err(self.error_at(l, c, "array of unknown length needs an initializer"));
                }
                vec![0; len.unwrap_or(1)]
            };
            self.global_index.insert(name.clone(), self.globals.len());
            self.globals.push(GlobalDecl {
                name,
                ty,
                len,
                init,
                explicit_init,
            });
            if !self.eat(",") {
                break;
            }
        }
        self.expect(";")
    }

    fn const_expr(&mut self, ty: IntType) -> PResult<u64> {
        let (l, c) = self.here();
        let e = self.assignment()?;
        match const_eval(&e) {
            Some(v) => Ok(v.cast(ty).bits()),
            None => Err(self.error_at(l, c, "initializer must be a constant expression")),
        }
    }

    fn function(&mut self) -> PResult<()> {
        self.bump(); // void
        let (l, c) = self.here();
        let name = self.ident()?;
        self.expect("(")?;
        if matches!(self.peek(), Tok::Ident(s) if s == "void") {
            self.bump();
        }
        if !self.is_punct(")") {
            return Err(self.unsupported("function parameters"));
        }
        self.expect(")")?;
        if self.eat(";") {
            self.prototypes.insert(name, (l, c));
            return Ok(());
        }
        if self.functions.iter().any(|f| f.name == name) || self.global_index.contains_key(&name) {
            return Err(self.error_at(l, c, format!("redefinition of `{name}`")));
        }
        self.scopes = vec![HashMap::new()];
        self.locals = Vec::new();
        self.expect("{")?;
        let mut body = Vec::new();
        while !self.eat("}") {
            if *self.peek() == Tok::Eof {
                return Err(self.error("unexpected end of input in function body"));
            }
            body.push(self.statement()?);
        }
        self.scopes.clear();
        self.functions.push(Function {
            name,
            locals: std::mem::take(&mut self.locals),
            body,
        });
        Ok(())
    }

    fn finish(self) -> PResult<Parsed> {
        for (name, l, c) in &self.fn_refs {
            if self.functions.iter().all(|f| &f.name != name) {
                return Err(self.error_at(*l, *c, format!("undefined function `{name}`")));
            }
        }
        let mut warnings = self.warnings;
        if self.table.is_empty() {
            warnings.push(Diagnostic::new(self.origin, 1, 1, "no reflection points"));
        }
        Ok(Parsed {
            program: RavenProgram {
                table_name: self.table_name,
                reflection_table: self.table,
                functions: self.functions,
                globals: self.globals,
            },
            warnings,
        })
    }

    // ---- statements ----

    fn block_scoped(&mut self) -> PResult<Stmt> {
        self.scopes.push(HashMap::new());
        let mut body = Vec::new();
        while !self.eat("}") {
            if *self.peek() == Tok::Eof {
                return Err(self.error("unexpected end of input in block"));
            }
            body.push(self.statement()?);
        }
        self.scopes.pop();
        Ok(Stmt::Block(body))
    }

    fn statement(&mut self) -> PResult<Stmt> {
        self.check_token()?;
        if self.eat("{") {
            return self.block_scoped();
        }
        if self.eat(";") {
            return Ok(Stmt::Empty);
        }
        if self.starts_type() {
            return self.local_decl();
        }
        let kw = match self.peek() {
            Tok::Ident(s) => s.clone(),
            _ => String::new(),
        };
        match kw.as_str() {
            "if" => {
                self.bump();
                self.expect("(")?;
                let cond = self.expr()?;
                self.expect(")")?;
                let then = self.sub_statement()?;
                let els = if matches!(self.peek(), Tok::Ident(s) if s == "else") {
                    self.bump();
                    Some(Box::new(self.sub_statement()?))
                } else {
                    None
                };
                Ok(Stmt::If(cond, Box::new(then), els))
            }
            "while" => {
                self.bump();
                self.expect("(")?;
                let cond = self.expr()?;
                self.expect(")")?;
                self.loop_depth += 1;
                let body = self.sub_statement();
                self.loop_depth -= 1;
                Ok(Stmt::While(cond, Box::new(body?)))
            }
            "for" => {
                self.bump();
                self.expect("(")?;
                self.scopes.push(HashMap::new());
                let init = if self.eat(";") {
                    None
                } else if self.starts_type() {
                    Some(Box::new(self.local_decl()?))
                } else {
                    let e = self.expr()?;
                    self.expect(";")?;
                    Some(Box::new(Stmt::Expr(e)))
                };
                let cond = if self.is_punct(";") { None } else { Some(self.expr()?) };
                self.expect(";")?;
                let step = if self.is_punct(")") { None } else { Some(self.expr()?) };
                self.expect(")")?;
                self.loop_depth += 1;
                let body = self.sub_statement();
                self.loop_depth -= 1;
                self.scopes.pop();
                Ok(Stmt::For {
                    init,
                    cond,
                    step,
                    body: Box::new(body?),
                })
            }
            "return" => {
                self.bump();
                if !self.is_punct(";") {
                    return Err(self.error("return with a value in a void function"));
                }
                self.expect(";")?;
                Ok(Stmt::Return)
            }
            "break" | "continue" => {
                if self.loop_depth == 0 {
                    return Err(self.error(format!("`{kw}` outside of a loop")));
                }
                self.bump();
                self.expect(";")?;
                Ok(if kw == "break" { Stmt::Break } else { Stmt::Continue })
            }
            "else" => Err(self.error("`else` without `if`")),
            "void" => Err(self.unsupported("nested function definition")),
            _ => {
                let e = self.expr()?;
                self.expect(";")?;
                Ok(Stmt::Expr(e))
            }
        }
    }

    /// Body of if/while/for: a declaration there gets its own scope.
    fn sub_statement(&mut self) -> PResult<Stmt> {
        self.scopes.push(HashMap::new());
        let s = self.statement();
        self.scopes.pop();
        s
    }

    fn local_decl(&mut self) -> PResult<Stmt> {
        let ty = self.try_type()?.expect("caller checked starts_type");
        let mut decls = Vec::new();
        loop {
            let (l, c) = self.here();
            let name = self.ident()?;
            if self.is_punct("[") {
                return Err(self.unsupported("local array"));
            }
            if self.is_punct("(") {
                return Err(self.unsupported("nested function declaration"));
            }
            let init = if self.eat("=") { Some(self.assignment()?) } else { None };
            let scope = self.scopes.last_mut().expect("inside function");
            if scope.contains_key(&name) {
                return Err(self.error_at(l, c, format!("redefinition of `{name}`")));
            }
            let slot = self.locals.len();
            self.locals.push(ty);
            scope.insert(name.clone(), (slot, ty));
            decls.push(Stmt::Local {
                name,
                slot,
                ty,
                init,
            });
            if !self.eat(",") {
                break;
            }
        }
        self.expect(";")?;
        Ok(if decls.len() == 1 {
            decls.pop().unwrap()
        } else {
            Stmt::Decls(decls)
        })
    }

    // ---- expressions ----

    fn expr(&mut self) -> PResult<Expr> {
        let e = self.assignment()?;
        if self.is_punct(",") {
            return Err(self.unsupported("comma operator"));
        }
        Ok(e)
    }

    fn assignment(&mut self) -> PResult<Expr> {
        let (l, c) = self.here();
        let lhs = self.conditional()?;
        let op = match self.peek() {
            Tok::Punct("=") => None,
            Tok::Punct("+=") => Some(BinaryOp::Add),
            Tok::Punct("-=") => Some(BinaryOp::Sub),
            Tok::Punct("*=") => Some(BinaryOp::Mul),
            Tok::Punct("/=") => Some(BinaryOp::Div),
            Tok::Punct("%=") => Some(BinaryOp::Rem),
            Tok::Punct("&=") => Some(BinaryOp::BitAnd),
            Tok::Punct("|=") => Some(BinaryOp::BitOr),
            Tok::Punct("^=") => Some(BinaryOp::BitXor),
            Tok::Punct("<<=") => Some(BinaryOp::Shl),
            Tok::Punct(">>=") => Some(BinaryOp::Shr),
            _ => return Ok(lhs),
        };
        self.bump();
        let place = self.to_place(lhs, l, c)?;
        let value = self.assignment()?;
        Ok(Expr::Assign {
            place,
            op,
            value: Box::new(value),
        })
    }

    fn to_place(&self, e: Expr, l: usize, c: usize) -> PResult<Place> {
        match e {
            Expr::Var(v) => Ok(Place::Var(v)),
            Expr::Element {
                name,
                global,
                ty,
                index,
            } => Ok(Place::Element {
                name,
                global,
                ty,
                index,
            }),
            _ => Err(self.error_at(l, c, "expression is not assignable")),
        }
    }

    fn conditional(&mut self) -> PResult<Expr> {
        let cond = self.binary(0)?;
        if self.eat("?") {
            let a = self.expr()?;
            self.expect(":")?;
            let b = self.conditional()?;
            return Ok(Expr::Cond(Box::new(cond), Box::new(a), Box::new(b)));
        }
        Ok(cond)
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let (op, prec) = match self.peek() {
                Tok::Punct(p) => match binop(p) {
                    Some(x) => x,
                    None => break,
                },
                _ => break,
            };
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        self.check_token()?;
        let (l, c) = self.here();
        let op = match self.peek() {
            Tok::Punct("-") => Some(UnaryOp::Neg),
            Tok::Punct("+") => Some(UnaryOp::Plus),
            Tok::Punct("~") => Some(UnaryOp::BitNot),
            Tok::Punct("!") => Some(UnaryOp::Not),
            Tok::Punct("*") => return Err(self.unsupported("pointer dereference")),
            Tok::Punct("&") => return Err(self.unsupported("address-of operator")),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let e = self.unary()?;
            return Ok(Expr::Unary(op, Box::new(e)));
        }
        if self.is_punct("++") || self.is_punct("--") {
            let increment = self.is_punct("++");
            self.bump();
            let e = self.unary()?;
            let place = self.to_place(e, l, c)?;
            return Ok(Expr::IncDec {
                place,
                increment,
                prefix: true,
            });
        }
        if self.is_punct("(") {
            if let Tok::Ident(s) = self.peek_at(1).clone() {
                if UNSUPPORTED_KEYWORDS.contains(&s.as_str()) {
                    self.bump();
                    return Err(self.unsupported(&format!("`{s}`")));
                }
            }
            let save = self.pos;
            self.bump();
            if let Some(ty) = self.try_type()? {
                self.expect(")")?;
                let e = self.unary()?;
                return Ok(Expr::Cast(ty, Box::new(e)));
            }
            self.pos = save;
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let (l, c) = self.here();
        let mut e = self.primary()?;
        loop {
            if self.is_punct("++") || self.is_punct("--") {
                let increment = self.is_punct("++");
                self.bump();
                let place = self.to_place(e, l, c)?;
                e = Expr::IncDec {
                    place,
                    increment,
                    prefix: false,
                };
            } else if self.is_punct(".") || self.is_punct("->") {
                return Err(self.unsupported("member access"));
            } else if self.is_punct("[") {
                return Err(self.error("subscript of a non-array value"));
            } else if self.is_punct("(") {
                return Err(self.unsupported("call through an expression"));
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let (l, c) = self.here();
        match self.peek().clone() {
            Tok::Int {
                value,
                hex,
                unsigned,
                long,
            } => {
                self.bump();
                let ty = literal_type(value, hex, unsigned, long)
                    .ok_or_else(|| self.error_at(l, c, "integer literal too large for its type"))?;
                Ok(Expr::Lit(Value::new(value, ty)))
            }
            Tok::Str(_) => Err(self.error("string literals are only allowed as report_* bug IDs")),
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.check_keyword(&name)?;
                self.bump();
                self.identifier(name, l, c)
            }
            other => Err(self.error(format!("expected expression, found {}", describe(&other)))),
        }
    }

    fn identifier(&mut self, name: String, l: usize, c: usize) -> PResult<Expr> {
        match name.as_str() {
            "frb_reg_state" => {
                let close = if self.eat("(") {
                    ")"
                } else if self.eat("[") {
                    "]"
                } else {
                    return Err(self.error("expected `(` after frb_reg_state"));
                };
                let reg = self.expr()?;
                self.expect(close)?;
                return Ok(Expr::RegState(Box::new(reg)));
            }
            "frb_mem_read" => {
                self.expect("(")?;
                let addr = self.assignment()?;
                self.expect(",")?;
                let (sl, sc) = self.here();
                let size = self.assignment()?;
                self.expect(")")?;
                if let Some(v) = const_eval(&size) {
                    if !matches!(v.as_i128(), 1 | 2 | 4 | 8) {
                        return Err(self.error_at(
                            sl,
                            sc,
                            format!("frb_mem_read size must be 1, 2, 4 or 8 (got {v})"),
                        ));
                    }
                }
                return Ok(Expr::MemRead(Box::new(addr), Box::new(size)));
            }
            "report_reached" | "report_detected_triggered" => {
                let kind = if name == "report_reached" {
                    ReportKind::Reached
                } else {
                    ReportKind::DetectedTriggered
                };
                self.expect("(")?;
                let id = match self.peek().clone() {
                    Tok::Str(s) if !s.is_empty() => {
                        self.bump();
                        s
                    }
                    _ => return Err(self.error(format!("{name} expects a bug ID string literal"))),
                };
                self.expect(")")?;
                return Ok(Expr::Report(kind, id));
            }
            _ => {}
        }

        if self.is_punct("(") {
            self.bump();
            if !self.is_punct(")") {
                return Err(self.unsupported("function arguments"));
            }
            self.bump();
            if self.global_index.contains_key(&name) || self.lookup_local(&name).is_some() {
                return Err(self.error_at(l, c, format!("`{name}` is not a function")));
            }
            self.fn_refs.push((name.clone(), l, c));
            return Ok(Expr::Call(name));
        }

        if let Some((slot, ty)) = self.lookup_local(&name) {
            if self.is_punct("[") {
                return Err(self.error("subscript of a non-array value"));
            }
            return Ok(Expr::Var(VarRef {
                name,
                slot: Slot::Local(slot),
                ty,
            }));
        }
        if let Some(&g) = self.global_index.get(&name) {
            let decl = &self.globals[g];
            let ty = decl.ty;
            if decl.len.is_some() {
                if !self.eat("[") {
                    return Err(self.error_at(l, c, format!("array `{name}` used without an index")));
                }
                let index = self.expr()?;
                self.expect("]")?;
                return Ok(Expr::Element {
                    name,
                    global: g,
                    ty,
                    index: Box::new(index),
                });
            }
            return Ok(Expr::Var(VarRef {
                name,
                slot: Slot::Global(g),
                ty,
            }));
        }
        Err(self.error_at(l, c, format!("unknown identifier `{name}`")))
    }

    fn lookup_local(&self, name: &str) -> Option<(usize, IntType)> {
        self.scopes.iter().rev().find_map(|s| s.get(name).copied())
    }
}

fn binop(p: &str) -> Option<(BinaryOp, u8)> {
    Some(match p {
        "||" => (BinaryOp::LogicOr, 1),
        "&&" => (BinaryOp::LogicAnd, 2),
        "|" => (BinaryOp::BitOr, 3),
        "^" => (BinaryOp::BitXor, 4),
        "&" => (BinaryOp::BitAnd, 5),
        "==" => (BinaryOp::Eq, 6),
        "!=" => (BinaryOp::Ne, 6),
        "<" => (BinaryOp::Lt, 7),
        "<=" => (BinaryOp::Le, 7),
        ">" => (BinaryOp::Gt, 7),
        ">=" => (BinaryOp::Ge, 7),
        "<<" => (BinaryOp::Shl, 8),
        ">>" => (BinaryOp::Shr, 8),
        "+" => (BinaryOp::Add, 9),
        "-" => (BinaryOp::Sub, 9),
        "*" => (BinaryOp::Mul, 10),
        "/" => (BinaryOp::Div, 10),
        "%" => (BinaryOp::Rem, 10),
        _ => return None,
    })
}

/// C literal typing: the first type in the suffix's candidate list that holds the value.
pub fn literal_type(value: u64, hex: bool, unsigned: bool, long: bool) -> Option<IntType> {
    let candidates: &[IntType] = match (unsigned, long, hex) {
        (false, false, false) => &[IntType::I32, IntType::I64],
        (false, false, true) => &[IntType::I32, IntType::U32, IntType::I64, IntType::U64],
        (true, false, _) => &[IntType::U32, IntType::U64],
        (false, true, false) => &[IntType::I64],
        (false, true, true) => &[IntType::I64, IntType::U64],
        (true, true, _) => &[IntType::U64],
    };
    candidates.iter().copied().find(|t| {
        let max = if t.signed { t.mask() >> 1 } else { t.mask() };
        value <= max
    })
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int { value, .. } => format!("`{value}`"),
        Tok::Str(s) => format!("\"{s}\""),
        Tok::Punct(p) => format!("`{p}`"),
        Tok::Unsupported(w) => w.to_string(),
        Tok::Eof => "end of input".into(),
    }
}
