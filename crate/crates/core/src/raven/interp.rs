//! Tree-walking evaluator for introspection functions.

use thiserror::Error;

use super::ast::*;
use super::value::{IntType, Value};

/// Per-hook step budget applied when callers don't pick one.
pub const DEFAULT_STEP_BUDGET: u64 = 1_000_000;

const MAX_CALL_DEPTH: usize = 64;

/// The introspection surface a Raven sees while a hook is paused.
///
/// `reg_state` and `mem_read` must not change emulator state.
pub trait Intrinsics {
    fn reg_state(&mut self, reg: u64) -> Result<u64, String>;
    fn mem_read(&mut self, addr: u64, size: u8) -> Result<u64, String>;
    fn report(&mut self, kind: ReportKind, bug_id: &str);
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("step budget of {budget} exceeded in `{function}`")]
    StepBudgetExceeded { function: String, budget: u64 },
    #[error("division by zero in `{function}`")]
    DivisionByZero { function: String },
    #[error("index {index} out of bounds for `{array}[{len}]` in `{function}`")]
    IndexOutOfBounds {
        function: String,
        array: String,
        index: i128,
        len: usize,
    },
    #[error("frb_mem_read size {size} is not 1, 2, 4 or 8 in `{function}`")]
    InvalidReadSize { function: String, size: i128 },
    #[error("frb_mem_read({addr:#x}, {size}) failed in `{function}`: {reason}")]
    MemRead {
        function: String,
        addr: u64,
        size: u8,
        reason: String,
    },
    #[error("frb_reg_state({reg}) failed in `{function}`: {reason}")]
    RegRead {
        function: String,
        reg: i128,
        reason: String,
    },
    #[error("call depth limit exceeded in `{function}`")]
    CallDepth { function: String },
}

/// Storage for a program's globals, one vector of normalized bits per declaration.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GlobalState {
    slots: Vec<Vec<u64>>,
}

impl GlobalState {
    pub fn new(program: &RavenProgram) -> Self {
        GlobalState {
            slots: program.globals.iter().map(|g| g.init.clone()).collect(),
        }
    }

    /// Element `index` of global `name` (0 for scalars).
    pub fn get(&self, program: &RavenProgram, name: &str, index: usize) -> Option<Value> {
        let g = program.globals.iter().position(|g| g.name == name)?;
        let bits = *self.slots[g].get(index)?;
        Some(Value::new(bits, program.globals[g].ty))
    }
}

enum Flow {
    Normal,
    Break,
    Continue,
    Return,
}

struct Ctx<'a> {
    program: &'a RavenProgram,
    intrinsics: &'a mut dyn Intrinsics,
    globals: &'a mut GlobalState,
    steps: u64,
    budget: u64,
    depth: usize,
    function: &'a str,
}

/// Run `function` to completion. `report_*` calls reach `intrinsics` as they execute,
/// so reports made before an error are still observed by the caller.
pub fn eval_hook(
    program: &RavenProgram,
    function: &str,
    intrinsics: &mut dyn Intrinsics,
    globals: &mut GlobalState,
    step_budget: u64,
) -> Result<(), EvalError> {
    let mut ctx = Ctx {
        program,
        intrinsics,
        globals,
        steps: 0,
        budget: step_budget,
        depth: 0,
        function,
    };
    ctx.call(function)
}

impl<'a> Ctx<'a> {
    fn tick(&mut self) -> Result<(), EvalError> {
        self.steps += 1;
        if self.steps > self.budget {
            return Err(EvalError::StepBudgetExceeded {
                function: self.function.to_string(),
                budget: self.budget,
            });
        }
        Ok(())
    }

    fn call(&mut self, name: &str) -> Result<(), EvalError> {
        let program = self.program;
        let f = program
            .function(name)
            .ok_or_else(|| EvalError::UnknownFunction(name.to_string()))?;
        if self.depth >= MAX_CALL_DEPTH {
            return Err(EvalError::CallDepth {
                function: name.to_string(),
            });
        }
        self.depth += 1;
        let mut frame: Vec<Value> = f.locals.iter().map(|t| Value::new(0, *t)).collect();
        for s in &f.body {
            if let Flow::Return = self.exec(s, &mut frame)? {
                break;
            }
        }
        self.depth -= 1;
        Ok(())
    }

    fn exec(&mut self, s: &Stmt, frame: &mut Vec<Value>) -> Result<Flow, EvalError> {
        self.tick()?;
        match s {
            Stmt::Expr(e) => {
                self.eval(e, frame)?;
            }
            Stmt::Local { slot, ty, init, .. } => {
                let v = match init {
                    Some(e) => self.eval(e, frame)?.cast(*ty),
                    None => Value::new(0, *ty),
                };
                frame[*slot] = v;
            }
            Stmt::If(c, t, e) => {
                if self.eval(c, frame)?.is_true() {
                    return self.exec(t, frame);
                } else if let Some(e) = e {
                    return self.exec(e, frame);
                }
            }
            Stmt::While(c, body) => {
                while self.eval(c, frame)?.is_true() {
                    match self.exec(body, frame)? {
                        Flow::Break => break,
                        Flow::Return => return Ok(Flow::Return),
                        Flow::Normal | Flow::Continue => {}
                    }
                }
            }
            Stmt::For {
                init,
                cond,
                step,
                body,
            } => {
                if let Some(i) = init {
                    self.exec(i, frame)?;
                }
                loop {
                    if let Some(c) = cond {
                        if !self.eval(c, frame)?.is_true() {
                            break;
                        }
                    } else {
                        self.tick()?;
                    }
                    match self.exec(body, frame)? {
                        Flow::Break => break,
                        Flow::Return => return Ok(Flow::Return),
                        Flow::Normal | Flow::Continue => {}
                    }
                    if let Some(st) = step {
                        self.eval(st, frame)?;
                    }
                }
            }
            Stmt::Block(stmts) | Stmt::Decls(stmts) => {
                for s in stmts {
                    match self.exec(s, frame)? {
                        Flow::Normal => {}
                        other => return Ok(other),
                    }
                }
            }
            Stmt::Return => return Ok(Flow::Return),
            Stmt::Break => return Ok(Flow::Break),
            Stmt::Continue => return Ok(Flow::Continue),
            Stmt::Empty => {}
        }
        Ok(Flow::Normal)
    }

    fn arith_err(&self, e: ArithError) -> EvalError {
        match e {
            ArithError::DivisionByZero => EvalError::DivisionByZero {
                function: self.function.to_string(),
            },
        }
    }

    fn element_index(&mut self, global: usize, name: &str, index: &Expr, frame: &mut Vec<Value>) -> Result<usize, EvalError> {
        let i = self.eval(index, frame)?.as_i128();
        let len = self.globals.slots[global].len();
        if i < 0 || i >= len as i128 {
            return Err(EvalError::IndexOutOfBounds {
                function: self.function.to_string(),
                array: name.to_string(),
                index: i,
                len,
            });
        }
        Ok(i as usize)
    }

    fn load(&mut self, place: &Place, frame: &mut Vec<Value>) -> Result<(Value, Option<usize>), EvalError> {
        match place {
            Place::Var(v) => Ok((self.read_var(v, frame), None)),
            Place::Element {
                name,
                global,
                ty,
                index,
            } => {
                let i = self.element_index(*global, name, index, frame)?;
                Ok((Value::new(self.globals.slots[*global][i], *ty), Some(i)))
            }
        }
    }

    fn store(&mut self, place: &Place, idx: Option<usize>, v: Value, frame: &mut [Value]) -> Value {
        let v = v.cast(place.ty());
        match place {
            Place::Var(VarRef {
                slot: Slot::Local(s),
                ..
            }) => frame[*s] = v,
            Place::Var(VarRef {
                slot: Slot::Global(g),
                ..
            }) => self.globals.slots[*g][0] = v.bits(),
            Place::Element { global, .. } => {
                self.globals.slots[*global][idx.expect("element index")] = v.bits()
            }
        }
        v
    }

    fn read_var(&self, v: &VarRef, frame: &[Value]) -> Value {
        match v.slot {
            Slot::Local(s) => frame[s],
            Slot::Global(g) => Value::new(self.globals.slots[g][0], v.ty),
        }
    }

    fn eval(&mut self, e: &Expr, frame: &mut Vec<Value>) -> Result<Value, EvalError> {
        self.tick()?;
        Ok(match e {
            Expr::Lit(v) => *v,
            Expr::Var(v) => self.read_var(v, frame),
            Expr::Element {
                name,
                global,
                ty,
                index,
            } => {
                let i = self.element_index(*global, name, index, frame)?;
                Value::new(self.globals.slots[*global][i], *ty)
            }
            Expr::Unary(op, a) => unary(*op, self.eval(a, frame)?),
            Expr::Binary(BinaryOp::LogicAnd, a, b) => {
                Value::bool(self.eval(a, frame)?.is_true() && self.eval(b, frame)?.is_true())
            }
            Expr::Binary(BinaryOp::LogicOr, a, b) => {
                Value::bool(self.eval(a, frame)?.is_true() || self.eval(b, frame)?.is_true())
            }
            Expr::Binary(op, a, b) => {
                let a = self.eval(a, frame)?;
                let b = self.eval(b, frame)?;
                binary(*op, a, b).map_err(|e| self.arith_err(e))?
            }
            Expr::Assign { place, op, value } => {
                let (cur, idx) = match op {
                    Some(_) => {
                        let (v, i) = self.load(place, frame)?;
                        (Some(v), i)
                    }
                    None => match place {
                        Place::Var(_) => (None, None),
                        Place::Element {
                            name, global, index, ..
                        } => (None, Some(self.element_index(*global, name, index, frame)?)),
                    },
                };
                let rhs = self.eval(value, frame)?;
                let new = match (op, cur) {
                    (Some(op), Some(cur)) => binary(*op, cur, rhs).map_err(|e| self.arith_err(e))?,
                    _ => rhs,
                };
                self.store(place, idx, new, frame)
            }
            Expr::IncDec {
                place,
                increment,
                prefix,
            } => {
                let (cur, idx) = self.load(place, frame)?;
                let op = if *increment { BinaryOp::Add } else { BinaryOp::Sub };
                let new = binary(op, cur, Value::int(1)).map_err(|e| self.arith_err(e))?;
                let stored = self.store(place, idx, new, frame);
                if *prefix {
                    stored
                } else {
                    cur
                }
            }
            Expr::Cond(c, a, b) => {
                let ty = IntType::common(type_of(a), type_of(b));
                let v = if self.eval(c, frame)?.is_true() {
                    self.eval(a, frame)?
                } else {
                    self.eval(b, frame)?
                };
                v.cast(ty)
            }
            Expr::Cast(ty, a) => self.eval(a, frame)?.cast(*ty),
            Expr::RegState(r) => {
                let reg = self.eval(r, frame)?.as_i128();
                let fail = |reason: String| EvalError::RegRead {
                    function: self.function.to_string(),
                    reg,
                    reason,
                };
                if reg < 0 {
                    return Err(fail("negative register id".into()));
                }
                match self.intrinsics.reg_state(reg as u64) {
                    Ok(v) => Value::u64(v),
                    Err(reason) => return Err(fail(reason)),
                }
            }
            Expr::MemRead(a, s) => {
                let addr = self.eval(a, frame)?.cast(IntType::U64).bits();
                let size = self.eval(s, frame)?.as_i128();
                if !matches!(size, 1 | 2 | 4 | 8) {
                    return Err(EvalError::InvalidReadSize {
                        function: self.function.to_string(),
                        size,
                    });
                }
                let size = size as u8;
                match self.intrinsics.mem_read(addr, size) {
                    Ok(v) => Value::new(v, IntType::new(size * 8, false).expect("valid width")),
                    Err(reason) => {
                        return Err(EvalError::MemRead {
                            function: self.function.to_string(),
                            addr,
                            size,
                            reason,
                        })
                    }
                }
            }
            Expr::Report(kind, id) => {
                self.intrinsics.report(*kind, id);
                Value::int(0)
            }
            Expr::Call(name) => {
                self.call(name)?;
                Value::int(0)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ArithError {
    DivisionByZero,
}

pub(crate) fn unary(op: UnaryOp, a: Value) -> Value {
    let ty = a.ty().promoted();
    let a = a.cast(ty);
    match op {
        UnaryOp::Neg => Value::new(a.bits().wrapping_neg(), ty),
        UnaryOp::Plus => a,
        UnaryOp::BitNot => Value::new(!a.bits(), ty),
        UnaryOp::Not => Value::bool(!a.is_true()),
    }
}

/// Non-short-circuit binary operators with C conversion rules and wrapping arithmetic.
pub(crate) fn binary(op: BinaryOp, a: Value, b: Value) -> Result<Value, ArithError> {
    if matches!(op, BinaryOp::Shl | BinaryOp::Shr) {
        let ty = a.ty().promoted();
        let a = a.cast(ty);
        let n = b.as_i128();
        // Out-of-range counts shift everything out.
        let bits = if n < 0 || n >= ty.width as i128 {
            match op {
                BinaryOp::Shr if ty.signed && (a.bits() as i64) < 0 => u64::MAX,
                _ => 0,
            }
        } else if op == BinaryOp::Shl {
            a.bits() << n
        } else if ty.signed {
            ((a.bits() as i64) >> n) as u64
        } else {
            a.bits() >> n
        };
        return Ok(Value::new(bits, ty));
    }
    if matches!(op, BinaryOp::LogicAnd | BinaryOp::LogicOr) {
        let r = match op {
            BinaryOp::LogicAnd => a.is_true() && b.is_true(),
            _ => a.is_true() || b.is_true(),
        };
        return Ok(Value::bool(r));
    }
    let ty = IntType::common(a.ty(), b.ty());
    let (x, y) = (a.cast(ty), b.cast(ty));
    let (xb, yb) = (x.bits(), y.bits());
    let cmp = |f: fn(i128, i128) -> bool| Ok(Value::bool(f(x.as_i128(), y.as_i128())));
    let bits = match op {
        BinaryOp::Add => xb.wrapping_add(yb),
        BinaryOp::Sub => xb.wrapping_sub(yb),
        BinaryOp::Mul => xb.wrapping_mul(yb),
        BinaryOp::Div | BinaryOp::Rem => {
            if yb == 0 {
                return Err(ArithError::DivisionByZero);
            }
            match (op, ty.signed) {
                (BinaryOp::Div, true) => (xb as i64).wrapping_div(yb as i64) as u64,
                (BinaryOp::Div, false) => xb / yb,
                (_, true) => (xb as i64).wrapping_rem(yb as i64) as u64,
                (_, false) => xb % yb,
            }
        }
        BinaryOp::BitAnd => xb & yb,
        BinaryOp::BitOr => xb | yb,
        BinaryOp::BitXor => xb ^ yb,
        BinaryOp::Eq => return cmp(|p, q| p == q),
        BinaryOp::Ne => return cmp(|p, q| p != q),
        BinaryOp::Lt => return cmp(|p, q| p < q),
        BinaryOp::Le => return cmp(|p, q| p <= q),
        BinaryOp::Gt => return cmp(|p, q| p > q),
        BinaryOp::Ge => return cmp(|p, q| p >= q),
        BinaryOp::Shl | BinaryOp::Shr | BinaryOp::LogicAnd | BinaryOp::LogicOr => unreachable!(),
    };
    Ok(Value::new(bits, ty))
}

/// Static type of an expression.
pub fn type_of(e: &Expr) -> IntType {
    match e {
        Expr::Lit(v) => v.ty(),
        Expr::Var(v) => v.ty,
        Expr::Element { ty, .. } | Expr::Cast(ty, _) => *ty,
        Expr::Unary(UnaryOp::Not, _) => IntType::I32,
        Expr::Unary(_, a) => type_of(a).promoted(),
        Expr::Binary(op, a, b) => match op {
            BinaryOp::Shl | BinaryOp::Shr => type_of(a).promoted(),
            BinaryOp::Eq
            | BinaryOp::Ne
            | BinaryOp::Lt
            | BinaryOp::Le
            | BinaryOp::Gt
            | BinaryOp::Ge
            | BinaryOp::LogicAnd
            | BinaryOp::LogicOr => IntType::I32,
            _ => IntType::common(type_of(a), type_of(b)),
        },
        Expr::Assign { place, .. } | Expr::IncDec { place, .. } => place.ty(),
        Expr::Cond(_, a, b) => IntType::common(type_of(a), type_of(b)),
        Expr::RegState(_) => IntType::U64,
        Expr::MemRead(_, s) => match const_eval(s).map(|v| v.as_i128()) {
            Some(n @ (1 | 2 | 4 | 8)) => IntType::new(n as u8 * 8, false).expect("valid width"),
            _ => IntType::U64,
        },
        Expr::Report(..) | Expr::Call(_) => IntType::I32,
    }
}

/// Folds an expression built only from literals, operators and casts.
pub fn const_eval(e: &Expr) -> Option<Value> {
    Some(match e {
        Expr::Lit(v) => *v,
        Expr::Unary(op, a) => unary(*op, const_eval(a)?),
        Expr::Binary(op, a, b) => binary(*op, const_eval(a)?, const_eval(b)?).ok()?,
        Expr::Cast(ty, a) => const_eval(a)?.cast(*ty),
        Expr::Cond(c, a, b) => {
            let ty = IntType::common(type_of(a), type_of(b));
            let v = if const_eval(c)?.is_true() { const_eval(a)? } else { const_eval(b)? };
            v.cast(ty)
        }
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn division_truncates_toward_zero() {
        let r = binary(BinaryOp::Div, Value::int(-7), Value::int(2)).unwrap();
        assert_eq!(r.as_i128(), -3);
        let r = binary(BinaryOp::Rem, Value::int(-7), Value::int(2)).unwrap();
        assert_eq!(r.as_i128(), -1);
        assert_eq!(
            binary(BinaryOp::Div, Value::int(1), Value::int(0)),
            Err(ArithError::DivisionByZero)
        );
    }

    #[test]
    fn int_min_div_minus_one_wraps() {
        let r = binary(BinaryOp::Div, Value::int(i32::MIN), Value::int(-1)).unwrap();
        assert_eq!(r.as_i128(), i32::MIN as i128);
    }

    #[test]
    fn mixed_sign_comparison_uses_unsigned() {
        let a = Value::new(0xffff_ffff, IntType::U32);
        let r = binary(BinaryOp::Eq, a, Value::int(-1)).unwrap();
        assert!(r.is_true());
        let r = binary(BinaryOp::Lt, Value::int(-1), Value::new(1, IntType::U32)).unwrap();
        assert!(!r.is_true());
    }

    #[test]
    fn shifts() {
        let r = binary(BinaryOp::Shr, Value::int(-8), Value::int(1)).unwrap();
        assert_eq!(r.as_i128(), -4);
        let r = binary(BinaryOp::Shl, Value::new(1, IntType::U8), Value::int(40)).unwrap();
        assert_eq!(r.bits(), 0);
        assert_eq!(r.ty(), IntType::I32);
    }
}
