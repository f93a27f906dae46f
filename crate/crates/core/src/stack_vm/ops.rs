//! Per-opcode handlers for the stack machine.
//!
//! Binary operators pop `x` (the former top) and then `y`, and compute
//! `x OP y`; for `idiv` the former top is the dividend.

use thiserror::Error;

use super::{OperandStack, StackError, StackInstr, StackOpcode, StackOperand, Value, ValueTag};

/// What the interpreter loop does after a handler returns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Control {
    Next,
    Jump(usize),
    Call(usize),
    Return,
    /// Emit the value, then continue with the next instruction.
    Print(Value),
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum StepError {
    #[error("stack underflow")]
    StackUnderflow,
    #[error("stack overflow (capacity {capacity})")]
    StackOverflow { capacity: usize },
    #[error("`{opcode}` cannot operate on {found:?}")]
    TypeMismatch { opcode: StackOpcode, found: ValueTag },
    #[error("division by zero")]
    DivisionByZero,
    #[error("call depth exceeds {limit}")]
    CallDepthExceeded { limit: usize },
    #[error("`{opcode}` has an operand of the wrong kind")]
    InvalidOperand { opcode: StackOpcode },
}

impl From<StackError> for StepError {
    fn from(e: StackError) -> Self {
        match e {
            StackError::Underflow => StepError::StackUnderflow,
            StackError::Overflow { capacity } => StepError::StackOverflow { capacity },
        }
    }
}

/// The two stacks visible to one procedure activation.
pub struct StepContext<'a> {
    pub local: &'a mut OperandStack,
    pub global: &'a mut OperandStack,
}

pub(crate) type Handler = fn(&mut StepContext<'_>, StackOperand) -> Result<Control, StepError>;

/// Executes one instruction against `ctx`. Control transfer is left to the
/// caller.
pub fn step(ctx: &mut StepContext<'_>, instr: &StackInstr) -> Result<Control, StepError> {
    handler(instr.opcode)(ctx, instr.operand)
}

#[inline(always)]
pub(crate) fn handler(op: StackOpcode) -> Handler {
    use StackOpcode::*;
    match op {
        Iconst | Fconst | Cconst | Bconst => op_const,
        Iadd => op_iadd,
        Imul => op_imul,
        Idiv => op_idiv,
        Fadd => op_fadd,
        Fmul => op_fmul,
        Fdiv => op_fdiv,
        Ilt => op_ilt,
        Igt => op_igt,
        Ieq => op_ieq,
        If => op_if,
        Ne => op_ne,
        And => op_and,
        Or => op_or,
        Xor => op_xor,
        Dup => op_dup,
        Swap => op_swap,
        Inc => op_inc,
        Dec => op_dec,
        Pop => op_pop,
        Gload => op_gload,
        Gstore => op_gstore,
        Print => op_print,
        Call => op_call,
        Ret | Ter => op_ret,
        Goto => op_goto,
        IfIcmple => op_if_icmple,
    }
}

fn mismatch(opcode: StackOpcode, v: Value) -> StepError {
    StepError::TypeMismatch { opcode, found: v.tag() }
}

#[inline(always)]
fn pop2(ctx: &mut StepContext<'_>) -> Result<(Value, Value), StepError> {
    let x = ctx.local.pop()?;
    let y = ctx.local.pop()?;
    Ok((x, y))
}

#[inline(always)]
fn ints(opcode: StackOpcode, x: Value, y: Value) -> Result<(i32, i32), StepError> {
    match (x, y) {
        (Value::Int(a), Value::Int(b)) => Ok((a, b)),
        (Value::Int(_), other) | (other, _) => Err(mismatch(opcode, other)),
    }
}

#[inline(always)]
fn floats(opcode: StackOpcode, x: Value, y: Value) -> Result<(f64, f64), StepError> {
    match (x, y) {
        (Value::Float(a), Value::Float(b)) => Ok((a, b)),
        (Value::Float(_), other) | (other, _) => Err(mismatch(opcode, other)),
    }
}

/// Bool, or Int restricted to 0/1.
fn truth(opcode: StackOpcode, v: Value) -> Result<bool, StepError> {
    match v {
        Value::Bool(b) => Ok(b),
        Value::Int(0) => Ok(false),
        Value::Int(1) => Ok(true),
        other => Err(mismatch(opcode, other)),
    }
}

fn op_const(ctx: &mut StepContext<'_>, operand: StackOperand) -> Result<Control, StepError> {
    let v = match operand {
        StackOperand::Int(v) => Value::Int(v),
        StackOperand::Float(v) => Value::Float(v),
        StackOperand::Char(c) => Value::Char(c),
        StackOperand::Bool(b) => Value::Bool(b),
        _ => {
            return Err(StepError::InvalidOperand {
                opcode: StackOpcode::Iconst,
            })
        }
    };
    ctx.local.push(v)?;
    Ok(Control::Next)
}

macro_rules! int_binop {
    ($name:ident, $opcode:ident, |$a:ident, $b:ident| $body:expr) => {
        fn $name(ctx: &mut StepContext<'_>, _: StackOperand) -> Result<Control, StepError> {
            let (x, y) = pop2(ctx)?;
            let ($a, $b) = ints(StackOpcode::$opcode, x, y)?;
            ctx.local.push($body)?;
            Ok(Control::Next)
        }
    };
}

macro_rules! float_binop {
    ($name:ident, $opcode:ident, |$a:ident, $b:ident| $body:expr) => {
        fn $name(ctx: &mut StepContext<'_>, _: StackOperand) -> Result<Control, StepError> {
            let (x, y) = pop2(ctx)?;
            let ($a, $b) = floats(StackOpcode::$opcode, x, y)?;
            ctx.local.push(Value::Float($body))?;
            Ok(Control::Next)
        }
    };
}

int_binop!(op_iadd, Iadd, |x, y| Value::Int(x.wrapping_add(y)));
int_binop!(op_imul, Imul, |x, y| Value::Int(x.wrapping_mul(y)));
int_binop!(op_ilt, Ilt, |x, y| Value::Bool(x < y));
int_binop!(op_igt, Igt, |x, y| Value::Bool(x > y));
int_binop!(op_ieq, Ieq, |x, y| Value::Bool(x == y));
float_binop!(op_fadd, Fadd, |x, y| x + y);
float_binop!(op_fmul, Fmul, |x, y| x * y);
float_binop!(op_fdiv, Fdiv, |x, y| x / y);

fn op_idiv(ctx: &mut StepContext<'_>, _: StackOperand) -> Result<Control, StepError> {
    let (x, y) = pop2(ctx)?;
    let (x, y) = ints(StackOpcode::Idiv, x, y)?;
    if y == 0 {
        return Err(StepError::DivisionByZero);
    }
    ctx.local.push(Value::Int(x.wrapping_div(y)))?;
    Ok(Control::Next)
}

/// Material implication: pops q then p, pushes `!p || q`.
fn op_if(ctx: &mut StepContext<'_>, _: StackOperand) -> Result<Control, StepError> {
    let (q, p) = pop2(ctx)?;
    let q = truth(StackOpcode::If, q)?;
    let p = truth(StackOpcode::If, p)?;
    ctx.local.push(Value::Bool(!p || q))?;
    Ok(Control::Next)
}

fn op_ne(ctx: &mut StepContext<'_>, _: StackOperand) -> Result<Control, StepError> {
    let v = match ctx.local.pop()? {
        Value::Bool(b) => Value::Bool(!b),
        Value::Int(0) => Value::Int(1),
        Value::Int(1) => Value::Int(0),
        other => return Err(mismatch(StackOpcode::Ne, other)),
    };
    ctx.local.push(v)?;
    Ok(Control::Next)
}

macro_rules! logic_binop {
    ($name:ident, $opcode:ident, $op:tt) => {
        fn $name(ctx: &mut StepContext<'_>, _: StackOperand) -> Result<Control, StepError> {
            let (x, y) = pop2(ctx)?;
            let v = match (x, y) {
                (Value::Bool(a), Value::Bool(b)) => Value::Bool(a $op b),
                (Value::Int(a), Value::Int(b)) => Value::Int(a $op b),
                (Value::Bool(_), other) | (Value::Int(_), other) | (other, _) => {
                    return Err(mismatch(StackOpcode::$opcode, other))
                }
            };
            ctx.local.push(v)?;
            Ok(Control::Next)
        }
    };
}

logic_binop!(op_and, And, &);
logic_binop!(op_or, Or, |);
logic_binop!(op_xor, Xor, ^);

fn op_dup(ctx: &mut StepContext<'_>, _: StackOperand) -> Result<Control, StepError> {
    let v = ctx.local.peek()?;
    ctx.local.push(v)?;
    Ok(Control::Next)
}

fn op_swap(ctx: &mut StepContext<'_>, _: StackOperand) -> Result<Control, StepError> {
    let (x, y) = pop2(ctx)?;
    ctx.local.push(x)?;
    ctx.local.push(y)?;
    Ok(Control::Next)
}

fn op_pop(ctx: &mut StepContext<'_>, _: StackOperand) -> Result<Control, StepError> {
    ctx.local.pop()?;
    Ok(Control::Next)
}

fn op_inc(ctx: &mut StepContext<'_>, _: StackOperand) -> Result<Control, StepError> {
    match ctx.local.pop()? {
        Value::Int(v) => ctx.local.push(Value::Int(v.wrapping_add(1)))?,
        other => return Err(mismatch(StackOpcode::Inc, other)),
    }
    Ok(Control::Next)
}

fn op_dec(ctx: &mut StepContext<'_>, _: StackOperand) -> Result<Control, StepError> {
    match ctx.local.pop()? {
        Value::Int(v) => ctx.local.push(Value::Int(v.wrapping_sub(1)))?,
        other => return Err(mismatch(StackOpcode::Dec, other)),
    }
    Ok(Control::Next)
}

fn op_gstore(ctx: &mut StepContext<'_>, _: StackOperand) -> Result<Control, StepError> {
    let v = ctx.local.pop()?;
    ctx.global.push(v)?;
    Ok(Control::Next)
}

fn op_gload(ctx: &mut StepContext<'_>, _: StackOperand) -> Result<Control, StepError> {
    let v = ctx.global.pop()?;
    ctx.local.push(v)?;
    Ok(Control::Next)
}

fn op_print(ctx: &mut StepContext<'_>, _: StackOperand) -> Result<Control, StepError> {
    Ok(Control::Print(ctx.local.pop()?))
}

fn op_call(_: &mut StepContext<'_>, operand: StackOperand) -> Result<Control, StepError> {
    match operand {
        StackOperand::Proc(p) => Ok(Control::Call(p)),
        _ => Err(StepError::InvalidOperand {
            opcode: StackOpcode::Call,
        }),
    }
}

fn op_ret(_: &mut StepContext<'_>, _: StackOperand) -> Result<Control, StepError> {
    Ok(Control::Return)
}

fn op_goto(_: &mut StepContext<'_>, operand: StackOperand) -> Result<Control, StepError> {
    match operand {
        StackOperand::Line(l) => Ok(Control::Jump(l)),
        _ => Err(StepError::InvalidOperand {
            opcode: StackOpcode::Goto,
        }),
    }
}

/// Pops the condition; jumps when it is Bool false or Int 0.
fn op_if_icmple(ctx: &mut StepContext<'_>, operand: StackOperand) -> Result<Control, StepError> {
    let StackOperand::Line(target) = operand else {
        return Err(StepError::InvalidOperand {
            opcode: StackOpcode::IfIcmple,
        });
    };
    let falsy = match ctx.local.pop()? {
        Value::Bool(b) => !b,
        Value::Int(v) => v == 0,
        other => return Err(mismatch(StackOpcode::IfIcmple, other)),
    };
    Ok(if falsy { Control::Jump(target) } else { Control::Next })
}
