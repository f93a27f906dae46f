//! Stack-based machine: tagged values on a per-procedure local stack plus
//! one shared global stack, procedures resolved to indices at assembly time.

mod asm;
mod exec;
mod ops;

use std::fmt;

use thiserror::Error;

pub use asm::{parse_stack_source, render_stack_source, StackParseError, StackParseErrorKind};
pub use exec::{execute_stack, StackExecConfig, StackVmError};
pub use ops::{step, Control, StepContext, StepError};

/// Runtime datum. The tag is fixed at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Int(i32),
    Float(f64),
    Char(char),
    Bool(bool),
}

impl Value {
    pub fn tag(&self) -> ValueTag {
        match self {
            Value::Int(_) => ValueTag::Int,
            Value::Float(_) => ValueTag::Float,
            Value::Char(_) => ValueTag::Char,
            Value::Bool(_) => ValueTag::Bool,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v}"),
            Value::Char(c) => write!(f, "{c}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueTag {
    Int,
    Float,
    Char,
    Bool,
}

macro_rules! stack_opcodes {
    ($($variant:ident => $name:literal, $arity:literal;)*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum StackOpcode {
            $($variant,)*
        }

        impl StackOpcode {
            pub const ALL: &'static [StackOpcode] = &[$(StackOpcode::$variant,)*];

            pub fn mnemonic(self) -> &'static str {
                match self {
                    $(StackOpcode::$variant => $name,)*
                }
            }

            /// Number of operands: 0 or 1.
            pub fn arity(self) -> usize {
                match self {
                    $(StackOpcode::$variant => $arity,)*
                }
            }

            pub fn from_mnemonic(s: &str) -> Option<StackOpcode> {
                match s {
                    $($name => Some(StackOpcode::$variant),)*
                    _ => None,
                }
            }
        }
    };
}

stack_opcodes! {
    Iconst => "iconst", 1;
    Fconst => "fconst", 1;
    Cconst => "cconst", 1;
    Bconst => "bconst", 1;
    Iadd => "iadd", 0;
    Imul => "imul", 0;
    Idiv => "idiv", 0;
    Fadd => "fadd", 0;
    Fmul => "fmul", 0;
    Fdiv => "fdiv", 0;
    Ilt => "ilt", 0;
    Igt => "igt", 0;
    Ieq => "ieq", 0;
    If => "if", 0;
    Ne => "ne", 0;
    And => "and", 0;
    Or => "or", 0;
    Xor => "xor", 0;
    Dup => "dup", 0;
    Swap => "swap", 0;
    Inc => "inc", 0;
    Dec => "dec", 0;
    Pop => "pop", 0;
    Gload => "gload", 0;
    Gstore => "gstore", 0;
    Print => "print", 0;
    Call => "call", 1;
    Ret => "ret", 0;
    Ter => "ter", 0;
    Goto => "goto", 1;
    IfIcmple => "if_icmple", 1;
}

impl fmt::Display for StackOpcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StackOperand {
    None,
    Int(i32),
    Float(f64),
    Char(char),
    Bool(bool),
    /// 0-based line within the enclosing procedure.
    Line(usize),
    /// Index into [`StackProgram::procedures`].
    Proc(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StackInstr {
    pub opcode: StackOpcode,
    pub operand: StackOperand,
}

impl StackInstr {
    pub fn new(opcode: StackOpcode, operand: StackOperand) -> Self {
        StackInstr { opcode, operand }
    }

    pub fn bare(opcode: StackOpcode) -> Self {
        StackInstr {
            opcode,
            operand: StackOperand::None,
        }
    }

    /// Instruction fetch plus one fetch for a present operand.
    #[inline(always)]
    pub fn fetch_cost(&self) -> u64 {
        1 + !matches!(self.operand, StackOperand::None) as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcedureDef {
    pub name: String,
    pub instrs: Vec<StackInstr>,
}

/// Ordered procedures; index 0 is `main`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackProgram {
    pub procedures: Vec<ProcedureDef>,
}

impl StackProgram {
    pub fn instruction_count(&self) -> usize {
        self.procedures.iter().map(|p| p.instrs.len()).sum()
    }

    pub fn procedure_index(&self, name: &str) -> Option<usize> {
        self.procedures.iter().position(|p| p.name == name)
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum StackError {
    #[error("stack underflow")]
    Underflow,
    #[error("stack overflow (capacity {capacity})")]
    Overflow { capacity: usize },
}

/// Fixed-capacity LIFO of values.
#[derive(Debug, Clone, PartialEq)]
pub struct OperandStack {
    items: Vec<Value>,
    capacity: usize,
}

impl OperandStack {
    pub fn new(capacity: usize) -> Self {
        OperandStack {
            items: Vec::with_capacity(capacity.min(64)),
            capacity,
        }
    }

    pub fn from_values(capacity: usize, values: &[Value]) -> Self {
        assert!(values.len() <= capacity);
        OperandStack {
            items: values.to_vec(),
            capacity,
        }
    }

    #[inline]
    pub fn push(&mut self, v: Value) -> Result<(), StackError> {
        if self.items.len() >= self.capacity {
            return Err(StackError::Overflow {
                capacity: self.capacity,
            });
        }
        self.items.push(v);
        Ok(())
    }

    #[inline]
    pub fn pop(&mut self) -> Result<Value, StackError> {
        self.items.pop().ok_or(StackError::Underflow)
    }

    #[inline]
    pub fn peek(&self) -> Result<Value, StackError> {
        self.items.last().copied().ok_or(StackError::Underflow)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Bottom to top.
    pub fn as_slice(&self) -> &[Value] {
        &self.items
    }

    pub fn bottom(&self) -> Option<Value> {
        self.items.first().copied()
    }
}
