//! Register-based machine: four integer registers, one flat global memory,
//! Polish-notation instructions with up to three typed operands.

mod asm;
mod codec;
mod exec;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use asm::{disassemble, parse_register_source, RegParseError, RegParseErrorKind};
pub use codec::{decode_register_program, encode_register_program, CodecError, MAGIC, RECORD_LEN, VERSION};
pub use exec::{execute_register, MachineSnapshot, RegExecConfig, RegStepError, RegVmError};

pub const REGISTER_COUNT: usize = 4;

macro_rules! reg_opcodes {
    ($($variant:ident => $name:literal, $code:literal, $arity:literal;)*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum RegOpcode {
            $($variant,)*
        }

        impl RegOpcode {
            pub const ALL: &'static [RegOpcode] = &[$(RegOpcode::$variant,)*];

            pub fn code(self) -> u8 {
                match self {
                    $(RegOpcode::$variant => $code,)*
                }
            }

            pub fn from_code(code: u8) -> Option<RegOpcode> {
                match code {
                    $($code => Some(RegOpcode::$variant),)*
                    _ => None,
                }
            }

            pub fn arity(self) -> usize {
                match self {
                    $(RegOpcode::$variant => $arity,)*
                }
            }

            pub fn mnemonic(self) -> &'static str {
                match self {
                    $(RegOpcode::$variant => $name,)*
                }
            }

            /// Case-insensitive.
            pub fn from_mnemonic(s: &str) -> Option<RegOpcode> {
                $(if s.eq_ignore_ascii_case($name) {
                    return Some(RegOpcode::$variant);
                })*
                None
            }
        }
    };
}

reg_opcodes! {
    Add => "add", 0x0, 3;
    Div => "div", 0x1, 3;
    Mul => "mul", 0x2, 3;
    Ltn => "ltn", 0x3, 3;
    Eql => "eql", 0x4, 3;
    And => "and", 0x5, 3;
    Not => "not", 0x6, 2;
    Or => "or", 0x7, 3;
    Inc => "inc", 0x8, 1;
    Dec => "dec", 0x9, 1;
    Print => "print", 0xA, 1;
    Load => "load", 0xB, 2;
    Goto => "goto", 0xC, 1;
    If => "if", 0xD, 2;
    Return => "return", 0xE, 0;
    Call => "call", 0xF, 1;
}

impl fmt::Display for RegOpcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operand {
    Memory(u32),
    Register(u8),
    Const(i32),
    /// Absolute instruction index, resolved at assembly.
    Label(u32),
}

impl Operand {
    pub fn kind(&self) -> OperandKind {
        match self {
            Operand::Memory(_) => OperandKind::Memory,
            Operand::Register(_) => OperandKind::Register,
            Operand::Const(_) => OperandKind::Const,
            Operand::Label(_) => OperandKind::Label,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperandKind {
    Memory,
    Register,
    Const,
    Label,
}

/// Operand-shape violations shared by the assembler and the decoder.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InstrError {
    #[error("`{opcode}` takes {expected} operands, got {found}")]
    ArityMismatch {
        opcode: RegOpcode,
        expected: usize,
        found: usize,
    },
    #[error("operand {position} of `{opcode}` cannot be {kind:?}")]
    BadOperandKind {
        opcode: RegOpcode,
        position: usize,
        kind: OperandKind,
    },
    #[error("register R{0} does not exist")]
    RegisterOutOfRange(u8),
}

/// One instruction. Slots past the opcode's arity are unused.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegInstr {
    opcode: RegOpcode,
    slots: [Operand; 3],
}

const UNUSED: Operand = Operand::Const(0);

#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    /// Memory or register.
    Dest,
    /// Memory, register or constant.
    Src,
    Target,
}

fn roles(opcode: RegOpcode) -> &'static [Role] {
    use RegOpcode::*;
    use Role::*;
    match opcode {
        Add | Div | Mul | Ltn | Eql | And | Or => &[Dest, Src, Src],
        Not | Load => &[Dest, Src],
        Inc | Dec => &[Dest],
        Print => &[Src],
        Goto | Call => &[Target],
        If => &[Dest, Target],
        Return => &[],
    }
}

impl RegInstr {
    pub fn new(opcode: RegOpcode, operands: &[Operand]) -> Result<RegInstr, InstrError> {
        let roles = roles(opcode);
        if operands.len() != roles.len() {
            return Err(InstrError::ArityMismatch {
                opcode,
                expected: roles.len(),
                found: operands.len(),
            });
        }
        let mut slots = [UNUSED; 3];
        for (position, (&op, &role)) in operands.iter().zip(roles).enumerate() {
            let allowed = match (role, op) {
                (_, Operand::Register(r)) if r as usize >= REGISTER_COUNT => {
                    return Err(InstrError::RegisterOutOfRange(r))
                }
                (Role::Dest, Operand::Memory(_) | Operand::Register(_)) => true,
                (Role::Src, Operand::Memory(_) | Operand::Register(_) | Operand::Const(_)) => true,
                (Role::Target, Operand::Label(_)) => true,
                _ => false,
            };
            if !allowed {
                return Err(InstrError::BadOperandKind {
                    opcode,
                    position,
                    kind: op.kind(),
                });
            }
            slots[position] = op;
        }
        Ok(RegInstr { opcode, slots })
    }

    pub fn opcode(&self) -> RegOpcode {
        self.opcode
    }

    pub fn operands(&self) -> &[Operand] {
        &self.slots[..self.opcode.arity()]
    }

    #[inline(always)]
    pub(crate) fn slots(&self) -> &[Operand; 3] {
        &self.slots
    }

    /// Instruction fetch plus one fetch per operand slot.
    #[inline(always)]
    pub fn fetch_cost(&self) -> u64 {
        1 + self.opcode.arity() as u64
    }

    pub fn jump_target(&self) -> Option<u32> {
        self.operands().iter().find_map(|op| match op {
            Operand::Label(t) => Some(*t),
            _ => None,
        })
    }
}

/// A flat instruction list. The source label table is kept for diagnostics
/// and disassembly only; it does not take part in equality, and binary
/// bytecode does not carry it.
#[derive(Debug, Clone)]
pub struct RegProgram {
    instrs: Vec<RegInstr>,
    labels: BTreeMap<u32, usize>,
}

impl PartialEq for RegProgram {
    fn eq(&self, other: &Self) -> bool {
        self.instrs == other.instrs
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("instruction {index} jumps to {target}, past the end ({len})")]
pub struct LabelOutOfRange {
    pub index: usize,
    pub target: u32,
    pub len: usize,
}

impl RegProgram {
    pub fn new(instrs: Vec<RegInstr>, labels: BTreeMap<u32, usize>) -> Result<Self, LabelOutOfRange> {
        let len = instrs.len();
        for (index, instr) in instrs.iter().enumerate() {
            if let Some(target) = instr.jump_target() {
                if target as usize > len {
                    return Err(LabelOutOfRange { index, target, len });
                }
            }
        }
        Ok(RegProgram { instrs, labels })
    }

    pub fn instrs(&self) -> &[RegInstr] {
        &self.instrs
    }

    pub fn labels(&self) -> &BTreeMap<u32, usize> {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.instrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty()
    }
}
