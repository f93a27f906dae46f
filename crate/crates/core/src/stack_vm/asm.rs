//! Two-pass assembler for `.fng` stack-machine sources.
//!
//! Pass one records every `procedure <name>` header in order, so that pass
//! two can replace `call <name>` with the callee's index. Jump operands are
//! 0-based instruction lines within the enclosing procedure; the header line
//! itself is not an instruction.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::{ProcedureDef, StackInstr, StackOpcode, StackOperand, StackProgram};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {kind}")]
pub struct StackParseError {
    /// 1-based source line.
    pub line: usize,
    pub kind: StackParseErrorKind,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StackParseErrorKind {
    #[error("unknown instruction `{0}`")]
    UnknownInstruction(String),
    #[error("call to undeclared procedure `{0}`")]
    UnknownProcedure(String),
    #[error("malformed operand for `{opcode}`: {detail}")]
    MalformedOperand { opcode: String, detail: String },
    #[error("first procedure must be `main`")]
    MissingMain,
    #[error("jump target {target} outside procedure of {len} instructions")]
    JumpOutOfRange { target: usize, len: usize },
    #[error("procedure `{0}` declared twice")]
    DuplicateProcedure(String),
    #[error("instruction outside any procedure")]
    OutsideProcedure,
}

fn err(line: usize, kind: StackParseErrorKind) -> StackParseError {
    StackParseError { line, kind }
}

/// Drops a `;` comment that starts at the beginning of a token.
fn strip_comment(line: &str) -> &str {
    let bytes = line.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if b == b';' && (i == 0 || bytes[i - 1].is_ascii_whitespace()) {
            return &line[..i];
        }
    }
    line
}

struct SourceLine<'a> {
    number: usize,
    text: &'a str,
}

fn significant_lines(text: &str) -> impl Iterator<Item = SourceLine<'_>> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let text = strip_comment(raw).trim();
        (!text.is_empty()).then_some(SourceLine { number: i + 1, text })
    })
}

fn header_name(text: &str) -> Option<Result<&str, ()>> {
    let mut tokens = text.split_whitespace();
    if tokens.next() != Some("procedure") {
        return None;
    }
    match (tokens.next(), tokens.next()) {
        (Some(name), None) => Some(Ok(name)),
        _ => Some(Err(())),
    }
}

pub fn parse_stack_source(text: &str) -> Result<StackProgram, StackParseError> {
    // Pass one: procedure names in declaration order.
    let mut index_of: HashMap<&str, usize> = HashMap::new();
    let mut names: Vec<&str> = Vec::new();
    for line in significant_lines(text) {
        match header_name(line.text) {
            Some(Ok(name)) => {
                if index_of.insert(name, names.len()).is_some() {
                    return Err(err(
                        line.number,
                        StackParseErrorKind::DuplicateProcedure(name.to_string()),
                    ));
                }
                names.push(name);
            }
            Some(Err(())) => {
                return Err(err(
                    line.number,
                    StackParseErrorKind::MalformedOperand {
                        opcode: "procedure".into(),
                        detail: "expected exactly one procedure name".into(),
                    },
                ))
            }
            None => {}
        }
    }
    if names.first() != Some(&"main") {
        let line = significant_lines(text).next().map_or(1, |l| l.number);
        return Err(err(line, StackParseErrorKind::MissingMain));
    }

    // Pass two: instructions, with calls resolved to indices.
    let mut procedures: Vec<ProcedureDef> = Vec::with_capacity(names.len());
    let mut jumps: Vec<(usize, usize)> = Vec::new(); // (source line, target) for current procedure
    for line in significant_lines(text) {
        if let Some(Ok(name)) = header_name(line.text) {
            if let Some(done) = procedures.last() {
                check_jumps(&jumps, done.instrs.len())?;
            }
            jumps.clear();
            procedures.push(ProcedureDef {
                name: name.to_string(),
                instrs: Vec::new(),
            });
            continue;
        }
        let current = procedures
            .last_mut()
            .ok_or_else(|| err(line.number, StackParseErrorKind::OutsideProcedure))?;
        let instr = parse_instruction(line.number, line.text, &index_of)?;
        if let StackOperand::Line(target) = instr.operand {
            jumps.push((line.number, target));
        }
        current.instrs.push(instr);
    }
    if let Some(done) = procedures.last() {
        check_jumps(&jumps, done.instrs.len())?;
    }
    Ok(StackProgram { procedures })
}

fn check_jumps(jumps: &[(usize, usize)], len: usize) -> Result<(), StackParseError> {
    for &(line, target) in jumps {
        if target >= len {
            return Err(err(line, StackParseErrorKind::JumpOutOfRange { target, len }));
        }
    }
    Ok(())
}

fn parse_instruction(line: usize, text: &str, procs: &HashMap<&str, usize>) -> Result<StackInstr, StackParseError> {
    let (mnemonic, rest) = match text.split_once(char::is_whitespace) {
        Some((m, r)) => (m, r.trim()),
        None => (text, ""),
    };
    let opcode = StackOpcode::from_mnemonic(mnemonic)
        .ok_or_else(|| err(line, StackParseErrorKind::UnknownInstruction(mnemonic.to_string())))?;
    let malformed = |detail: &str| {
        err(
            line,
            StackParseErrorKind::MalformedOperand {
                opcode: mnemonic.to_string(),
                detail: detail.to_string(),
            },
        )
    };

    if opcode.arity() == 0 {
        if !rest.is_empty() {
            return Err(malformed("takes no operand"));
        }
        return Ok(StackInstr::bare(opcode));
    }
    if rest.is_empty() {
        return Err(malformed("missing operand"));
    }
    // Character literals may be a quoted space, so they take the raw rest.
    if opcode == StackOpcode::Cconst {
        let c = parse_char(rest).ok_or_else(|| malformed("expected a single character"))?;
        return Ok(StackInstr::new(opcode, StackOperand::Char(c)));
    }
    let mut tokens = rest.split_whitespace();
    let token = tokens.next().unwrap_or_default();
    if tokens.next().is_some() {
        return Err(malformed("takes exactly one operand"));
    }
    let operand = match opcode {
        StackOpcode::Iconst => StackOperand::Int(token.parse().map_err(|_| malformed("expected a 32-bit integer"))?),
        StackOpcode::Fconst => StackOperand::Float(
            token
                .parse()
                .map_err(|_| malformed("expected a floating-point number"))?,
        ),
        StackOpcode::Bconst => StackOperand::Bool(match token {
            "0" | "false" => false,
            "1" | "true" => true,
            _ => return Err(malformed("expected 0 or 1")),
        }),
        StackOpcode::Goto | StackOpcode::IfIcmple => {
            StackOperand::Line(token.parse().map_err(|_| malformed("expected a line number"))?)
        }
        StackOpcode::Call => StackOperand::Proc(
            *procs
                .get(token)
                .ok_or_else(|| err(line, StackParseErrorKind::UnknownProcedure(token.to_string())))?,
        ),
        _ => unreachable!("every unary opcode is handled"),
    };
    Ok(StackInstr::new(opcode, operand))
}

fn parse_char(s: &str) -> Option<char> {
    let mut chars = s.chars();
    let first = chars.next()?;
    match (first, chars.next(), chars.next(), chars.next()) {
        (c, None, _, _) => Some(c),
        ('\'', Some(c), Some('\''), None) => Some(c),
        _ => None,
    }
}

/// Renders a program back to `.fng` text that reassembles to the same
/// program.
pub fn render_stack_source(program: &StackProgram) -> String {
    let mut out = String::new();
    for proc in &program.procedures {
        let _ = writeln!(out, "procedure {}", proc.name);
        for instr in &proc.instrs {
            out.push_str(instr.opcode.mnemonic());
            match instr.operand {
                StackOperand::None => {}
                StackOperand::Int(v) => {
                    let _ = write!(out, " {v}");
                }
                StackOperand::Float(v) => {
                    let _ = write!(out, " {v:?}");
                }
                StackOperand::Char(c) => {
                    let _ = write!(out, " '{c}'");
                }
                StackOperand::Bool(b) => {
                    let _ = write!(out, " {}", b as u8);
                }
                StackOperand::Line(l) => {
                    let _ = write!(out, " {l}");
                }
                StackOperand::Proc(p) => {
                    let _ = write!(out, " {}", program.procedures[p].name);
                }
            }
            out.push('\n');
        }
    }
    out
}
