//! Text assembler and disassembler for `.gnf` register-machine sources.
//!
//! A line `N:` declares label `N` at the index of the next instruction;
//! several labels may share an index, and a label after the last instruction
//! resolves to the instruction count. `P N` (or `PN`) references a label.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use super::{InstrError, Operand, OperandKind, RegInstr, RegOpcode, RegProgram};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {kind}")]
pub struct RegParseError {
    /// 1-based source line.
    pub line: usize,
    pub kind: RegParseErrorKind,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RegParseErrorKind {
    #[error("unknown instruction `{0}`")]
    UnknownInstruction(String),
    #[error("undeclared label {0}")]
    UnknownLabel(u32),
    #[error("label {0} declared twice")]
    DuplicateLabel(u32),
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
    #[error("address out of range: {0}")]
    AddressOutOfRange(String),
    #[error("malformed operand `{0}`")]
    MalformedOperand(String),
}

impl From<InstrError> for RegParseErrorKind {
    fn from(e: InstrError) -> Self {
        match e {
            InstrError::ArityMismatch {
                opcode,
                expected,
                found,
            } => RegParseErrorKind::ArityMismatch {
                opcode,
                expected,
                found,
            },
            InstrError::BadOperandKind { opcode, position, kind } => {
                RegParseErrorKind::BadOperandKind { opcode, position, kind }
            }
            InstrError::RegisterOutOfRange(r) => RegParseErrorKind::AddressOutOfRange(format!("R{r}")),
        }
    }
}

fn strip_comment(line: &str) -> &str {
    let bytes = line.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if b == b';' && (i == 0 || bytes[i - 1].is_ascii_whitespace()) {
            return &line[..i];
        }
    }
    line
}

/// Splits a leading `N:` label off a line.
fn split_label(text: &str) -> Option<(&str, &str)> {
    let colon = text.find(':')?;
    let (head, rest) = (text[..colon].trim(), text[colon + 1..].trim());
    (!head.is_empty() && head.bytes().all(|b| b.is_ascii_digit())).then_some((head, rest))
}

struct Line<'a> {
    number: usize,
    label: Option<&'a str>,
    body: &'a str,
}

fn lines(text: &str) -> impl Iterator<Item = Line<'_>> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let text = strip_comment(raw).trim();
        if text.is_empty() {
            return None;
        }
        Some(match split_label(text) {
            Some((label, body)) => Line {
                number: i + 1,
                label: Some(label),
                body,
            },
            None => Line {
                number: i + 1,
                label: None,
                body: text,
            },
        })
    })
}

pub fn parse_register_source(text: &str) -> Result<RegProgram, RegParseError> {
    let err = |line, kind| RegParseError { line, kind };

    // Pass one: label positions.
    let mut labels: BTreeMap<u32, usize> = BTreeMap::new();
    let mut count = 0usize;
    for line in lines(text) {
        if let Some(label) = line.label {
            let n: u32 = label
                .parse()
                .map_err(|_| err(line.number, RegParseErrorKind::MalformedOperand(label.into())))?;
            if labels.insert(n, count).is_some() {
                return Err(err(line.number, RegParseErrorKind::DuplicateLabel(n)));
            }
        }
        if !line.body.is_empty() {
            count += 1;
        }
    }

    // Pass two: instructions with labels resolved.
    let mut instrs = Vec::with_capacity(count);
    for line in lines(text) {
        if line.body.is_empty() {
            continue;
        }
        let mut tokens = line.body.split_whitespace();
        let mnemonic = tokens.next().expect("non-empty body");
        let opcode = RegOpcode::from_mnemonic(mnemonic)
            .ok_or_else(|| err(line.number, RegParseErrorKind::UnknownInstruction(mnemonic.to_string())))?;
        let mut operands = Vec::with_capacity(3);
        while let Some(tok) = tokens.next() {
            let joined;
            let tok = if tok.eq_ignore_ascii_case("p") {
                let n = tokens
                    .next()
                    .ok_or_else(|| err(line.number, RegParseErrorKind::MalformedOperand(tok.into())))?;
                joined = format!("P{n}");
                joined.as_str()
            } else {
                tok
            };
            operands.push(parse_operand(tok, &labels).map_err(|k| err(line.number, k))?);
        }
        let instr = RegInstr::new(opcode, &operands).map_err(|e| err(line.number, e.into()))?;
        instrs.push(instr);
    }
    Ok(RegProgram::new(instrs, labels).expect("labels resolve within the program"))
}

fn parse_operand(tok: &str, labels: &BTreeMap<u32, usize>) -> Result<Operand, RegParseErrorKind> {
    let malformed = || RegParseErrorKind::MalformedOperand(tok.to_string());
    let mut chars = tok.chars();
    let sigil = chars.next().ok_or_else(malformed)?;
    let rest = chars.as_str();
    match sigil {
        '@' => rest
            .parse::<u32>()
            .map(Operand::Memory)
            .map_err(|_| match rest.parse::<u64>() {
                Ok(_) => RegParseErrorKind::AddressOutOfRange(tok.to_string()),
                Err(_) => malformed(),
            }),
        'R' | 'r' => {
            let idx: u32 = rest.parse().map_err(|_| malformed())?;
            if idx as usize >= super::REGISTER_COUNT {
                return Err(RegParseErrorKind::AddressOutOfRange(tok.to_string()));
            }
            Ok(Operand::Register(idx as u8))
        }
        '#' => rest.parse::<i32>().map(Operand::Const).map_err(|_| malformed()),
        'P' | 'p' => {
            let n: u32 = rest.parse().map_err(|_| malformed())?;
            let index = labels.get(&n).ok_or(RegParseErrorKind::UnknownLabel(n))?;
            Ok(Operand::Label(*index as u32))
        }
        _ => Err(malformed()),
    }
}

/// Renders a program as `.gnf` text. Source labels are reused when present;
/// otherwise jump targets are numbered from 1 in address order.
pub fn disassemble(program: &RegProgram) -> String {
    let mut at: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
    let mut name_of: HashMap<usize, u32> = HashMap::new();
    for (&n, &index) in program.labels() {
        at.entry(index).or_default().push(n);
        name_of.entry(index).or_insert(n);
    }
    let mut targets: Vec<usize> = program
        .instrs()
        .iter()
        .filter_map(|i| i.jump_target().map(|t| t as usize))
        .collect();
    targets.sort_unstable();
    targets.dedup();
    let mut next = program.labels().keys().next_back().map_or(1, |n| n + 1);
    for t in targets {
        if let std::collections::hash_map::Entry::Vacant(e) = name_of.entry(t) {
            e.insert(next);
            at.entry(t).or_default().push(next);
            next += 1;
        }
    }

    let mut out = String::new();
    let emit_labels = |out: &mut String, index: usize| {
        if let Some(ns) = at.get(&index) {
            for n in ns {
                let _ = writeln!(out, "{n}:");
            }
        }
    };
    for (index, instr) in program.instrs().iter().enumerate() {
        emit_labels(&mut out, index);
        out.push_str(instr.opcode().mnemonic());
        for op in instr.operands() {
            let _ = match op {
                Operand::Memory(a) => write!(out, " @{a}"),
                Operand::Register(r) => write!(out, " R{r}"),
                Operand::Const(c) => write!(out, " #{c}"),
                Operand::Label(t) => write!(out, " P{}", name_of[&(*t as usize)]),
            };
        }
        out.push('\n');
    }
    emit_labels(&mut out, program.len());
    out
}
