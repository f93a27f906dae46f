//! `.gnfb` binary bytecode.
//!
//! Header: `GNFB`, version byte, three zero bytes, instruction count (u32
//! LE). Then one 17-byte record per instruction: opcode byte (code in the
//! low nibble), arity byte, and three `[tag, u32 LE payload]` slots. Tags:
//! 0 memory, 1 register, 2 const, 3 label, 0xFF absent (payload zero).

use std::collections::BTreeMap;

use thiserror::Error;

use super::{InstrError, LabelOutOfRange, Operand, RegInstr, RegOpcode, RegProgram};

pub const MAGIC: [u8; 4] = *b"GNFB";
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 12;
pub const RECORD_LEN: usize = 17;

const TAG_MEMORY: u8 = 0;
const TAG_REGISTER: u8 = 1;
const TAG_CONST: u8 = 2;
const TAG_LABEL: u8 = 3;
const TAG_ABSENT: u8 = 0xFF;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("not a GNFB file")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("reserved header bytes must be zero")]
    ReservedNonZero,
    #[error("header truncated")]
    TruncatedHeader,
    #[error("record {index} truncated")]
    TruncatedRecord { index: usize },
    #[error("record {index}: no opcode with code {code:#x} and arity {arity}")]
    InvalidOpcode { index: usize, code: u8, arity: u8 },
    #[error("record {index}, slot {slot}: invalid tag {tag:#x}")]
    InvalidTag { index: usize, slot: usize, tag: u8 },
    #[error("record {index}, slot {slot}: absent operand has a non-zero payload")]
    NonZeroPadding { index: usize, slot: usize },
    #[error("record {index}: {source}")]
    InvalidInstruction {
        index: usize,
        #[source]
        source: InstrError,
    },
    #[error(transparent)]
    LabelOutOfRange(#[from] LabelOutOfRange),
    #[error("{0} trailing bytes after the last record")]
    TrailingBytes(usize),
}

pub fn encode_register_program(program: &RegProgram) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + program.len() * RECORD_LEN);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&[0, 0, 0]);
    out.extend_from_slice(&(program.len() as u32).to_le_bytes());
    for instr in program.instrs() {
        out.push(instr.opcode().code());
        out.push(instr.opcode().arity() as u8);
        for slot in 0..3 {
            let (tag, payload) = match instr.operands().get(slot) {
                Some(Operand::Memory(a)) => (TAG_MEMORY, *a),
                Some(Operand::Register(r)) => (TAG_REGISTER, *r as u32),
                Some(Operand::Const(c)) => (TAG_CONST, *c as u32),
                Some(Operand::Label(t)) => (TAG_LABEL, *t),
                None => (TAG_ABSENT, 0),
            };
            out.push(tag);
            out.extend_from_slice(&payload.to_le_bytes());
        }
    }
    out
}

/// Strict inverse of [`encode_register_program`]: any byte sequence it
/// accepts re-encodes to itself.
pub fn decode_register_program(bytes: &[u8]) -> Result<RegProgram, CodecError> {
    if bytes.len() < MAGIC.len() {
        return Err(if MAGIC.starts_with(bytes) {
            CodecError::TruncatedHeader
        } else {
            CodecError::BadMagic
        });
    }
    if bytes[..4] != MAGIC {
        return Err(CodecError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(CodecError::TruncatedHeader);
    }
    if bytes[4] != VERSION {
        return Err(CodecError::UnsupportedVersion(bytes[4]));
    }
    if bytes[5..8] != [0, 0, 0] {
        return Err(CodecError::ReservedNonZero);
    }
    let count = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;

    let body = &bytes[HEADER_LEN..];
    let mut instrs = Vec::with_capacity(count.min(body.len() / RECORD_LEN));
    for index in 0..count {
        let record = body
            .get(index * RECORD_LEN..(index + 1) * RECORD_LEN)
            .ok_or(CodecError::TruncatedRecord { index })?;
        instrs.push(decode_record(index, record)?);
    }
    let used = count * RECORD_LEN;
    if body.len() > used {
        return Err(CodecError::TrailingBytes(body.len() - used));
    }
    Ok(RegProgram::new(instrs, BTreeMap::new())?)
}

fn decode_record(index: usize, record: &[u8]) -> Result<RegInstr, CodecError> {
    let (code, arity) = (record[0], record[1]);
    let opcode = RegOpcode::from_code(code)
        .filter(|op| op.arity() == arity as usize)
        .ok_or(CodecError::InvalidOpcode { index, code, arity })?;
    let mut operands = Vec::with_capacity(3);
    for slot in 0..3 {
        let at = 2 + slot * 5;
        let tag = record[at];
        let payload = u32::from_le_bytes(record[at + 1..at + 5].try_into().expect("4 bytes"));
        let in_arity = slot < opcode.arity();
        let operand = match (in_arity, tag) {
            (true, TAG_MEMORY) => Operand::Memory(payload),
            (true, TAG_REGISTER) => {
                // Registers live in one byte; larger payloads cannot re-encode.
                let r = u8::try_from(payload).map_err(|_| CodecError::InvalidInstruction {
                    index,
                    source: InstrError::RegisterOutOfRange(u8::MAX),
                })?;
                Operand::Register(r)
            }
            (true, TAG_CONST) => Operand::Const(payload as i32),
            (true, TAG_LABEL) => Operand::Label(payload),
            (false, TAG_ABSENT) => {
                if payload != 0 {
                    return Err(CodecError::NonZeroPadding { index, slot });
                }
                continue;
            }
            _ => return Err(CodecError::InvalidTag { index, slot, tag }),
        };
        operands.push(operand);
    }
    RegInstr::new(opcode, &operands).map_err(|source| CodecError::InvalidInstruction { index, source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench_harness::corpus::{source, BenchName, VmKind};
    use crate::register_vm::parse_register_source;

    fn record_of(src: &str) -> Vec<u8> {
        let bytes = encode_register_program(&parse_register_source(src).unwrap());
        assert_eq!(bytes.len(), HEADER_LEN + RECORD_LEN);
        bytes[HEADER_LEN..].to_vec()
    }

    #[test]
    fn header_layout() {
        let bytes = encode_register_program(&parse_register_source("return\nreturn").unwrap());
        assert_eq!(&bytes[..12], &[b'G', b'N', b'F', b'B', 1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(bytes.len(), 12 + 2 * 17);
    }

    #[test]
    fn load_record_bytes() {
        assert_eq!(
            record_of("load R1 #0"),
            vec![
                0x0B, 0x02, //
                0x01, 0x01, 0x00, 0x00, 0x00, //
                0x02, 0x00, 0x00, 0x00, 0x00, //
                0xFF, 0x00, 0x00, 0x00, 0x00,
            ]
        );
    }

    #[test]
    fn return_record_bytes() {
        assert_eq!(
            record_of("return"),
            vec![
                0x0E, 0x00, //
                0xFF, 0x00, 0x00, 0x00, 0x00, //
                0xFF, 0x00, 0x00, 0x00, 0x00, //
                0xFF, 0x00, 0x00, 0x00, 0x00,
            ]
        );
    }

    #[test]
    fn negative_const_and_label_records() {
        let rec = record_of("add @258 R3 #-2");
        assert_eq!(&rec[..2], &[0x00, 0x03]);
        assert_eq!(&rec[2..7], &[0x00, 0x02, 0x01, 0x00, 0x00]);
        assert_eq!(&rec[7..12], &[0x01, 0x03, 0x00, 0x00, 0x00]);
        assert_eq!(&rec[12..17], &[0x02, 0xFE, 0xFF, 0xFF, 0xFF]);
        let rec = record_of("1:\ngoto P1");
        assert_eq!(&rec[..7], &[0x0C, 0x01, 0x03, 0x00, 0x00, 0x00, 0x00]);
    }

    #[test]
    fn corpus_roundtrips() {
        for name in BenchName::ALL {
            let p = parse_register_source(source(name, VmKind::Register)).unwrap();
            let bytes = encode_register_program(&p);
            let back = decode_register_program(&bytes).unwrap();
            assert_eq!(back, p);
            assert_eq!(encode_register_program(&back), bytes);
        }
    }

    #[test]
    fn decode_errors() {
        let p = parse_register_source(source(BenchName::Fibonacci, VmKind::Register)).unwrap();
        let good = encode_register_program(&p);

        let mut bad = good.clone();
        bad[3] = b'X';
        assert_eq!(decode_register_program(&bad), Err(CodecError::BadMagic));
        assert_eq!(decode_register_program(b"GN"), Err(CodecError::TruncatedHeader));
        assert_eq!(decode_register_program(b"XY"), Err(CodecError::BadMagic));
        assert_eq!(decode_register_program(&good[..9]), Err(CodecError::TruncatedHeader));

        let mut bad = good.clone();
        bad[4] = 2;
        assert_eq!(decode_register_program(&bad), Err(CodecError::UnsupportedVersion(2)));

        let mut bad = good.clone();
        bad[6] = 1;
        assert_eq!(decode_register_program(&bad), Err(CodecError::ReservedNonZero));

        assert_eq!(
            decode_register_program(&good[..HEADER_LEN + 10]),
            Err(CodecError::TruncatedRecord { index: 0 })
        );

        let mut bad = good.clone();
        bad.push(0);
        assert_eq!(decode_register_program(&bad), Err(CodecError::TrailingBytes(1)));

        let mut bad = good.clone();
        bad[HEADER_LEN] = 0x1B;
        assert!(matches!(
            decode_register_program(&bad),
            Err(CodecError::InvalidOpcode {
                index: 0,
                code: 0x1B,
                ..
            })
        ));
        let mut bad = good.clone();
        bad[HEADER_LEN + 1] = 3;
        assert!(matches!(
            decode_register_program(&bad),
            Err(CodecError::InvalidOpcode { index: 0, .. })
        ));

        let mut bad = good.clone();
        bad[HEADER_LEN + 2] = 7;
        assert_eq!(
            decode_register_program(&bad),
            Err(CodecError::InvalidTag {
                index: 0,
                slot: 0,
                tag: 7
            })
        );
        let mut bad = good.clone();
        bad[HEADER_LEN + 13] = 1;
        assert_eq!(
            decode_register_program(&bad),
            Err(CodecError::NonZeroPadding { index: 0, slot: 2 })
        );

        // `load R1 #0` -> `load #1 #0`: const destination.
        let mut bad = good.clone();
        bad[HEADER_LEN + 2] = TAG_CONST;
        assert!(matches!(
            decode_register_program(&bad),
            Err(CodecError::InvalidInstruction { index: 0, .. })
        ));
    }
}
