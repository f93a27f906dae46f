use std::hint::black_box;

use thiserror::Error;

use super::{Operand, RegOpcode, RegProgram, REGISTER_COUNT};
use crate::instrumentation::{corrected_measure, to_micros, Clock, ClockError, CpuClock, Metrics, Phase};
use crate::run::{Output, PhaseTicks, RunResult, Sink};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegExecConfig {
    /// Memory cells, each a 32-bit integer.
    pub memory_size: usize,
    pub max_call_depth: usize,
    pub fine_timing: bool,
    pub sink: Sink,
}

impl Default for RegExecConfig {
    fn default() -> Self {
        RegExecConfig {
            memory_size: 65536,
            max_call_depth: 65536,
            fine_timing: false,
            sink: Sink::Capture,
        }
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum RegStepError {
    #[error("memory address @{address} out of range")]
    AddressOutOfRange { address: u32 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("call depth exceeds {limit}")]
    CallDepthExceeded { limit: usize },
    #[error("operand of the wrong kind")]
    BadOperandKind,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RegVmError {
    #[error("instruction {pc}: {kind}")]
    Step { kind: RegStepError, pc: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Clock(#[from] ClockError),
}

impl RegVmError {
    pub fn step_error(&self) -> Option<RegStepError> {
        match self {
            RegVmError::Step { kind, .. } => Some(*kind),
            _ => None,
        }
    }
}

/// Registers and every memory cell written during the run, by address.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineSnapshot {
    pub registers: [i32; REGISTER_COUNT],
    pub memory: Vec<(u32, i32)>,
}

struct Machine {
    registers: [i32; REGISTER_COUNT],
    memory: Vec<i32>,
    touched: Vec<bool>,
}

impl Machine {
    #[inline(always)]
    fn read(&self, op: Operand) -> Result<i32, RegStepError> {
        match op {
            Operand::Memory(a) => self
                .memory
                .get(a as usize)
                .copied()
                .ok_or(RegStepError::AddressOutOfRange { address: a }),
            Operand::Register(r) => Ok(self.registers[r as usize]),
            Operand::Const(c) => Ok(c),
            Operand::Label(_) => Err(RegStepError::BadOperandKind),
        }
    }

    #[inline(always)]
    fn write(&mut self, op: Operand, v: i32) -> Result<(), RegStepError> {
        match op {
            Operand::Memory(a) => {
                let cell = self
                    .memory
                    .get_mut(a as usize)
                    .ok_or(RegStepError::AddressOutOfRange { address: a })?;
                *cell = v;
                self.touched[a as usize] = true;
                Ok(())
            }
            Operand::Register(r) => {
                self.registers[r as usize] = v;
                Ok(())
            }
            Operand::Const(_) | Operand::Label(_) => Err(RegStepError::BadOperandKind),
        }
    }

    fn snapshot(&self) -> MachineSnapshot {
        MachineSnapshot {
            registers: self.registers,
            memory: self
                .touched
                .iter()
                .enumerate()
                .filter(|(_, t)| **t)
                .map(|(a, _)| (a as u32, self.memory[a]))
                .collect(),
        }
    }
}

enum Flow {
    Next,
    Jump(usize),
    Call(usize),
    Return,
    Print(i32),
}

type Handler = fn(&mut Machine, &[Operand; 3]) -> Result<Flow, RegStepError>;

#[inline(always)]
fn handler(op: RegOpcode) -> Handler {
    use RegOpcode::*;
    match op {
        Add => op_add,
        Div => op_div,
        Mul => op_mul,
        Ltn => op_ltn,
        Eql => op_eql,
        And => op_and,
        Not => op_not,
        Or => op_or,
        Inc => op_inc,
        Dec => op_dec,
        Print => op_print,
        Load => op_load,
        Goto => op_goto,
        If => op_if,
        Return => op_return,
        Call => op_call,
    }
}

macro_rules! binop {
    ($name:ident, |$a:ident, $b:ident| $body:expr) => {
        fn $name(m: &mut Machine, ops: &[Operand; 3]) -> Result<Flow, RegStepError> {
            let $a = m.read(ops[1])?;
            let $b = m.read(ops[2])?;
            m.write(ops[0], $body)?;
            Ok(Flow::Next)
        }
    };
}

binop!(op_add, |a, b| a.wrapping_add(b));
binop!(op_mul, |a, b| a.wrapping_mul(b));
binop!(op_ltn, |a, b| (a < b) as i32);
binop!(op_eql, |a, b| (a == b) as i32);
binop!(op_and, |a, b| a & b);
binop!(op_or, |a, b| a | b);

fn op_div(m: &mut Machine, ops: &[Operand; 3]) -> Result<Flow, RegStepError> {
    let a = m.read(ops[1])?;
    let b = m.read(ops[2])?;
    if b == 0 {
        return Err(RegStepError::DivisionByZero);
    }
    m.write(ops[0], a.wrapping_div(b))?;
    Ok(Flow::Next)
}

/// Logical negation: 1 for zero, otherwise 0.
fn op_not(m: &mut Machine, ops: &[Operand; 3]) -> Result<Flow, RegStepError> {
    let a = m.read(ops[1])?;
    m.write(ops[0], (a == 0) as i32)?;
    Ok(Flow::Next)
}

fn op_inc(m: &mut Machine, ops: &[Operand; 3]) -> Result<Flow, RegStepError> {
    let v = m.read(ops[0])?;
    m.write(ops[0], v.wrapping_add(1))?;
    Ok(Flow::Next)
}

fn op_dec(m: &mut Machine, ops: &[Operand; 3]) -> Result<Flow, RegStepError> {
    let v = m.read(ops[0])?;
    m.write(ops[0], v.wrapping_sub(1))?;
    Ok(Flow::Next)
}

fn op_load(m: &mut Machine, ops: &[Operand; 3]) -> Result<Flow, RegStepError> {
    let v = m.read(ops[1])?;
    m.write(ops[0], v)?;
    Ok(Flow::Next)
}

fn op_print(m: &mut Machine, ops: &[Operand; 3]) -> Result<Flow, RegStepError> {
    Ok(Flow::Print(m.read(ops[0])?))
}

fn label(op: Operand) -> Result<usize, RegStepError> {
    match op {
        Operand::Label(t) => Ok(t as usize),
        _ => Err(RegStepError::BadOperandKind),
    }
}

fn op_goto(_: &mut Machine, ops: &[Operand; 3]) -> Result<Flow, RegStepError> {
    Ok(Flow::Jump(label(ops[0])?))
}

/// Jumps when the condition is zero.
fn op_if(m: &mut Machine, ops: &[Operand; 3]) -> Result<Flow, RegStepError> {
    let target = label(ops[1])?;
    Ok(if m.read(ops[0])? == 0 {
        Flow::Jump(target)
    } else {
        Flow::Next
    })
}

fn op_call(_: &mut Machine, ops: &[Operand; 3]) -> Result<Flow, RegStepError> {
    Ok(Flow::Call(label(ops[0])?))
}

fn op_return(_: &mut Machine, _: &[Operand; 3]) -> Result<Flow, RegStepError> {
    Ok(Flow::Return)
}

struct LoopOutcome {
    dispatches: u64,
    fetches: u64,
    ticks: PhaseTicks,
}

/// Runs from instruction 0 until `return` with an empty return-address
/// stack, or until the program counter reaches the end.
pub fn execute_register(
    program: &RegProgram,
    config: &RegExecConfig,
) -> Result<RunResult<MachineSnapshot>, RegVmError> {
    if config.memory_size < 2 {
        return Err(RegVmError::InvalidConfig("memory size must be at least 2"));
    }
    if config.max_call_depth < 1 {
        return Err(RegVmError::InvalidConfig("call depth must be at least 1"));
    }
    let clock = CpuClock::new()?;
    let mut machine = Machine {
        registers: [0; REGISTER_COUNT],
        memory: vec![0; config.memory_size],
        touched: vec![false; config.memory_size],
    };
    let mut out = Output::new(config.sink);
    let (outcome, exec_us) = corrected_measure(&clock, || {
        if config.fine_timing {
            run_loop::<true>(program, config, &clock, &mut machine, &mut out)
        } else {
            run_loop::<false>(program, config, &clock, &mut machine, &mut out)
        }
    });
    let outcome = outcome?;

    let tps = clock.ticks_per_second();
    let mut metrics = Metrics {
        exec_time_us: exec_us,
        repetitions: 1,
        ..Metrics::default()
    };
    metrics.record_phase(Phase::Fetch, to_micros(outcome.ticks.fetch, tps), outcome.fetches);
    metrics.record_phase(
        Phase::Dispatch,
        to_micros(outcome.ticks.dispatch, tps),
        outcome.dispatches,
    );
    Ok(RunResult {
        metrics,
        output: out.into_string(),
        outcome: machine.snapshot(),
    })
}

fn run_loop<const TIMED: bool>(
    program: &RegProgram,
    config: &RegExecConfig,
    clock: &CpuClock,
    machine: &mut Machine,
    out: &mut Output,
) -> Result<LoopOutcome, RegVmError> {
    let code = program.instrs();
    let mut pc = 0usize;
    let mut returns: Vec<usize> = Vec::new();
    let mut dispatches = 0u64;
    let mut fetches = 0u64;
    let mut ticks = PhaseTicks::default();

    while pc < code.len() {
        let t0 = if TIMED { clock.now() } else { 0 };
        let instr = if TIMED { black_box(code[pc]) } else { code[pc] };
        fetches += instr.fetch_cost();
        let t1 = if TIMED { clock.now() } else { 0 };
        let h = if TIMED {
            black_box(handler(black_box(instr.opcode())))
        } else {
            handler(instr.opcode())
        };
        if TIMED {
            let t2 = clock.now();
            ticks.fetch += t1 - t0;
            ticks.dispatch += t2 - t1;
        }
        dispatches += 1;

        let flow = h(machine, instr.slots()).map_err(|kind| RegVmError::Step { kind, pc })?;
        pc = match flow {
            Flow::Next => pc + 1,
            Flow::Jump(target) => target,
            Flow::Print(v) => {
                out.line(v);
                pc + 1
            }
            Flow::Call(target) => {
                if returns.len() >= config.max_call_depth {
                    return Err(RegVmError::Step {
                        kind: RegStepError::CallDepthExceeded {
                            limit: config.max_call_depth,
                        },
                        pc,
                    });
                }
                returns.push(pc + 1);
                target
            }
            Flow::Return => match returns.pop() {
                Some(back) => back,
                None => break,
            },
        };
    }
    Ok(LoopOutcome {
        dispatches,
        fetches,
        ticks,
    })
}
