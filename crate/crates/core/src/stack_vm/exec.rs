use std::hint::black_box;

use thiserror::Error;

use super::ops::{handler, Control, StepContext, StepError};
use super::{OperandStack, StackProgram, Value};
use crate::instrumentation::{corrected_measure, to_micros, Clock, ClockError, CpuClock, Metrics, Phase};
use crate::run::{Output, PhaseTicks, RunResult, Sink};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StackExecConfig {
    /// Capacity of every local stack and of the global stack.
    pub stack_capacity: usize,
    /// Maximum number of nested calls below `main`.
    pub max_call_depth: usize,
    /// Read the CPU clock around the fetch and dispatch of every instruction.
    pub fine_timing: bool,
    pub sink: Sink,
}

impl Default for StackExecConfig {
    fn default() -> Self {
        StackExecConfig {
            stack_capacity: 4096,
            max_call_depth: 65536,
            fine_timing: false,
            sink: Sink::Capture,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StackVmError {
    #[error("procedure {procedure}, line {line}: {kind}")]
    Step {
        kind: StepError,
        procedure: usize,
        line: usize,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Clock(#[from] ClockError),
}

impl StackVmError {
    pub fn step_error(&self) -> Option<StepError> {
        match self {
            StackVmError::Step { kind, .. } => Some(*kind),
            _ => None,
        }
    }
}

struct Frame {
    procedure: usize,
    pc: usize,
    local: OperandStack,
}

struct LoopOutcome {
    result: Option<Value>,
    dispatches: u64,
    fetches: u64,
    ticks: PhaseTicks,
}

/// Runs `main` with fresh local and global stacks. The program result is the
/// bottom element of `main`'s local stack when it returns.
pub fn execute_stack(
    program: &StackProgram,
    config: &StackExecConfig,
) -> Result<RunResult<Option<Value>>, StackVmError> {
    if config.stack_capacity < 16 {
        return Err(StackVmError::InvalidConfig("stack capacity must be at least 16"));
    }
    if config.max_call_depth < 1 {
        return Err(StackVmError::InvalidConfig("call depth must be at least 1"));
    }
    let clock = CpuClock::new()?;
    let mut out = Output::new(config.sink);
    let (outcome, exec_us) = corrected_measure(&clock, || {
        if config.fine_timing {
            run_loop::<true>(program, config, &clock, &mut out)
        } else {
            run_loop::<false>(program, config, &clock, &mut out)
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
        outcome: outcome.result,
    })
}

fn run_loop<const TIMED: bool>(
    program: &StackProgram,
    config: &StackExecConfig,
    clock: &CpuClock,
    out: &mut Output,
) -> Result<LoopOutcome, StackVmError> {
    let mut global = OperandStack::new(config.stack_capacity);
    let mut frames = vec![Frame {
        procedure: 0,
        pc: 0,
        local: OperandStack::new(config.stack_capacity),
    }];
    let mut dispatches = 0u64;
    let mut fetches = 0u64;
    let mut ticks = PhaseTicks::default();

    loop {
        let depth = frames.len();
        let frame = frames.last_mut().expect("at least main is active");
        let code = &program.procedures[frame.procedure].instrs;
        if frame.pc >= code.len() {
            // Falling off the end returns like `ret`, without a dispatch.
            let done = frames.pop().expect("frame");
            if frames.is_empty() {
                return Ok(LoopOutcome {
                    result: done.local.bottom(),
                    dispatches,
                    fetches,
                    ticks,
                });
            }
            continue;
        }

        let t0 = if TIMED { clock.now() } else { 0 };
        let instr = if TIMED {
            black_box(code[frame.pc])
        } else {
            code[frame.pc]
        };
        fetches += instr.fetch_cost();
        let t1 = if TIMED { clock.now() } else { 0 };
        let h = if TIMED {
            black_box(handler(black_box(instr.opcode)))
        } else {
            handler(instr.opcode)
        };
        if TIMED {
            let t2 = clock.now();
            ticks.fetch += t1 - t0;
            ticks.dispatch += t2 - t1;
        }
        dispatches += 1;

        let mut ctx = StepContext {
            local: &mut frame.local,
            global: &mut global,
        };
        let control = h(&mut ctx, instr.operand).map_err(|kind| StackVmError::Step {
            kind,
            procedure: frame.procedure,
            line: frame.pc,
        })?;
        match control {
            Control::Next => frame.pc += 1,
            Control::Jump(line) => frame.pc = line,
            Control::Print(v) => {
                out.line(v);
                frame.pc += 1;
            }
            Control::Call(callee) => {
                let fail = |kind| StackVmError::Step {
                    kind,
                    procedure: frame.procedure,
                    line: frame.pc,
                };
                if callee >= program.procedures.len() {
                    return Err(fail(StepError::InvalidOperand { opcode: instr.opcode }));
                }
                if depth > config.max_call_depth {
                    return Err(fail(StepError::CallDepthExceeded {
                        limit: config.max_call_depth,
                    }));
                }
                frame.pc += 1;
                frames.push(Frame {
                    procedure: callee,
                    pc: 0,
                    local: OperandStack::new(config.stack_capacity),
                });
            }
            Control::Return => {
                // The callee's local stack is dropped here.
                let done = frames.pop().expect("frame");
                if frames.is_empty() {
                    return Ok(LoopOutcome {
                        result: done.local.bottom(),
                        dispatches,
                        fetches,
                        ticks,
                    });
                }
            }
        }
    }
}
