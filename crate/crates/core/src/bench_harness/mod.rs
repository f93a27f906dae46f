//! Benchmark driver: repeated runs of the embedded corpus, mean metrics, and
//! the stack-versus-register comparison report.

pub mod corpus;
pub mod oracle;
mod report;

use thiserror::Error;

use crate::instrumentation::{CountMismatch, Metrics};
use crate::register_vm::{execute_register, parse_register_source, RegExecConfig, RegProgram, RegVmError};
use crate::run::Sink;
use crate::stack_vm::{execute_stack, parse_stack_source, StackExecConfig, StackProgram, StackVmError};

pub use corpus::{BenchName, BenchmarkCase, VmKind};
pub use oracle::expected_dispatches;
pub use report::{
    compare_report, compare_subset, emit, AggregateRow, BenchReport, CaseRow, DeltaRow, Deviation, Environment,
    OracleVerdict, OutputFormat,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchConfig {
    pub repetitions: u32,
    /// Unmeasured runs before the measured ones.
    pub warmup: u32,
    pub fine_timing: bool,
    pub format: OutputFormat,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            repetitions: 15,
            warmup: 1,
            fine_timing: true,
            format: OutputFormat::Json,
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{case}: {message}")]
    Parse { case: BenchmarkCase, message: String },
    #[error("{case}: {source}")]
    StackVm {
        case: BenchmarkCase,
        #[source]
        source: StackVmError,
    },
    #[error("{case}: {source}")]
    RegisterVm {
        case: BenchmarkCase,
        #[source]
        source: RegVmError,
    },
    #[error("{case}: counts differ between repetitions: {source}")]
    CountInstability {
        case: BenchmarkCase,
        #[source]
        source: CountMismatch,
    },
    #[error("report needs results for {0:?}")]
    IncompleteResults(Vec<BenchmarkCase>),
    #[error("repetitions must be at least 1")]
    InvalidConfig,
}

/// Mean metrics for one case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseResult {
    pub case: BenchmarkCase,
    pub metrics: Metrics,
}

enum Parsed {
    Stack(StackProgram),
    Register(RegProgram),
}

fn parse_case(case: BenchmarkCase) -> Result<Parsed, HarnessError> {
    let parse_err = |message: String| HarnessError::Parse { case, message };
    Ok(match case.vm {
        VmKind::Stack => Parsed::Stack(parse_stack_source(case.source()).map_err(|e| parse_err(e.to_string()))?),
        VmKind::Register => {
            Parsed::Register(parse_register_source(case.source()).map_err(|e| parse_err(e.to_string()))?)
        }
    })
}

fn execute_once(case: BenchmarkCase, program: &Parsed, fine_timing: bool) -> Result<Metrics, HarnessError> {
    match program {
        Parsed::Stack(p) => {
            let config = StackExecConfig {
                fine_timing,
                sink: Sink::Discard,
                ..Default::default()
            };
            execute_stack(p, &config)
                .map(|r| r.metrics)
                .map_err(|source| HarnessError::StackVm { case, source })
        }
        Parsed::Register(p) => {
            let config = RegExecConfig {
                fine_timing,
                sink: Sink::Discard,
                ..Default::default()
            };
            execute_register(p, &config)
                .map(|r| r.metrics)
                .map_err(|source| HarnessError::RegisterVm { case, source })
        }
    }
}

/// Parses once, discards `warmup` runs, then averages `repetitions`
/// sequential runs. Counts must agree across every measured run.
pub fn run_case(case: BenchmarkCase, config: &BenchConfig) -> Result<Metrics, HarnessError> {
    if config.repetitions == 0 {
        return Err(HarnessError::InvalidConfig);
    }
    let program = parse_case(case)?;
    for _ in 0..config.warmup {
        execute_once(case, &program, config.fine_timing)?;
    }
    let runs = (0..config.repetitions)
        .map(|_| execute_once(case, &program, config.fine_timing))
        .collect::<Result<Vec<_>, _>>()?;
    Metrics::mean_of(&runs).map_err(|source| HarnessError::CountInstability { case, source })
}

fn cases_for(names: &[BenchName]) -> Vec<BenchmarkCase> {
    names
        .iter()
        .flat_map(|&name| VmKind::ALL.iter().map(move |&vm| BenchmarkCase::new(name, vm)))
        .collect()
}

/// Runs every case of `names` one after another.
pub fn run_suite_sequential(names: &[BenchName], config: &BenchConfig) -> Result<Vec<CaseResult>, HarnessError> {
    cases_for(names)
        .into_iter()
        .map(|case| run_case(case, config).map(|metrics| CaseResult { case, metrics }))
        .collect()
}

/// Runs independent cases concurrently. Process CPU time is shared by all
/// threads, so the times of a concurrent run are not meaningful; only
/// counts are.
#[cfg(feature = "parallel")]
pub fn run_suite_parallel(names: &[BenchName], config: &BenchConfig) -> Result<Vec<CaseResult>, HarnessError> {
    use rayon::prelude::*;
    cases_for(names)
        .into_par_iter()
        .map(|case| run_case(case, config).map(|metrics| CaseResult { case, metrics }))
        .collect()
}

/// Timed suites always run sequentially so CPU-time readings stay
/// uncontended; counts-only suites use rayon when available.
pub fn run_suite(names: &[BenchName], config: &BenchConfig) -> Result<Vec<CaseResult>, HarnessError> {
    #[cfg(feature = "parallel")]
    if !config.fine_timing {
        return run_suite_parallel(names, config);
    }
    run_suite_sequential(names, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts_only(reps: u32, warmup: u32) -> BenchConfig {
        BenchConfig {
            repetitions: reps,
            warmup,
            fine_timing: false,
            format: OutputFormat::Json,
        }
    }

    #[test]
    fn fibonacci_register_mean_of_three() {
        let case = BenchmarkCase::new(BenchName::Fibonacci, VmKind::Register);
        let m = run_case(case, &counts_only(3, 0)).unwrap();
        assert_eq!(m.dispatch_count, 3_008);
        assert_eq!(m.repetitions, 3);
    }

    #[test]
    fn single_run_without_warmup() {
        let case = BenchmarkCase::new(BenchName::Recursion, VmKind::Stack);
        let config = BenchConfig {
            repetitions: 1,
            warmup: 0,
            ..Default::default()
        };
        let m = run_case(case, &config).unwrap();
        assert_eq!(m.repetitions, 1);
        assert_eq!(m.dispatch_count, 9_010);
        assert!(m.exec_time_us > 0.0);
    }

    #[test]
    fn repeated_counts_only_runs_agree() {
        let case = BenchmarkCase::new(BenchName::Recursion, VmKind::Register);
        let a = run_case(case, &counts_only(2, 1)).unwrap();
        let b = run_case(case, &counts_only(2, 1)).unwrap();
        assert_eq!((a.dispatch_count, a.fetch_count), (b.dispatch_count, b.fetch_count));
        assert_eq!(a.fetch_time_us, 0.0);
    }

    #[test]
    fn zero_repetitions_rejected() {
        let case = BenchmarkCase::new(BenchName::Recursion, VmKind::Register);
        assert!(matches!(
            run_case(case, &counts_only(0, 0)),
            Err(HarnessError::InvalidConfig)
        ));
    }

    #[test]
    fn suite_orders_stack_then_register() {
        let results = run_suite(&[BenchName::Recursion, BenchName::Fibonacci], &counts_only(1, 0)).unwrap();
        let cases: Vec<_> = results.iter().map(|r| r.case).collect();
        assert_eq!(
            cases,
            vec![
                BenchmarkCase::new(BenchName::Recursion, VmKind::Stack),
                BenchmarkCase::new(BenchName::Recursion, VmKind::Register),
                BenchmarkCase::new(BenchName::Fibonacci, VmKind::Stack),
                BenchmarkCase::new(BenchName::Fibonacci, VmKind::Register),
            ]
        );
    }
}
