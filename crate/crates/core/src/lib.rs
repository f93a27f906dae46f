//! Instrumented stack-based and register-based bytecode interpreters, an
//! embedded benchmark corpus, and a harness that compares the two machines
//! by dispatch count and by fetch, dispatch and execution CPU time.
//!
//! With the default `parallel` feature, the Collatz oracle and counts-only
//! suites run on rayon; timed runs are always sequential.

pub mod bench_harness;
pub mod instrumentation;
pub mod register_vm;
mod run;
pub mod stack_vm;

pub use run::{RunResult, Sink};
