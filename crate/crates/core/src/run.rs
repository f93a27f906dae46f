use std::fmt::Display;
use std::io::Write;

use crate::instrumentation::Metrics;

/// Where `print` instructions write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sink {
    /// Collect into [`RunResult::output`].
    #[default]
    Capture,
    Stdout,
    Discard,
}

#[derive(Debug)]
pub(crate) struct Output {
    sink: Sink,
    buf: String,
}

impl Output {
    pub(crate) fn new(sink: Sink) -> Self {
        Output {
            sink,
            buf: String::new(),
        }
    }

    pub(crate) fn line(&mut self, value: impl Display) {
        match self.sink {
            Sink::Capture => {
                use std::fmt::Write as _;
                let _ = writeln!(self.buf, "{value}");
            }
            Sink::Stdout => {
                let stdout = std::io::stdout();
                let _ = writeln!(stdout.lock(), "{value}");
            }
            Sink::Discard => {}
        }
    }

    pub(crate) fn into_string(self) -> String {
        self.buf
    }
}

/// Outcome of one execution: metrics, captured output and a VM-specific
/// final result.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult<T> {
    pub metrics: Metrics,
    pub output: String,
    pub outcome: T,
}

/// Per-instruction fetch/dispatch tick accumulators for the timed loops.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct PhaseTicks {
    pub(crate) fetch: u64,
    pub(crate) dispatch: u64,
}
