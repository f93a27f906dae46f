//! Process CPU-time measurement, per-phase accounting and the dispatch/fetch
//! runtime estimate relating a stack machine to a register machine.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClockError {
    #[error("process CPU clock is unavailable on this platform")]
    ClockUnavailable,
}

/// A monotone per-process tick source.
pub trait Clock {
    /// Current reading in ticks. Never decreases within one process.
    fn now(&self) -> u64;
    fn ticks_per_second(&self) -> u64;
}

/// Process CPU time via `clock_gettime(CLOCK_PROCESS_CPUTIME_ID)`, in
/// nanosecond ticks.
#[derive(Debug, Clone, Copy)]
pub struct CpuClock {
    _private: (),
}

impl CpuClock {
    pub fn new() -> Result<Self, ClockError> {
        let clock = CpuClock { _private: () };
        if clock.read().is_none() {
            return Err(ClockError::ClockUnavailable);
        }
        Ok(clock)
    }

    #[cfg(unix)]
    #[inline(always)]
    fn read(&self) -> Option<u64> {
        let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
        // SAFETY: `ts` is a valid, writable timespec.
        let rc = unsafe { libc::clock_gettime(libc::CLOCK_PROCESS_CPUTIME_ID, &mut ts) };
        if rc != 0 {
            return None;
        }
        Some(ts.tv_sec as u64 * 1_000_000_000 + ts.tv_nsec as u64)
    }

    #[cfg(not(unix))]
    fn read(&self) -> Option<u64> {
        None
    }
}

impl Clock for CpuClock {
    #[inline(always)]
    fn now(&self) -> u64 {
        // Availability was checked in `new`.
        self.read().unwrap_or(0)
    }

    fn ticks_per_second(&self) -> u64 {
        1_000_000_000
    }
}

/// Converts clock ticks to microseconds without integer truncation.
pub fn to_micros(ticks: u64, ticks_per_second: u64) -> f64 {
    assert!(ticks_per_second > 0, "clock resolution must be positive");
    ticks as f64 * 1_000_000.0 / ticks_per_second as f64
}

/// Runs `action` between clock reads `t1` and `t2`, with an extra leading
/// read `t0`, and returns `(t2 - t1) - (t1 - t0)` in microseconds: the
/// action's cost minus one clock-read overhead. The result is not clamped
/// and may be slightly negative for very short actions.
pub fn corrected_measure<C, F, R>(clock: &C, action: F) -> (R, f64)
where
    C: Clock + ?Sized,
    F: FnOnce() -> R,
{
    let t0 = clock.now();
    let t1 = clock.now();
    let out = action();
    let t2 = clock.now();
    let run = t2 as i128 - t1 as i128;
    let overhead = t1 as i128 - t0 as i128;
    let ticks = run - overhead;
    let us = ticks as f64 * 1_000_000.0 / clock.ticks_per_second() as f64;
    (out, us)
}

/// Plain `t2 - t1` measurement, used to cross-check `corrected_measure`.
pub fn uncorrected_measure<C, F, R>(clock: &C, action: F) -> (R, f64)
where
    C: Clock + ?Sized,
    F: FnOnce() -> R,
{
    let t1 = clock.now();
    let out = action();
    let t2 = clock.now();
    (out, to_micros(t2.saturating_sub(t1), clock.ticks_per_second()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Fetch,
    Dispatch,
}

/// Counters and phase times for one run, or the mean over several.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub dispatch_count: u64,
    pub fetch_count: u64,
    pub fetch_time_us: f64,
    pub dispatch_time_us: f64,
    pub exec_time_us: f64,
    pub repetitions: u32,
}

impl Metrics {
    /// Adds `duration_us` to the phase accumulator and `count` to the
    /// matching counter. Execution time is never touched here.
    pub fn record_phase(&mut self, phase: Phase, duration_us: f64, count: u64) {
        debug_assert!(duration_us.is_finite());
        match phase {
            Phase::Fetch => {
                self.fetch_time_us += duration_us;
                self.fetch_count += count;
            }
            Phase::Dispatch => {
                self.dispatch_time_us += duration_us;
                self.dispatch_count += count;
            }
        }
    }

    /// Counts are compared exactly; times are arithmetic means.
    pub fn mean_of(runs: &[Metrics]) -> Result<Metrics, CountMismatch> {
        let first = runs.first().ok_or(CountMismatch::Empty)?;
        let mut sum = Metrics {
            dispatch_count: first.dispatch_count,
            fetch_count: first.fetch_count,
            ..Metrics::default()
        };
        for (i, m) in runs.iter().enumerate() {
            if m.dispatch_count != first.dispatch_count || m.fetch_count != first.fetch_count {
                return Err(CountMismatch::Unstable {
                    run: i,
                    expected: (first.dispatch_count, first.fetch_count),
                    actual: (m.dispatch_count, m.fetch_count),
                });
            }
            sum.fetch_time_us += m.fetch_time_us;
            sum.dispatch_time_us += m.dispatch_time_us;
            sum.exec_time_us += m.exec_time_us;
        }
        let n = runs.len() as f64;
        sum.fetch_time_us /= n;
        sum.dispatch_time_us /= n;
        sum.exec_time_us /= n;
        sum.repetitions = runs.len() as u32;
        Ok(sum)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CountMismatch {
    #[error("no runs to aggregate")]
    Empty,
    #[error("run {run} counted (dispatch, fetch) = {actual:?}, first run counted {expected:?}")]
    Unstable {
        run: usize,
        expected: (u64, u64),
        actual: (u64, u64),
    },
}

/// Inputs to the register-machine runtime estimate. Deltas are signed: a
/// register program can need fewer operand fetches than its stack twin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DavisInput {
    /// Stack-machine execution time.
    pub t_vsm_us: f64,
    /// Dispatches saved by the register machine.
    pub delta_dispatches: f64,
    pub t_dispatch_us: f64,
    /// Extra fetches performed by the register machine.
    pub delta_fetches: f64,
    pub t_fetch_us: f64,
}

/// `T_vrm ≈ T_vsm − Δdispatches·T_dispatch + Δfetches·T_fetch`
pub fn davis_estimate(input: &DavisInput) -> f64 {
    input.t_vsm_us - input.delta_dispatches * input.t_dispatch_us + input.delta_fetches * input.t_fetch_us
}
