//! Expected dispatch counts derived from the control flow of each embedded
//! listing, without executing either machine.
//!
//! Straight-line workloads have closed forms. ExhaustiveCollatz is tallied by
//! walking each trajectory and charging every branch the number of
//! instructions its path executes. An odd step only applies `3m + 1`; the
//! halving happens on the following (even) round.

use super::corpus::{BenchName, BenchmarkCase, VmKind};

/// Trajectories are checked for `1 <= n < COLLATZ_LIMIT`.
pub const COLLATZ_LIMIT: u64 = 20_000;

const FIB_STACK_ITERS: u64 = 1_000;
const FIB_REGISTER_ITERS: u64 = 500;
const ADDITION_ITERS: u64 = 5_000_000;
const RECURSION_DEPTH: u64 = 1_000;

/// Instructions executed along each path of one Collatz listing.
#[derive(Debug, Clone, Copy)]
struct CollatzPaths {
    /// Before the outer loop.
    entry: u64,
    /// Outer-loop guard plus per-number setup.
    per_number: u64,
    /// `m == 1` test executed at the top of every inner round.
    check: u64,
    odd_step: u64,
    even_step: u64,
    /// Leaving the inner loop and advancing to the next number.
    done: u64,
    /// Final failing outer guard and the return.
    exit: u64,
}

// procedure main: iconst 1 | head: dup iconst swap ilt if_icmple, dup |
// check: dup iconst ieq ne if_icmple | odd: dup iconst and dup if_icmple
// swap iconst imul inc swap ne if_icmple goto | even: dup iconst and dup
// if_icmple ne if_icmple iconst swap idiv goto | done: pop inc goto |
// exit: dup iconst swap ilt if_icmple ret
const STACK_COLLATZ: CollatzPaths = CollatzPaths {
    entry: 1,
    per_number: 6,
    check: 5,
    odd_step: 13,
    even_step: 11,
    done: 3,
    exit: 6,
};

// entry: load | head: ltn if load | check: eql not if |
// odd: and eql if mul inc not if goto | even: and eql if not if div goto |
// done: inc goto | exit: ltn if return
const REGISTER_COLLATZ: CollatzPaths = CollatzPaths {
    entry: 1,
    per_number: 3,
    check: 3,
    odd_step: 8,
    even_step: 7,
    done: 2,
    exit: 3,
};

/// Odd and even steps summed over all trajectories below a limit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CollatzTally {
    pub numbers: u64,
    pub odd_steps: u64,
    pub even_steps: u64,
}

impl CollatzTally {
    fn merge(self, other: CollatzTally) -> CollatzTally {
        CollatzTally {
            numbers: self.numbers + other.numbers,
            odd_steps: self.odd_steps + other.odd_steps,
            even_steps: self.even_steps + other.even_steps,
        }
    }
}

fn trajectory(n: u64) -> CollatzTally {
    let mut m = n;
    let mut t = CollatzTally {
        numbers: 1,
        ..Default::default()
    };
    while m != 1 {
        if m % 2 == 1 {
            m = 3 * m + 1;
            t.odd_steps += 1;
        } else {
            m /= 2;
            t.even_steps += 1;
        }
    }
    t
}

pub fn collatz_tally_sequential(limit: u64) -> CollatzTally {
    (1..limit)
        .map(trajectory)
        .fold(CollatzTally::default(), CollatzTally::merge)
}

#[cfg(feature = "parallel")]
pub fn collatz_tally_parallel(limit: u64) -> CollatzTally {
    use rayon::prelude::*;
    (1..limit)
        .into_par_iter()
        .map(trajectory)
        .reduce(CollatzTally::default, CollatzTally::merge)
}

/// Uses rayon when the `parallel` feature is enabled.
pub fn collatz_tally(limit: u64) -> CollatzTally {
    #[cfg(feature = "parallel")]
    {
        collatz_tally_parallel(limit)
    }
    #[cfg(not(feature = "parallel"))]
    {
        collatz_tally_sequential(limit)
    }
}

fn collatz_dispatches(paths: CollatzPaths, tally: CollatzTally) -> u64 {
    let rounds = tally.odd_steps + tally.even_steps;
    paths.entry
        + tally.numbers * (paths.per_number + paths.check + paths.done)
        + rounds * paths.check
        + tally.odd_steps * paths.odd_step
        + tally.even_steps * paths.even_step
        + paths.exit
}

/// Dispatch count every correct execution of `case` must produce.
pub fn expected_dispatches(case: BenchmarkCase) -> u64 {
    match (case.name, case.vm) {
        // 5 setup, 14 per iteration, 7 to leave and print.
        (BenchName::Fibonacci, VmKind::Stack) => 5 + 14 * FIB_STACK_ITERS + 7,
        // 4 loads, 6 per iteration, ltn/if/print/return.
        (BenchName::Fibonacci, VmKind::Register) => 4 + 6 * FIB_REGISTER_ITERS + 4,
        // main's 3 before the call, 8 per non-zero activation, 6 for the
        // terminating one, one `ret` per non-zero activation, main's `ret`.
        (BenchName::Recursion, VmKind::Stack) => 3 + 8 * RECURSION_DEPTH + 6 + RECURSION_DEPTH + 1,
        // 3 before the call, 4 per non-zero activation, ltn/if at zero, one
        // `return` per activation, print/return in the caller.
        (BenchName::Recursion, VmKind::Register) => 3 + 4 * RECURSION_DEPTH + 2 + (RECURSION_DEPTH + 1) + 2,
        (BenchName::AddictiveAddition, VmKind::Stack) => 1 + 6 * ADDITION_ITERS + 5,
        (BenchName::AddictiveAddition, VmKind::Register) => 2 + 4 * ADDITION_ITERS + 3,
        (BenchName::ExhaustiveCollatz, VmKind::Stack) => {
            collatz_dispatches(STACK_COLLATZ, collatz_tally(COLLATZ_LIMIT))
        }
        (BenchName::ExhaustiveCollatz, VmKind::Register) => {
            collatz_dispatches(REGISTER_COLLATZ, collatz_tally(COLLATZ_LIMIT))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expect(name: BenchName, vm: VmKind) -> u64 {
        expected_dispatches(BenchmarkCase::new(name, vm))
    }

    #[test]
    fn closed_forms() {
        assert_eq!(expect(BenchName::Fibonacci, VmKind::Stack), 14_012);
        assert_eq!(expect(BenchName::Fibonacci, VmKind::Register), 3_008);
        assert_eq!(expect(BenchName::Recursion, VmKind::Stack), 9_010);
        assert_eq!(expect(BenchName::Recursion, VmKind::Register), 5_008);
        assert_eq!(expect(BenchName::AddictiveAddition, VmKind::Stack), 30_000_006);
        assert_eq!(expect(BenchName::AddictiveAddition, VmKind::Register), 20_000_005);
    }

    #[test]
    fn small_trajectories() {
        assert_eq!(
            trajectory(1),
            CollatzTally {
                numbers: 1,
                odd_steps: 0,
                even_steps: 0
            }
        );
        // 3 10 5 16 8 4 2 1
        assert_eq!(
            trajectory(3),
            CollatzTally {
                numbers: 1,
                odd_steps: 2,
                even_steps: 5
            }
        );
        assert_eq!(trajectory(27).odd_steps + trajectory(27).even_steps, 111);
    }

    #[test]
    fn tiny_limit_by_hand() {
        // n = 1 and n = 2 only. Stack: entry 1, two numbers of 14, one even
        // round of 16, exit 6.
        let t = collatz_tally_sequential(3);
        assert_eq!(
            t,
            CollatzTally {
                numbers: 2,
                odd_steps: 0,
                even_steps: 1
            }
        );
        assert_eq!(collatz_dispatches(STACK_COLLATZ, t), 1 + 2 * 14 + 16 + 6);
        assert_eq!(collatz_dispatches(REGISTER_COLLATZ, t), 1 + 2 * 8 + 10 + 3);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_matches_sequential() {
        assert_eq!(collatz_tally_parallel(5_000), collatz_tally_sequential(5_000));
    }

    #[test]
    fn collatz_totals() {
        assert_eq!(expect(BenchName::ExhaustiveCollatz, VmKind::Stack), 30_850_935);
        assert_eq!(expect(BenchName::ExhaustiveCollatz, VmKind::Register), 19_114_675);
    }
}
