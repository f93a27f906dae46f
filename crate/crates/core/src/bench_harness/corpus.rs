//! The eight embedded benchmark programs: four workloads, each written once
//! for the stack machine (`.fng`) and once for the register machine
//! (`.gnf`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BenchName {
    Fibonacci,
    ExhaustiveCollatz,
    AddictiveAddition,
    Recursion,
}

impl BenchName {
    pub const ALL: [BenchName; 4] = [
        BenchName::Fibonacci,
        BenchName::ExhaustiveCollatz,
        BenchName::AddictiveAddition,
        BenchName::Recursion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BenchName::Fibonacci => "Fibonacci",
            BenchName::ExhaustiveCollatz => "ExhaustiveCollatz",
            BenchName::AddictiveAddition => "AddictiveAddition",
            BenchName::Recursion => "Recursion",
        }
    }
}

impl fmt::Display for BenchName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchName {
    type Err = String;

    /// Case-insensitive; `_` and `-` are ignored.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| *c != '_' && *c != '-')
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "fibonacci" | "fib" => Ok(BenchName::Fibonacci),
            "exhaustivecollatz" | "collatz" => Ok(BenchName::ExhaustiveCollatz),
            "addictiveaddition" | "addition" => Ok(BenchName::AddictiveAddition),
            "recursion" => Ok(BenchName::Recursion),
            _ => Err(format!("unknown benchmark `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VmKind {
    Stack,
    Register,
}

impl VmKind {
    pub const ALL: [VmKind; 2] = [VmKind::Stack, VmKind::Register];

    pub fn as_str(self) -> &'static str {
        match self {
            VmKind::Stack => "stack",
            VmKind::Register => "register",
        }
    }
}

impl fmt::Display for VmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VmKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "stack" => Ok(VmKind::Stack),
            "register" => Ok(VmKind::Register),
            _ => Err(format!("unknown vm `{s}` (expected stack or register)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BenchmarkCase {
    pub name: BenchName,
    pub vm: VmKind,
}

impl BenchmarkCase {
    pub fn new(name: BenchName, vm: VmKind) -> Self {
        BenchmarkCase { name, vm }
    }

    /// All eight cases, stack before register within each name.
    pub fn all() -> Vec<BenchmarkCase> {
        BenchName::ALL
            .iter()
            .flat_map(|&name| VmKind::ALL.iter().map(move |&vm| BenchmarkCase { name, vm }))
            .collect()
    }

    pub fn source(&self) -> &'static str {
        source(self.name, self.vm)
    }

    pub fn file_name(&self) -> String {
        let ext = match self.vm {
            VmKind::Stack => "fng",
            VmKind::Register => "gnf",
        };
        format!("{}_{}.{ext}", self.name, self.vm)
    }

    /// Dispatch count reported alongside the original listings.
    pub fn published_dispatches(&self) -> u64 {
        match (self.name, self.vm) {
            (BenchName::Fibonacci, VmKind::Stack) => 14_012,
            (BenchName::Fibonacci, VmKind::Register) => 3_008,
            (BenchName::ExhaustiveCollatz, VmKind::Stack) => 30_850_935,
            (BenchName::ExhaustiveCollatz, VmKind::Register) => 19_114_675,
            (BenchName::AddictiveAddition, VmKind::Stack) => 35_000_007,
            (BenchName::AddictiveAddition, VmKind::Register) => 20_000_005,
            (BenchName::Recursion, VmKind::Stack) => 9_010,
            (BenchName::Recursion, VmKind::Register) => 5_008,
        }
    }
}

impl fmt::Display for BenchmarkCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.vm)
    }
}

pub fn source(name: BenchName, vm: VmKind) -> &'static str {
    match (name, vm) {
        (BenchName::Fibonacci, VmKind::Stack) => include_str!("../../corpus/fibonacci.fng"),
        (BenchName::Fibonacci, VmKind::Register) => include_str!("../../corpus/fibonacci.gnf"),
        (BenchName::ExhaustiveCollatz, VmKind::Stack) => {
            include_str!("../../corpus/exhaustive_collatz.fng")
        }
        (BenchName::ExhaustiveCollatz, VmKind::Register) => {
            include_str!("../../corpus/exhaustive_collatz.gnf")
        }
        (BenchName::AddictiveAddition, VmKind::Stack) => {
            include_str!("../../corpus/addictive_addition.fng")
        }
        (BenchName::AddictiveAddition, VmKind::Register) => {
            include_str!("../../corpus/addictive_addition.gnf")
        }
        (BenchName::Recursion, VmKind::Stack) => include_str!("../../corpus/recursion.fng"),
        (BenchName::Recursion, VmKind::Register) => include_str!("../../corpus/recursion.gnf"),
    }
}
