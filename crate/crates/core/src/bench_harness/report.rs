use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::corpus::{BenchName, BenchmarkCase, VmKind};
use super::oracle::expected_dispatches;
use super::{BenchConfig, CaseResult, HarnessError};
use crate::instrumentation::{davis_estimate, Clock, CpuClock, DavisInput, Metrics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
    Markdown,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            "markdown" | "md" => Ok(OutputFormat::Markdown),
            _ => Err(format!("unknown format `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleVerdict {
    Match,
    Mismatch { expected: u64, actual: u64 },
}

impl OracleVerdict {
    pub fn is_match(&self) -> bool {
        matches!(self, OracleVerdict::Match)
    }
}

/// Time fields are absent in counts-only reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRow {
    pub case: BenchName,
    pub vm: VmKind,
    pub dispatch_count: u64,
    pub fetch_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fetch_time_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dispatch_time_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exec_time_us: Option<f64>,
    pub oracle_verdict: OracleVerdict,
    pub expected_dispatches: u64,
    pub published_dispatches: u64,
    pub repetitions: u32,
}

/// Stack-versus-register deltas for one workload; percentages are
/// `(stack - register) / stack * 100`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub name: BenchName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exec_time_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dispatch_time_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fetch_time_pct: Option<f64>,
    /// Register dispatches over stack dispatches.
    pub dispatch_count_ratio: f64,
    /// Register execution time predicted from the stack run's components.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub davis_estimate_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub register_exec_time_us: Option<f64>,
}

/// Means of the per-workload deltas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exec_time_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dispatch_time_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fetch_time_pct: Option<f64>,
    pub dispatch_count_ratio: f64,
}

/// A published dispatch count that the embedded listing does not produce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub case: BenchName,
    pub vm: VmKind,
    pub published: u64,
    pub listing: u64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub timing_mode: String,
    pub clock: String,
    pub clock_ticks_per_second: u64,
    pub repetitions: u32,
    pub warmup: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub environment: Environment,
    pub cases: Vec<CaseRow>,
    pub deltas: Vec<DeltaRow>,
    pub aggregate: AggregateRow,
    pub deviations: Vec<Deviation>,
}

impl BenchReport {
    pub fn all_match(&self) -> bool {
        self.cases.iter().all(|c| c.oracle_verdict.is_match())
    }

    pub fn case(&self, name: BenchName, vm: VmKind) -> Option<&CaseRow> {
        self.cases.iter().find(|c| c.case == name && c.vm == vm)
    }
}

fn pct(stack: f64, register: f64) -> Option<f64> {
    (stack > 0.0).then(|| (stack - register) / stack * 100.0)
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = values.collect();
    let v = v?;
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Report over all four workloads; every one of the eight cases is required.
pub fn compare_report(results: &[CaseResult], config: &BenchConfig) -> Result<BenchReport, HarnessError> {
    compare_subset(&BenchName::ALL, results, config)
}

/// Report over the given workloads, each needing both machines' results.
pub fn compare_subset(
    names: &[BenchName],
    results: &[CaseResult],
    config: &BenchConfig,
) -> Result<BenchReport, HarnessError> {
    let lookup = |case: BenchmarkCase| results.iter().find(|r| r.case == case).map(|r| r.metrics);
    let missing: Vec<BenchmarkCase> = names
        .iter()
        .flat_map(|&n| VmKind::ALL.map(|vm| BenchmarkCase::new(n, vm)))
        .filter(|c| lookup(*c).is_none())
        .collect();
    if !missing.is_empty() {
        return Err(HarnessError::IncompleteResults(missing));
    }

    let timed = config.fine_timing;
    let time = |v: f64| timed.then_some(v);
    let mut cases = Vec::new();
    let mut deltas = Vec::new();
    let mut deviations = Vec::new();
    for &name in names {
        let stack_case = BenchmarkCase::new(name, VmKind::Stack);
        let reg_case = BenchmarkCase::new(name, VmKind::Register);
        let stack = lookup(stack_case).expect("checked");
        let reg = lookup(reg_case).expect("checked");

        for (case, m) in [(stack_case, stack), (reg_case, reg)] {
            let expected = expected_dispatches(case);
            let published = case.published_dispatches();
            cases.push(CaseRow {
                case: case.name,
                vm: case.vm,
                dispatch_count: m.dispatch_count,
                fetch_count: m.fetch_count,
                fetch_time_us: time(m.fetch_time_us),
                dispatch_time_us: time(m.dispatch_time_us),
                exec_time_us: time(m.exec_time_us),
                oracle_verdict: if m.dispatch_count == expected {
                    OracleVerdict::Match
                } else {
                    OracleVerdict::Mismatch {
                        expected,
                        actual: m.dispatch_count,
                    }
                },
                expected_dispatches: expected,
                published_dispatches: published,
                repetitions: m.repetitions,
            });
            if published != expected {
                deviations.push(Deviation {
                    case: case.name,
                    vm: case.vm,
                    published,
                    listing: expected,
                    note: format!(
                        "published count {published} is not reproducible from the embedded listing, which executes {expected} dispatches"
                    ),
                });
            }
        }

        deltas.push(DeltaRow {
            name,
            exec_time_pct: timed.then(|| pct(stack.exec_time_us, reg.exec_time_us)).flatten(),
            dispatch_time_pct: timed
                .then(|| pct(stack.dispatch_time_us, reg.dispatch_time_us))
                .flatten(),
            fetch_time_pct: timed.then(|| pct(stack.fetch_time_us, reg.fetch_time_us)).flatten(),
            dispatch_count_ratio: reg.dispatch_count as f64 / stack.dispatch_count as f64,
            davis_estimate_us: timed.then(|| davis_estimate(&davis_input(&stack, &reg))),
            register_exec_time_us: time(reg.exec_time_us),
        });
    }

    let aggregate = AggregateRow {
        exec_time_pct: mean(deltas.iter().map(|d| d.exec_time_pct)),
        dispatch_time_pct: mean(deltas.iter().map(|d| d.dispatch_time_pct)),
        fetch_time_pct: mean(deltas.iter().map(|d| d.fetch_time_pct)),
        dispatch_count_ratio: mean(deltas.iter().map(|d| Some(d.dispatch_count_ratio))).unwrap_or(0.0),
    };
    let clock_tps = CpuClock::new().map(|c| c.ticks_per_second()).unwrap_or(0);
    Ok(BenchReport {
        environment: Environment {
            timing_mode: if timed { "fine" } else { "counts_only" }.to_string(),
            clock: "process_cpu_time".to_string(),
            clock_ticks_per_second: clock_tps,
            repetitions: config.repetitions,
            warmup: config.warmup,
        },
        cases,
        deltas,
        aggregate,
        deviations,
    })
}

/// Per-unit costs come from the stack run's phase totals.
fn davis_input(stack: &Metrics, reg: &Metrics) -> DavisInput {
    let per = |total: f64, count: u64| if count == 0 { 0.0 } else { total / count as f64 };
    DavisInput {
        t_vsm_us: stack.exec_time_us,
        delta_dispatches: stack.dispatch_count as f64 - reg.dispatch_count as f64,
        t_dispatch_us: per(stack.dispatch_time_us, stack.dispatch_count),
        delta_fetches: reg.fetch_count as f64 - stack.fetch_count as f64,
        t_fetch_us: per(stack.fetch_time_us, stack.fetch_count),
    }
}

pub fn emit(report: &BenchReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        OutputFormat::Csv => emit_csv(report),
        OutputFormat::Markdown => emit_markdown(report),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn verdict_text(v: &OracleVerdict) -> String {
    match v {
        OracleVerdict::Match => "match".to_string(),
        OracleVerdict::Mismatch { expected, actual } => {
            format!("mismatch(expected={expected};actual={actual})")
        }
    }
}

pub(crate) const CSV_HEADER: [&str; 16] = [
    "row",
    "case",
    "vm",
    "dispatch_count",
    "fetch_count",
    "fetch_time_us",
    "dispatch_time_us",
    "exec_time_us",
    "oracle_verdict",
    "expected_dispatches",
    "published_dispatches",
    "exec_time_pct",
    "dispatch_time_pct",
    "fetch_time_pct",
    "dispatch_count_ratio",
    "davis_estimate_us",
];

fn emit_csv(report: &BenchReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let write = |w: &mut csv::Writer<Vec<u8>>, row: [String; 16]| {
        w.write_record(&row).expect("in-memory write");
    };
    write(&mut w, CSV_HEADER.map(String::from));
    for c in &report.cases {
        write(
            &mut w,
            [
                "case".into(),
                c.case.to_string(),
                c.vm.to_string(),
                c.dispatch_count.to_string(),
                c.fetch_count.to_string(),
                opt(c.fetch_time_us),
                opt(c.dispatch_time_us),
                opt(c.exec_time_us),
                verdict_text(&c.oracle_verdict),
                c.expected_dispatches.to_string(),
                c.published_dispatches.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ],
        );
    }
    for d in &report.deltas {
        write(
            &mut w,
            [
                "delta".into(),
                d.name.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                opt(d.exec_time_pct),
                opt(d.dispatch_time_pct),
                opt(d.fetch_time_pct),
                d.dispatch_count_ratio.to_string(),
                opt(d.davis_estimate_us),
            ],
        );
    }
    let a = &report.aggregate;
    write(
        &mut w,
        [
            "aggregate".into(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            opt(a.exec_time_pct),
            opt(a.dispatch_time_pct),
            opt(a.fetch_time_pct),
            a.dispatch_count_ratio.to_string(),
            String::new(),
        ],
    );
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

fn emit_markdown(report: &BenchReport) -> String {
    let mut s = String::new();
    let env = &report.environment;
    let _ = writeln!(
        s,
        "# Stack vs register benchmark\n\nTiming: {} ({}, {} ticks/s), {} repetitions, {} warmup.\n",
        env.timing_mode, env.clock, env.clock_ticks_per_second, env.repetitions, env.warmup
    );

    let names: Vec<BenchName> = report.deltas.iter().map(|d| d.name).collect();
    let count = |n, vm| report.case(n, vm).map_or(0, |c| c.dispatch_count);

    s.push_str("## Dispatch counts\n\n| Benchmark | Stack | Register |\n|---|---:|---:|\n");
    for &n in &names {
        let _ = writeln!(
            s,
            "| {n} | {} | {} |",
            count(n, VmKind::Stack),
            count(n, VmKind::Register)
        );
    }

    s.push_str(
        "\n## Oracle verdicts\n\n| Benchmark | VM | Expected | Published | Verdict |\n|---|---|---:|---:|---|\n",
    );
    for c in &report.cases {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} |",
            c.case,
            c.vm,
            c.expected_dispatches,
            c.published_dispatches,
            verdict_text(&c.oracle_verdict)
        );
    }

    if env.timing_mode == "fine" {
        s.push_str("\n## Times (µs)\n\n| Benchmark | VM | Fetch | Dispatch | Execution |\n|---|---|---:|---:|---:|\n");
        for c in &report.cases {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} |",
                c.case,
                c.vm,
                opt(c.fetch_time_us),
                opt(c.dispatch_time_us),
                opt(c.exec_time_us)
            );
        }
    }

    s.push_str(
        "\n## Register relative to stack\n\n| Benchmark | Execution % less | Dispatch % less | Fetch % less | Dispatch ratio | Estimated register time (µs) | Measured register time (µs) |\n|---|---:|---:|---:|---:|---:|---:|\n",
    );
    for d in &report.deltas {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} | {} |",
            d.name,
            opt(d.exec_time_pct),
            opt(d.dispatch_time_pct),
            opt(d.fetch_time_pct),
            d.dispatch_count_ratio,
            opt(d.davis_estimate_us),
            opt(d.register_exec_time_us)
        );
    }
    let a = &report.aggregate;
    let _ = writeln!(
        s,
        "| **mean** | {} | {} | {} | {} | | |",
        opt(a.exec_time_pct),
        opt(a.dispatch_time_pct),
        opt(a.fetch_time_pct),
        a.dispatch_count_ratio
    );

    if !report.deviations.is_empty() {
        s.push_str("\n## Deviations from published counts\n\n");
        for d in &report.deviations {
            let _ = writeln!(s, "- {} / {}: {}", d.case, d.vm, d.note);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(dispatch: u64, fetch: u64, f: f64, d: f64, e: f64) -> Metrics {
        Metrics {
            dispatch_count: dispatch,
            fetch_count: fetch,
            fetch_time_us: f,
            dispatch_time_us: d,
            exec_time_us: e,
            repetitions: 1,
        }
    }

    /// Results whose counts equal the oracle, with simple synthetic times.
    fn synthetic(names: &[BenchName]) -> Vec<CaseResult> {
        names
            .iter()
            .flat_map(|&n| {
                let s = BenchmarkCase::new(n, VmKind::Stack);
                let r = BenchmarkCase::new(n, VmKind::Register);
                [
                    CaseResult {
                        case: s,
                        metrics: metrics(expected_dispatches(s), expected_dispatches(s) + 10, 40.0, 50.0, 100.0),
                    },
                    CaseResult {
                        case: r,
                        metrics: metrics(expected_dispatches(r), expected_dispatches(r) + 30, 50.0, 20.0, 80.0),
                    },
                ]
            })
            .collect()
    }

    fn fine() -> BenchConfig {
        BenchConfig {
            repetitions: 1,
            warmup: 0,
            ..Default::default()
        }
    }

    #[test]
    fn percentage_deltas() {
        let r = compare_report(&synthetic(&BenchName::ALL), &fine()).unwrap();
        for d in &r.deltas {
            assert_eq!(d.exec_time_pct, Some(20.0));
            assert_eq!(d.dispatch_time_pct, Some(60.0));
            assert_eq!(d.fetch_time_pct, Some(-25.0));
            assert!(d.dispatch_count_ratio < 1.0);
        }
        assert_eq!(r.aggregate.exec_time_pct, Some(20.0));
        assert!(r.all_match());
    }

    #[test]
    fn davis_line_uses_stack_components() {
        let r = compare_report(&synthetic(&BenchName::ALL), &fine()).unwrap();
        let d = &r.deltas[0]; // Fibonacci
        let (sd, rd) = (14_012.0, 3_008.0);
        let want = 100.0 - (sd - rd) * (50.0 / sd) + ((rd + 30.0) - (sd + 10.0)) * (40.0 / (sd + 10.0));
        assert!((d.davis_estimate_us.unwrap() - want).abs() < 1e-9);
        assert_eq!(d.register_exec_time_us, Some(80.0));
    }

    #[test]
    fn mismatch_and_deviation_are_flagged() {
        let mut results = synthetic(&BenchName::ALL);
        results[0].metrics.dispatch_count += 1;
        let r = compare_report(&results, &fine()).unwrap();
        assert_eq!(
            r.cases[0].oracle_verdict,
            OracleVerdict::Mismatch {
                expected: 14_012,
                actual: 14_013
            }
        );
        assert!(!r.all_match());
        assert_eq!(r.deviations.len(), 1);
        let d = &r.deviations[0];
        assert_eq!(
            (d.case, d.vm, d.published, d.listing),
            (BenchName::AddictiveAddition, VmKind::Stack, 35_000_007, 30_000_006)
        );
    }

    #[test]
    fn incomplete_results() {
        let mut results = synthetic(&BenchName::ALL);
        results.pop();
        assert!(matches!(
            compare_report(&results, &fine()),
            Err(HarnessError::IncompleteResults(m)) if m == vec![BenchmarkCase::new(BenchName::Recursion, VmKind::Register)]
        ));
        assert!(compare_subset(&[BenchName::Fibonacci], &results, &fine()).is_ok());
    }

    #[test]
    fn counts_only_omits_times() {
        let config = BenchConfig {
            fine_timing: false,
            ..fine()
        };
        let r = compare_report(&synthetic(&BenchName::ALL), &config).unwrap();
        let json = emit(&r, OutputFormat::Json);
        assert!(!json.contains("time_us"));
        assert!(!json.contains("_pct"));
        assert!(json.contains("\"oracle_verdict\": \"match\""));
    }

    #[test]
    fn json_roundtrips() {
        let mut results = synthetic(&BenchName::ALL);
        results[3].metrics.exec_time_us = 0.1 + 0.2;
        results[1].metrics.dispatch_count = 7;
        let r = compare_report(&results, &fine()).unwrap();
        let back: BenchReport = serde_json::from_str(&emit(&r, OutputFormat::Json)).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn csv_shape() {
        let r = compare_report(&synthetic(&BenchName::ALL), &fine()).unwrap();
        let text = emit(&r, OutputFormat::Csv);
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 8 + 4 + 1);
        assert_eq!(rows.iter().filter(|r| &r[0] == "case").count(), 8);
        assert_eq!(rows.iter().filter(|r| &r[0] == "delta").count(), 4);
        assert_eq!(&rows[12][0], "aggregate");
    }

    #[test]
    fn markdown_counts_table() {
        let r = compare_report(&synthetic(&BenchName::ALL), &fine()).unwrap();
        let md = emit(&r, OutputFormat::Markdown);
        let section = md.split("## Dispatch counts").nth(1).unwrap();
        let table: Vec<&str> = section
            .lines()
            .skip_while(|l| !l.starts_with('|'))
            .take_while(|l| l.starts_with('|'))
            .collect();
        assert_eq!(table[0], "| Benchmark | Stack | Register |");
        assert_eq!(table.len(), 2 + 4);
        assert!(table.contains(&"| Fibonacci | 14012 | 3008 |"));
        assert!(md.contains("35000007"));
    }

    #[test]
    fn emission_is_deterministic() {
        let r = compare_report(&synthetic(&BenchName::ALL), &fine()).unwrap();
        for f in [OutputFormat::Json, OutputFormat::Csv, OutputFormat::Markdown] {
            assert_eq!(emit(&r, f), emit(&r.clone(), f));
        }
    }
}
