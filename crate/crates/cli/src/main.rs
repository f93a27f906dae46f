use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use vmlab_core::bench_harness::{
    compare_report, compare_subset, emit, expected_dispatches, run_suite, BenchConfig, BenchName, BenchmarkCase,
    OutputFormat, VmKind,
};
use vmlab_core::instrumentation::Metrics;
use vmlab_core::register_vm::{
    decode_register_program, disassemble, encode_register_program, execute_register, parse_register_source,
    RegExecConfig, RegProgram, MAGIC,
};
use vmlab_core::stack_vm::{execute_stack, parse_stack_source, render_stack_source, StackExecConfig};
use vmlab_core::Sink;

/// Instrumented stack and register bytecode interpreters.
#[derive(Debug, Parser)]
#[command(name = "vmlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a source file; register sources are assembled to `.gnfb` bytecode.
    Asm {
        #[command(flatten)]
        vm: VmArg,
        input: PathBuf,
        /// Output file. Defaults to the input with a `.gnfb` extension for
        /// register sources; stack sources are only checked unless given.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print `.gnfb` bytecode as register-machine source.
    Disasm { input: PathBuf },
    /// Execute one program and report its metrics on stderr.
    Run {
        #[command(flatten)]
        vm: VmArg,
        /// Skip per-instruction timing.
        #[arg(long)]
        counts_only: bool,
        input: PathBuf,
    },
    /// Run the embedded corpus on both machines and print a comparison report.
    Bench {
        /// `all` or one workload name.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 15)]
        reps: u32,
        #[arg(long, default_value_t = 1)]
        warmup: u32,
        /// json, csv or markdown.
        #[arg(long, default_value = "json")]
        format: OutputFormat,
        #[arg(long)]
        counts_only: bool,
        /// Exit with status 3 when any dispatch count disagrees with the oracle.
        #[arg(long)]
        verify: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the expected dispatch count of an embedded workload.
    Oracle {
        name: BenchName,
        /// Both machines when omitted.
        #[arg(long)]
        vm: Option<VmKind>,
    },
}

#[derive(Debug, Args)]
struct VmArg {
    /// Inferred from the extension when omitted: `.fng` is stack, `.gnf`
    /// and `.gnfb` are register.
    #[arg(long)]
    vm: Option<VmKind>,
}

impl VmArg {
    fn resolve(&self, path: &Path) -> Result<VmKind, Failure> {
        if let Some(vm) = self.vm {
            return Ok(vm);
        }
        match path.extension().and_then(|e| e.to_str()) {
            Some("fng") => Ok(VmKind::Stack),
            Some("gnf" | "gnfb") => Ok(VmKind::Register),
            _ => Err(Failure::input(anyhow!(
                "cannot infer the machine for {}; pass --vm",
                path.display()
            ))),
        }
    }
}

/// An error with the process exit status it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    /// Parse, format and I/O problems.
    fn input(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 2,
            error: error.into(),
        }
    }

    fn runtime(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 1,
            error: error.into(),
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::input)
}

fn read_text(path: &Path) -> Result<String, Failure> {
    String::from_utf8(read(path)?)
        .with_context(|| format!("{} is not UTF-8", path.display()))
        .map_err(Failure::input)
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::input)
}

/// Accepts bytecode or source, told apart by the magic bytes.
fn load_register(path: &Path) -> Result<RegProgram, Failure> {
    let bytes = read(path)?;
    let ctx = || path.display().to_string();
    if bytes.starts_with(&MAGIC) {
        decode_register_program(&bytes)
            .with_context(ctx)
            .map_err(Failure::input)
    } else {
        let text = String::from_utf8(bytes)
            .with_context(|| format!("{} is neither bytecode nor UTF-8 source", path.display()))
            .map_err(Failure::input)?;
        parse_register_source(&text).with_context(ctx).map_err(Failure::input)
    }
}

fn print_metrics(m: &Metrics, timed: bool) {
    eprintln!("dispatches: {}", m.dispatch_count);
    eprintln!("fetches:    {}", m.fetch_count);
    if timed {
        eprintln!("fetch time:    {} us", m.fetch_time_us);
        eprintln!("dispatch time: {} us", m.dispatch_time_us);
        eprintln!("exec time:     {} us", m.exec_time_us);
    }
}

fn asm(vm: VmKind, input: &Path, output: Option<PathBuf>) -> Result<(), Failure> {
    let text = read_text(input)?;
    let ctx = || input.display().to_string();
    match vm {
        VmKind::Stack => {
            let program = parse_stack_source(&text).with_context(ctx).map_err(Failure::input)?;
            match output {
                Some(out) => write(&out, render_stack_source(&program).as_bytes()),
                None => {
                    println!(
                        "{}: {} procedures, {} instructions",
                        input.display(),
                        program.procedures.len(),
                        program.instruction_count()
                    );
                    Ok(())
                }
            }
        }
        VmKind::Register => {
            let program = parse_register_source(&text).with_context(ctx).map_err(Failure::input)?;
            let out = output.unwrap_or_else(|| input.with_extension("gnfb"));
            write(&out, &encode_register_program(&program))
        }
    }
}

fn run(vm: VmKind, input: &Path, counts_only: bool) -> Result<(), Failure> {
    let fine_timing = !counts_only;
    let metrics = match vm {
        VmKind::Stack => {
            let text = read_text(input)?;
            let program = parse_stack_source(&text)
                .with_context(|| input.display().to_string())
                .map_err(Failure::input)?;
            let config = StackExecConfig {
                fine_timing,
                sink: Sink::Stdout,
                ..Default::default()
            };
            execute_stack(&program, &config).map_err(Failure::runtime)?.metrics
        }
        VmKind::Register => {
            let program = load_register(input)?;
            let config = RegExecConfig {
                fine_timing,
                sink: Sink::Stdout,
                ..Default::default()
            };
            execute_register(&program, &config).map_err(Failure::runtime)?.metrics
        }
    };
    print_metrics(&metrics, fine_timing);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn bench(
    suite: &str,
    reps: u32,
    warmup: u32,
    format: OutputFormat,
    counts_only: bool,
    verify: bool,
    output: Option<PathBuf>,
) -> Result<(), Failure> {
    let names: Vec<BenchName> = if suite.eq_ignore_ascii_case("all") {
        BenchName::ALL.to_vec()
    } else {
        vec![suite.parse().map_err(|e: String| Failure::input(anyhow!(e)))?]
    };
    let config = BenchConfig {
        repetitions: reps,
        warmup,
        fine_timing: !counts_only,
        format,
    };
    let results = run_suite(&names, &config).map_err(Failure::runtime)?;
    let report = if names.len() == BenchName::ALL.len() {
        compare_report(&results, &config)
    } else {
        compare_subset(&names, &results, &config)
    }
    .map_err(Failure::runtime)?;
    let text = emit(&report, format);
    match output {
        Some(path) => write(&path, text.as_bytes())?,
        None => print!("{text}"),
    }
    if verify && !report.all_match() {
        return Err(Failure {
            code: 3,
            error: anyhow!("dispatch counts disagree with the oracle"),
        });
    }
    Ok(())
}

fn oracle(name: BenchName, vm: Option<VmKind>) {
    let vms = vm.map_or(VmKind::ALL.to_vec(), |v| vec![v]);
    for vm in vms {
        let case = BenchmarkCase::new(name, vm);
        println!("{case}: {}", expected_dispatches(case));
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Asm { vm, input, output } => asm(vm.resolve(&input)?, &input, output),
        Command::Disasm { input } => {
            let bytes = read(&input)?;
            let program = decode_register_program(&bytes)
                .with_context(|| input.display().to_string())
                .map_err(Failure::input)?;
            print!("{}", disassemble(&program));
            Ok(())
        }
        Command::Run { vm, counts_only, input } => run(vm.resolve(&input)?, &input, counts_only),
        Command::Bench {
            suite,
            reps,
            warmup,
            format,
            counts_only,
            verify,
            output,
        } => bench(&suite, reps, warmup, format, counts_only, verify, output),
        Command::Oracle { name, vm } => {
            oracle(name, vm);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
