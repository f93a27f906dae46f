use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn vmlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vmlab")).args(args).output().unwrap()
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("vmlab-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    fs::write(&path, contents).unwrap();
    path
}

fn corpus(file: &str) -> String {
    format!("{}/../core/corpus/{file}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn run_prints_program_output_and_metrics() {
    let out = vmlab(&["run", "--counts-only", &corpus("fibonacci.gnf")]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout), "1318412525\n");
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("dispatches: 3008"), "{err}");
    assert!(!err.contains("time"));
}

#[test]
fn assemble_then_run_bytecode() {
    let bin = std::env::temp_dir().join(format!("vmlab-cli-{}-rec.gnfb", std::process::id()));
    let out = vmlab(&["asm", &corpus("recursion.gnf"), "-o", bin.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(&fs::read(&bin).unwrap()[..4], b"GNFB");

    let out = vmlab(&["run", "--counts-only", bin.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("dispatches: 5008"));

    let out = vmlab(&["disasm", bin.to_str().unwrap()]);
    let text = String::from_utf8(out.stdout).unwrap();
    let src = scratch("roundtrip.gnf", &text);
    let out = vmlab(&["run", "--counts-only", src.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("dispatches: 5008"));
    fs::remove_file(bin).ok();
}

#[test]
fn exit_codes() {
    let bad = scratch("bad.fng", "procedure main\nbogus\n");
    assert_eq!(vmlab(&["run", bad.to_str().unwrap()]).status.code(), Some(2));

    let underflow = scratch("underflow.fng", "procedure main\niconst 1\niadd\nret\n");
    let out = vmlab(&["run", underflow.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stack underflow"));

    let junk = scratch("junk.gnfb", "GNFB\x02\0\0\0\0\0\0\0");
    assert_eq!(vmlab(&["disasm", junk.to_str().unwrap()]).status.code(), Some(2));

    assert_eq!(vmlab(&["run", "/nonexistent/x.fng"]).status.code(), Some(2));
    assert_eq!(vmlab(&["bench", "--suite", "mandelbrot"]).status.code(), Some(2));
    assert_eq!(vmlab(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn single_suite_bench_formats() {
    let out = vmlab(&[
        "bench",
        "--suite",
        "recursion",
        "--counts-only",
        "--reps",
        "1",
        "--warmup",
        "0",
        "--verify",
    ]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["cases"].as_array().unwrap().len(), 2);
    assert_eq!(json["cases"][0]["dispatch_count"], 9010);
    assert!(json["deviations"].as_array().unwrap().is_empty());

    let out = vmlab(&[
        "bench",
        "--suite",
        "fibonacci",
        "--reps",
        "2",
        "--warmup",
        "0",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 + 1 + 1);
    assert!(text
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("case,Fibonacci,stack,14012,17017,"));
}

#[test]
fn oracle_subcommand() {
    let out = vmlab(&["oracle", "addictive-addition", "--vm", "stack"]);
    assert_eq!(
        String::from_utf8_lossy(&out.stdout),
        "AddictiveAddition/stack: 30000006\n"
    );
}
