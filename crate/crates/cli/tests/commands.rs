mod common;

use std::path::Path;
use std::process::{Command, Output};

fn refsynth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_refsynth")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn corpus(name: &str) -> String {
    common::corpus_file(name).to_string_lossy().into_owned()
}

fn scopes_in_dot(dot: &str) -> usize {
    dot.lines().filter(|l| l.contains("[label=\"s")).count()
}

#[test]
fn check_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let good = write(&d, "good.lm", "var x = 42\nmod A { var x = 0 }\nmod B { import A::* var y = x }\n");
    let o = refsynth(&["check", &good]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("ok"));
    assert_eq!(code(&refsynth(&["check", &write(&d, "bad.lm", "var y = q")])), 1);
    assert_eq!(code(&refsynth(&["check", &corpus("fig6a.lm")])), 2);
    assert_eq!(code(&refsynth(&["check", &write(&d, "syntax.lm", "var = 1")])), 3);
    assert_eq!(code(&refsynth(&["check", "/nonexistent/file.lm"])), 3);
    assert_eq!(code(&refsynth(&["check", &good, "--spec", "/nonexistent/rules.spec"])), 3);
}

#[test]
fn seeded_check_and_trace() {
    let o = refsynth(&["check", &corpus("fig6a.lm"), "--seed", "5"]);
    assert_eq!(code(&o), 2);
    let o = refsynth(&["check", &corpus("fig6a.lm"), "--trace"]);
    assert!(stdout(&o).contains("Op-Pred"));
}

#[test]
fn synth_prints_solutions() {
    let o = refsynth(&["synth", &corpus("fig6a.lm"), "--max-solutions", "4", "--max-depth", "4"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("ref: y}"), "{out}");
    assert!(out.contains("ref: A.y}"), "{out}");
    let o = refsynth(&["synth", &corpus("fig7.lm"), "--emit-program"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("import A::*"), "{out}");
}

#[test]
fn synth_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    // Rules that build no scopes leave every target undiscoverable.
    let silent = write(&d, "silent.spec", "labels L; init programOk; pred programOk/1; rule P: programOk(?p) <- emp;");
    assert_eq!(code(&refsynth(&["synth", &corpus("fig6a.lm"), "--spec", &silent])), 4);
    assert_eq!(code(&refsynth(&["synth", &corpus("fig6a.lm"), "--max-depth", "0"])), 5);
    let ill = write(&d, "ill.lm", "var y = q\nvar x = [[y#1]]\n");
    assert_eq!(code(&refsynth(&["synth", &ill])), 1);
    let missing = write(&d, "missing.lm", "var x = [[q#1]]\n");
    assert_eq!(code(&refsynth(&["synth", &missing])), 3);
}

#[test]
fn graph_has_one_node_per_scope() {
    let d = tempfile::tempdir().unwrap();
    let o = refsynth(&["graph", &corpus("fig6a.lm")]);
    assert_eq!(code(&o), 0);
    let dot = stdout(&o);
    assert!(dot.starts_with("digraph"));
    assert_eq!(scopes_in_dot(&dot), 4);
    assert_eq!(dot.matches("-> s").count(), 4);
    assert_eq!(scopes_in_dot(&stdout(&refsynth(&["graph", &write(&d, "empty.lm", "")]))), 1);
    let fig4 = write(&d, "fig4.lm", "var x = 42\nmod A { var x = 0 }\nmod B { import A::* var y = x }\n");
    let dot = stdout(&refsynth(&["graph", &fig4]));
    assert_eq!(scopes_in_dot(&dot), 6);
    assert!(dot.contains("[label=\"IMP\"]"));
}

#[test]
fn bench_summarises_a_directory() {
    let d = tempfile::tempdir().unwrap();
    for f in ["fig6a.lm", "fig7.lm"] {
        std::fs::copy(common::corpus_file(f), d.path().join(f)).unwrap();
    }
    let report = d.path().join("report.txt");
    let o = refsynth(&["bench", d.path().to_str().unwrap(), "--report", report.to_str().unwrap(), "--compare"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("heuristics off: same solution sets for 2/2 files"));
    let text = std::fs::read_to_string(Path::new(&report)).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().all(|l| l.contains("status=Success")));
}
