//! The pieces behind the `refsynth` command, usable from tests.

pub mod bench;

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;
use std::time::Duration;

use refsynth_core::search::{SearchBudget, SearchOptions, SearchStatus};
use refsynth_core::solver::{solve_exhaustively, solve_traced, solve_with, HoleId, SolveResult, DEFAULT_FUEL};
use refsynth_core::synthesis::{check_solution, synthesize, HoleSpec, SolutionRecord, SynthesisError};
use refsynth_core::{Configuration, SolveStatus, Specification, Term};
use refsynth_lm::{fill_locks, gen_constraint, parse_lm, pretty_program, pretty_ref, ref_to_ast, LmProgram, LmRef};

/// Exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const TYPE_ERROR: i32 = 1;
    pub const STUCK: i32 = 2;
    pub const INPUT: i32 = 3;
    pub const TARGET_NOT_FOUND: i32 = 4;
    pub const BUDGET: i32 = 5;
    /// An emitted solution failed re-validation.
    pub const UNSOUND: i32 = 6;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> CliError {
        CliError { code, message: message.into() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

/// `--spec` accepts a file path or the name of a bundled rule file.
pub fn load_spec(spec: Option<&str>) -> Result<Specification, CliError> {
    let text = match spec {
        None | Some("lm") => refsynth_lm::LM_SPEC.to_string(),
        Some("recmod") => refsynth_lm::RECMOD_SPEC.to_string(),
        Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::new(exit::INPUT, format!("{p}: {e}")))?,
    };
    Specification::parse(&text).map_err(|e| CliError::new(exit::INPUT, format!("spec: {e}")))
}

pub fn load_program(path: &Path) -> Result<LmProgram, CliError> {
    let src = std::fs::read_to_string(path).map_err(|e| CliError::new(exit::INPUT, format!("{}: {e}", path.display())))?;
    parse_lm(&src).map_err(|e| CliError::new(exit::INPUT, format!("{}:{e}", path.display())))
}

pub struct CheckOutcome {
    pub code: i32,
    pub result: SolveResult,
    pub report: String,
}

/// Type-checks a program by solving its goal. With a seed, the order in
/// which ready constraints are rewritten is randomised.
pub fn check(p: &LmProgram, spec: &Specification, seed: Option<u64>, trace: bool) -> CheckOutcome {
    let locked = gen_constraint(p);
    let k0 = locked.initial();
    let mut report = String::new();
    let result = match seed {
        Some(seed) => {
            use rand::{Rng, SeedableRng};
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            solve_with(spec, &k0, DEFAULT_FUEL, &mut |n| rng.gen_range(0..n))
        }
        None if trace => solve_traced(spec, &k0, DEFAULT_FUEL, &mut |info, _| {
            let _ = writeln!(report, "{:>5} {:<13} {}", info.index, info.rule, info.constraint);
        }),
        None => solve_exhaustively(spec, &k0, DEFAULT_FUEL),
    };
    let code = match &result.status {
        SolveStatus::Success => {
            report.push_str("ok\n");
            exit::OK
        }
        SolveStatus::Failure(f) => {
            let _ = writeln!(report, "type error: {f}");
            exit::TYPE_ERROR
        }
        SolveStatus::Stuck => {
            let _ = writeln!(report, "stuck on {} constraint(s):", result.configuration.constraints.len());
            for p in &result.configuration.constraints {
                let _ = writeln!(report, "  {}", p.constraint);
            }
            exit::STUCK
        }
        SolveStatus::FuelExhausted => {
            report.push_str("solver fuel exhausted\n");
            exit::BUDGET
        }
    };
    CheckOutcome { code, result, report }
}

/// DOT rendering of the graph the program builds, solved as far as it goes.
pub fn graph(p: &LmProgram, spec: &Specification) -> (i32, String) {
    let out = check(p, spec, None, false);
    let code = if out.code == exit::TYPE_ERROR { exit::TYPE_ERROR } else { exit::OK };
    (code, out.result.configuration.graph.to_dot())
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub max_solutions: usize,
    pub max_depth: usize,
    pub timeout: Duration,
    pub heuristics: bool,
    pub workers: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let b = SearchBudget::default();
        SynthConfig {
            max_solutions: b.max_solutions_per_hole,
            max_depth: b.max_depth,
            timeout: b.wall_clock,
            heuristics: true,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Emitted {
    pub record: SolutionRecord,
    pub reference: String,
    pub line: String,
}

#[derive(Debug, Clone)]
pub struct SynthRun {
    pub program: LmProgram,
    pub holes: Vec<HoleSpec>,
    pub solutions: Vec<Emitted>,
    pub status: SearchStatus,
    /// Time to each hole's first solution.
    pub first_solution: BTreeMap<HoleId, Duration>,
    pub elapsed: Duration,
    pub branches: usize,
    /// Description of the first record that failed re-validation.
    pub violation: Option<String>,
}

impl SynthRun {
    pub fn refs_for(&self, h: HoleId) -> Vec<String> {
        self.solutions.iter().filter(|e| e.record.hole == h).map(|e| e.reference.clone()).collect()
    }

    pub fn code(&self) -> i32 {
        if self.violation.is_some() {
            return exit::UNSOUND;
        }
        let empty = self.holes.iter().any(|h| self.refs_for(h.id).is_empty());
        match self.status {
            SearchStatus::BudgetExhausted(_) if empty => exit::BUDGET,
            _ => exit::OK,
        }
    }
}

pub fn format_record(r: &SolutionRecord, reference: &str) -> String {
    let path: Vec<String> = r.path.iter().map(|s| s.to_string()).collect();
    format!("{{hole: {}, term: {}, path: [{}], steps: {}, ref: {}}}", r.hole, r.term, path.join(", "), r.steps, reference)
}

/// Synthesises every lock of `p`. Each solution is re-validated before it
/// reaches `on_line`; after the first failure nothing more is printed.
pub fn synth(
    p: &LmProgram,
    spec: &Specification,
    cfg: &SynthConfig,
    on_line: &mut dyn FnMut(&str),
) -> Result<SynthRun, CliError> {
    let locked = gen_constraint(p);
    let budget = SearchBudget {
        wall_clock: cfg.timeout,
        max_solutions_per_hole: cfg.max_solutions,
        max_depth: cfg.max_depth,
        ..SearchBudget::default()
    };
    let options = SearchOptions {
        heuristics: cfg.heuristics,
        workers: cfg.workers,
        render: Some(std::sync::Arc::new(|t: &Term| pretty_ref(t).unwrap_or_else(|_| t.to_string()))),
        ..SearchOptions::default()
    };
    let mut solutions = Vec::new();
    let mut violation = None;
    let outcome = synthesize(spec, &locked, &budget, &options, &mut |r| {
        if violation.is_some() {
            return;
        }
        let reference = match pretty_ref(&r.term) {
            Ok(s) => s,
            Err(e) => {
                violation = Some(format!("{}: {e}", r.hole));
                return;
            }
        };
        if !check_solution(spec, &locked, r) {
            violation = Some(format!("{}: {} does not re-validate", r.hole, r.term));
            return;
        }
        let line = format_record(r, &reference);
        on_line(&line);
        solutions.push(Emitted { record: r.clone(), reference, line });
    });
    let outcome = outcome.map_err(|e| match e {
        SynthesisError::TargetNotFound(_) | SynthesisError::AmbiguousTarget(_) => {
            CliError::new(exit::TARGET_NOT_FOUND, e.to_string())
        }
        SynthesisError::InitialTypeError(_) => CliError::new(exit::TYPE_ERROR, e.to_string()),
        SynthesisError::FuelExhausted => CliError::new(exit::BUDGET, e.to_string()),
    })?;
    Ok(SynthRun {
        program: p.clone(),
        holes: locked.holes,
        solutions,
        status: outcome.report.status,
        first_solution: outcome.report.stats.first_solution.clone(),
        elapsed: outcome.report.elapsed,
        branches: outcome.report.stats.branches,
        violation,
    })
}

/// The program with every lock replaced, choosing among the emitted
/// solutions a combination that type-checks. Locks without solutions stay.
pub fn emit_program(run: &SynthRun, spec: &Specification) -> Option<String> {
    let per_hole: Vec<Vec<LmRef>> = run
        .holes
        .iter()
        .map(|h| {
            run.solutions.iter().filter(|e| e.record.hole == h.id).filter_map(|e| ref_to_ast(&e.record.term).ok()).collect()
        })
        .collect();
    let mut choice = vec![0usize; per_hole.len()];
    for _ in 0..10_000 {
        let fill: BTreeMap<usize, LmRef> =
            per_hole.iter().enumerate().filter_map(|(i, rs)| rs.get(choice[i]).map(|r| (i, r.clone()))).collect();
        let filled = fill_locks(&run.program, &fill);
        let status = solve_exhaustively(spec, &gen_constraint(&filled).initial(), DEFAULT_FUEL).status;
        let complete = filled.lock_count() == 0;
        if status == SolveStatus::Success || (!complete && status == SolveStatus::Stuck) {
            return Some(pretty_program(&filled));
        }
        let mut i = 0;
        loop {
            if i == choice.len() {
                return None;
            }
            choice[i] += 1;
            if choice[i] < per_hole[i].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
    None
}

/// Final configuration of a plain solve, for callers that only need the
/// graph or status.
pub fn solve_program(p: &LmProgram, spec: &Specification) -> SolveResult {
    solve_exhaustively(spec, &gen_constraint(p).initial(), DEFAULT_FUEL)
}

/// Rewrites with a random choice among ready constraints.
pub fn solve_seeded(p: &LmProgram, spec: &Specification, seed: u64) -> SolveResult {
    check(p, spec, Some(seed), false).result
}

pub fn initial(p: &LmProgram) -> Configuration {
    gen_constraint(p).initial()
}
