use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use refsynth::{bench, emit_program, exit, load_program, load_spec, synth, SynthConfig};

#[derive(Parser)]
#[command(name = "refsynth", about = "Reference synthesis for LM programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(clap::Args, Clone)]
struct SearchArgs {
    /// Solutions to report per lock.
    #[arg(long, default_value_t = 1)]
    max_solutions: usize,
    /// Speculative expansions allowed on one search branch.
    #[arg(long, default_value_t = 6)]
    max_depth: usize,
    #[arg(long, default_value_t = 60_000)]
    timeout_ms: u64,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    heuristics: Switch,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

impl SearchArgs {
    fn config(&self) -> SynthConfig {
        SynthConfig {
            max_solutions: self.max_solutions.max(1),
            max_depth: self.max_depth,
            timeout: Duration::from_millis(self.timeout_ms),
            heuristics: matches!(self.heuristics, Switch::On),
            workers: self.workers.max(1),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Type-check a program.
    Check {
        file: PathBuf,
        /// Rule file, or `lm` / `recmod` for the bundled ones.
        #[arg(long)]
        spec: Option<String>,
        /// Rewrite ready constraints in a seeded random order.
        #[arg(long)]
        seed: Option<u64>,
        /// Print every solver step.
        #[arg(long)]
        trace: bool,
    },
    /// Synthesise the locked references of a program.
    Synth {
        file: PathBuf,
        #[arg(long)]
        spec: Option<String>,
        #[command(flatten)]
        search: SearchArgs,
        /// Also print the program with the locks filled in.
        #[arg(long)]
        emit_program: bool,
    },
    /// Print the scope graph as DOT.
    Graph {
        file: PathBuf,
        #[arg(long)]
        spec: Option<String>,
    },
    /// Synthesise every `.lm` file in a directory and summarise.
    Bench {
        dir: PathBuf,
        #[arg(long)]
        spec: Option<String>,
        #[command(flatten)]
        search: SearchArgs,
        /// Write the per-file report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Rerun each file with heuristics off and compare solution sets.
        #[arg(long)]
        compare: bool,
    },
}

fn run(cli: Cli) -> Result<i32, refsynth::CliError> {
    match cli.command {
        Command::Check { file, spec, seed, trace } => {
            let spec = load_spec(spec.as_deref())?;
            let p = load_program(&file)?;
            let out = refsynth::check(&p, &spec, seed, trace);
            print!("{}", out.report);
            Ok(out.code)
        }
        Command::Synth { file, spec, search, emit_program: emit } => {
            let spec = load_spec(spec.as_deref())?;
            let p = load_program(&file)?;
            let run = synth(&p, &spec, &search.config(), &mut |line| println!("{line}"))?;
            if let Some(v) = &run.violation {
                eprintln!("error: emitted solution failed re-validation: {v}");
            }
            for h in &run.holes {
                if run.refs_for(h.id).is_empty() {
                    eprintln!("no solution for {} {}", h.id, h.name);
                }
            }
            if emit && run.violation.is_none() {
                match emit_program(&run, &spec) {
                    Some(text) => print!("{text}"),
                    None => eprintln!("no combination of the solutions type-checks"),
                }
            }
            if let refsynth_core::search::SearchStatus::BudgetExhausted(r) = run.status {
                eprintln!("search budget exhausted ({r:?})");
            }
            Ok(run.code())
        }
        Command::Graph { file, spec } => {
            let spec = load_spec(spec.as_deref())?;
            let p = load_program(&file)?;
            let (code, dot) = refsynth::graph(&p, &spec);
            print!("{dot}");
            Ok(code)
        }
        Command::Bench { dir, spec, search, report, compare } => {
            let spec = load_spec(spec.as_deref())?;
            let cfg = search.config();
            let r = bench::bench(&dir, &spec, &cfg, compare, search.workers.max(1))
                .map_err(|e| refsynth::CliError { code: exit::INPUT, message: format!("{}: {e}", dir.display()) })?;
            print!("{}", r.table());
            if compare {
                let same = r.files.iter().filter(|f| f.same_without_heuristics == Some(true)).count();
                println!("heuristics off: same solution sets for {same}/{} files", r.files.len());
            }
            let machine = r.machine();
            match report {
                Some(path) => std::fs::write(&path, machine)
                    .map_err(|e| refsynth::CliError { code: exit::INPUT, message: format!("{}: {e}", path.display()) })?,
                None => print!("{machine}"),
            }
            Ok(if r.count(bench::Outcome::Failure) > 0 { exit::UNSOUND } else { exit::OK })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
