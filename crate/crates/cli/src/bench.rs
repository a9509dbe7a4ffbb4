//! Runs synthesis over a directory of programs and summarises outcomes and
//! per-hole timings.

use std::collections::BTreeSet;
use std::fmt::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use refsynth_core::Specification;

use crate::{load_program, synth, SynthConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Timeout,
    /// A solution failed re-validation, or the file could not be processed.
    Failure,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Outcome::Success => "Success",
            Outcome::Timeout => "Timeout",
            Outcome::Failure => "Failure",
        })
    }
}

#[derive(Debug, Clone)]
pub struct FileReport {
    pub file: String,
    pub outcome: Outcome,
    pub holes: usize,
    /// Milliseconds to each hole's first solution; `None` if it had none.
    pub hole_ms: Vec<Option<f64>>,
    pub solutions: Vec<BTreeSet<String>>,
    /// Whether the heuristics-off run found the same sets, when asked.
    pub same_without_heuristics: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    pub files: Vec<FileReport>,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

fn run_one(path: &Path, spec: &Specification, cfg: &SynthConfig, compare: bool) -> FileReport {
    let file = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let failed = |error: String| FileReport {
        file: file.clone(),
        outcome: Outcome::Failure,
        holes: 0,
        hole_ms: Vec::new(),
        solutions: Vec::new(),
        same_without_heuristics: None,
        error: Some(error),
    };
    let p = match load_program(path) {
        Ok(p) => p,
        Err(e) => return failed(e.message),
    };
    let run = match synth(&p, spec, cfg, &mut |_| {}) {
        Ok(r) => r,
        Err(e) => return failed(e.message),
    };
    let sets = |r: &crate::SynthRun| -> Vec<BTreeSet<String>> {
        r.holes.iter().map(|h| r.refs_for(h.id).into_iter().collect()).collect()
    };
    let solutions = sets(&run);
    let hole_ms: Vec<Option<f64>> = run.holes.iter().map(|h| run.first_solution.get(&h.id).map(|d| ms(*d))).collect();
    let outcome = if run.violation.is_some() {
        Outcome::Failure
    } else if solutions.iter().any(|s| s.is_empty()) {
        Outcome::Timeout
    } else {
        Outcome::Success
    };
    let same_without_heuristics = compare.then(|| {
        let off = SynthConfig { heuristics: false, ..cfg.clone() };
        match synth(&p, spec, &off, &mut |_| {}) {
            Ok(r) => sets(&r) == solutions,
            Err(_) => false,
        }
    });
    FileReport {
        file,
        outcome,
        holes: run.holes.len(),
        hole_ms,
        solutions,
        same_without_heuristics,
        error: run.violation,
    }
}

pub fn lm_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "lm"))
        .collect();
    files.sort();
    Ok(files)
}

/// Files run in parallel when `workers > 1`; the report is ordered by name.
pub fn bench(dir: &Path, spec: &Specification, cfg: &SynthConfig, compare: bool, workers: usize) -> std::io::Result<BenchReport> {
    let files = lm_files(dir)?;
    let per_file = SynthConfig { workers: 1, ..cfg.clone() };
    let files = if workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(std::io::Error::other)?;
        pool.install(|| files.par_iter().map(|f| run_one(f, spec, &per_file, compare)).collect())
    } else {
        files.iter().map(|f| run_one(f, spec, &per_file, compare)).collect()
    };
    Ok(BenchReport { files })
}

/// Nearest-rank percentile of sorted data.
pub fn percentile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

impl BenchReport {
    pub fn count(&self, o: Outcome) -> usize {
        self.files.iter().filter(|f| f.outcome == o).count()
    }

    pub fn hole_times(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self.files.iter().flat_map(|f| f.hole_ms.iter().flatten().copied()).collect();
        ts.sort_by(f64::total_cmp);
        ts
    }

    pub fn table(&self) -> String {
        let n = self.files.len().max(1) as f64;
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:>6} {:>8}", "outcome", "files", "share");
        for o in [Outcome::Success, Outcome::Timeout, Outcome::Failure] {
            let c = self.count(o);
            let _ = writeln!(out, "{:<10} {:>6} {:>7.1}%", o.to_string(), c, 100.0 * c as f64 / n);
        }
        let ts = self.hole_times();
        let f = |p: f64| percentile(&ts, p).map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "per-hole ms over {} holes: min {} median {} p90 {} max {}",
            ts.len(),
            f(0.0),
            f(50.0),
            f(90.0),
            f(100.0)
        );
        out
    }

    /// One line per file, keys in a fixed order.
    pub fn machine(&self) -> String {
        let mut out = String::new();
        for f in &self.files {
            let times: Vec<String> =
                f.hole_ms.iter().map(|t| t.map(|v| format!("{v:.3}")).unwrap_or_else(|| "none".into())).collect();
            let sols: Vec<String> = f.solutions.iter().map(|s| s.iter().cloned().collect::<Vec<_>>().join("|")).collect();
            let _ = write!(
                out,
                "file={} status={} holes={} solutions={} hole_ms=[{}] refs=[{}]",
                f.file,
                f.outcome,
                f.holes,
                f.solutions.iter().map(|s| s.len()).sum::<usize>(),
                times.join(","),
                sols.join(";")
            );
            if let Some(same) = f.same_without_heuristics {
                let _ = write!(out, " heuristics_off_equal={same}");
            }
            if let Some(e) = &f.error {
                let _ = write!(out, " error={e:?}");
            }
            out.push('\n');
        }
        out
    }
}
