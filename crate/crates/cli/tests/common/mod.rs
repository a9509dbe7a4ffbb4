#![allow(dead_code)]

pub mod gen;
pub mod oracle;

use std::path::PathBuf;

use refsynth_lm::{parse_lm, LmProgram};

pub fn corpus() -> Vec<(String, LmProgram)> {
    let dir = refsynth_lm::corpus_dir();
    refsynth::bench::lm_files(&dir)
        .unwrap()
        .into_iter()
        .map(|p| (name(&p), parse_lm(&std::fs::read_to_string(&p).unwrap()).unwrap()))
        .collect()
}

pub fn corpus_file(name: &str) -> PathBuf {
    refsynth_lm::corpus_dir().join(name)
}

fn name(p: &std::path::Path) -> String {
    p.file_name().unwrap().to_string_lossy().into_owned()
}

pub fn program(name: &str) -> LmProgram {
    parse_lm(&std::fs::read_to_string(corpus_file(name)).unwrap()).unwrap()
}
