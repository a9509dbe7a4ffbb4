//! LM, a small module language: parser with locked references, constraint
//! generation against the bundled rule files, and a pretty printer.

pub mod ast;
pub mod encode;
pub mod parse;
pub mod pretty;

use std::path::PathBuf;

use refsynth_core::Specification;

pub use ast::{DeclKey, LmDecl, LmExpr, LmProgram, LmRef, LockSite};
pub use encode::{decl_token, encode, gen_constraint};
pub use parse::{parse_lm, parse_ref, LmError};
pub use pretty::{pretty_program, pretty_ref, ref_to_ast, NotARefTerm};

pub const LM_SPEC: &str = include_str!("../specs/lm.spec");
pub const RECMOD_SPEC: &str = include_str!("../specs/recmod.spec");

pub fn lm_spec() -> Specification {
    Specification::parse(LM_SPEC).expect("bundled LM rules load")
}

pub fn recmod_spec() -> Specification {
    Specification::parse(RECMOD_SPEC).expect("bundled RecMod rules load")
}

/// Directory of the bundled `.lm` programs.
pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

pub fn specs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("specs")
}

/// The program with lock `i` (source order) replaced by `solutions[i]`
/// where given.
pub fn fill_locks(p: &LmProgram, solutions: &std::collections::BTreeMap<usize, LmRef>) -> LmProgram {
    p.map_locks(&mut |i, k| solutions.get(&i).cloned().unwrap_or_else(|| LmRef::Locked(k.clone())))
}
