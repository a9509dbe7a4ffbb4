//! Small random LM programs over a handful of names, biased towards ones
//! that type-check.

use rand::seq::SliceRandom;
use rand::Rng;
use refsynth_lm::{LmDecl, LmExpr, LmProgram, LmRef};

const VARS: [&str; 3] = ["x", "y", "z"];
const MODS: [&str; 3] = ["A", "B", "C"];

fn pick<R: Rng>(rng: &mut R, xs: &[&str]) -> String {
    xs.choose(rng).unwrap().to_string()
}

fn module_path<R: Rng>(rng: &mut R) -> Vec<String> {
    let n = if rng.gen_bool(0.65) { 1 } else { 2 };
    (0..n).map(|_| pick(rng, &MODS)).collect()
}

fn var_path<R: Rng>(rng: &mut R) -> Vec<String> {
    let mut p = if rng.gen_bool(0.6) { Vec::new() } else { module_path(rng) };
    p.push(pick(rng, &VARS));
    p
}

fn expr<R: Rng>(rng: &mut R, depth: usize) -> LmExpr {
    match rng.gen_range(0..4) {
        0 | 1 => LmExpr::Ref(LmRef::Path(var_path(rng))),
        2 if depth > 0 => LmExpr::Add(Box::new(expr(rng, depth - 1)), Box::new(expr(rng, depth - 1))),
        _ => LmExpr::Num(rng.gen_range(0..10)),
    }
}

fn decls<R: Rng>(rng: &mut R, depth: usize) -> Vec<LmDecl> {
    let n = rng.gen_range(0..=3);
    (0..n)
        .map(|_| {
            if depth > 0 && rng.gen_bool(0.45) {
                let imports = (0..rng.gen_range(0..=1)).map(|_| LmRef::Path(module_path(rng))).collect();
                LmDecl::Mod { name: pick(rng, &MODS), imports, members: decls(rng, depth - 1) }
            } else {
                LmDecl::Var { name: pick(rng, &VARS), expr: expr(rng, 1) }
            }
        })
        .collect()
}

pub fn program<R: Rng>(rng: &mut R) -> LmProgram {
    LmProgram { decls: decls(rng, 2), locks: Vec::new() }
}
