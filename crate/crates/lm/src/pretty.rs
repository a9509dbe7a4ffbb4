use std::fmt::Write;

use refsynth_core::Term;
use thiserror::Error;

use crate::ast::{LmDecl, LmExpr, LmProgram, LmRef};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("not a reference term: {0}")]
pub struct NotARefTerm(pub String);

/// Decodes a ground reference term (`ref`, `qref`, `mref`, `mqref`) into
/// its dotted names.
pub fn ref_names(t: &Term) -> Result<Vec<String>, NotARefTerm> {
    let bad = || NotARefTerm(t.to_string());
    let name = |t: &Term| match t {
        Term::App(s, args) if args.is_empty() && s.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) => {
            Ok(s.to_string())
        }
        _ => Err(bad()),
    };
    match t.as_app() {
        Some((f, [x])) if f == "ref" || f == "mref" => Ok(vec![name(x)?]),
        Some((f, [r, x])) if f == "qref" || f == "mqref" => {
            let mut out = module_names(r).map_err(|_| bad())?;
            out.push(name(x)?);
            Ok(out)
        }
        _ => Err(bad()),
    }
}

fn module_names(t: &Term) -> Result<Vec<String>, NotARefTerm> {
    match t.as_app() {
        Some((f, _)) if f == "mref" || f == "mqref" => ref_names(t),
        _ => Err(NotARefTerm(t.to_string())),
    }
}

pub fn pretty_ref(t: &Term) -> Result<String, NotARefTerm> {
    Ok(ref_names(t)?.join("."))
}

pub fn ref_to_ast(t: &Term) -> Result<LmRef, NotARefTerm> {
    Ok(LmRef::Path(ref_names(t)?))
}

fn write_ref(out: &mut String, r: &LmRef) {
    match r {
        LmRef::Path(ns) => out.push_str(&ns.join(".")),
        LmRef::Locked(k) => {
            let _ = write!(out, "[[{}#{}]]", k.name, k.ordinal);
        }
    }
}

fn write_expr(out: &mut String, e: &LmExpr, nested: bool) {
    match e {
        LmExpr::Num(n) => {
            let _ = write!(out, "{n}");
        }
        LmExpr::Ref(r) => write_ref(out, r),
        LmExpr::Add(a, b) => {
            if nested {
                out.push('(');
            }
            write_expr(out, a, false);
            out.push_str(" + ");
            write_expr(out, b, true);
            if nested {
                out.push(')');
            }
        }
    }
}

fn write_decls(out: &mut String, ds: &[LmDecl], indent: usize) {
    for d in ds {
        out.push_str(&"  ".repeat(indent));
        match d {
            LmDecl::Var { name, expr } => {
                let _ = write!(out, "var {name} = ");
                write_expr(out, expr, false);
                out.push('\n');
            }
            LmDecl::Mod { name, imports, members } => {
                let _ = writeln!(out, "mod {name} {{");
                for i in imports {
                    out.push_str(&"  ".repeat(indent + 1));
                    out.push_str("import ");
                    write_ref(out, i);
                    out.push_str("::*\n");
                }
                write_decls(out, members, indent + 1);
                out.push_str(&"  ".repeat(indent));
                out.push_str("}\n");
            }
        }
    }
}

pub fn pretty_program(p: &LmProgram) -> String {
    let mut out = String::new();
    write_decls(&mut out, &p.decls, 0);
    out
}

pub fn pretty_expr(e: &LmExpr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e, false);
    out
}
