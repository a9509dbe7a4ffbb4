use refsynth_core::solver::HoleId;
use refsynth_core::synthesis::{HoleSpec, LockedProgram};
use refsynth_core::{Constraint, Term, Var};

use crate::ast::{DeclKey, LmDecl, LmExpr, LmProgram, LmRef};

/// Identity token stored in a declaration's scope data.
pub fn decl_token(key: &DeclKey) -> Term {
    Term::app("did", vec![name(&key.name), Term::atom(&key.ordinal.to_string())])
}

fn name(x: &str) -> Term {
    Term::atom(x)
}

fn list(items: Vec<Term>) -> Term {
    items.into_iter().rev().fold(Term::atom("nil"), |tl, hd| Term::app("cons", vec![hd, tl]))
}

pub fn ref_term(names: &[String], as_module: bool) -> Term {
    let (leaf, ctor) = if as_module { ("mref", "mqref") } else { ("ref", "qref") };
    let (last, init) = names.split_last().expect("references have at least one name");
    if init.is_empty() {
        Term::app(leaf, vec![name(last)])
    } else {
        Term::app(ctor, vec![ref_term(init, true), name(last)])
    }
}

pub fn hole_var(i: usize) -> Var {
    Var::new(&format!("lock{i}"))
}

struct Encoder<'a> {
    keys: std::vec::IntoIter<DeclKey>,
    prog: &'a LmProgram,
    holes: Vec<HoleSpec>,
}

impl Encoder<'_> {
    fn reference(&mut self, r: &LmRef, as_module: bool) -> Term {
        match r {
            LmRef::Path(ns) => ref_term(ns, as_module),
            LmRef::Locked(k) => {
                let i = self.holes.len();
                let site = self.prog.locks.get(i);
                let name = match site {
                    Some(s) => format!("[[{k}]] at {}:{}", s.line, s.col),
                    None => format!("[[{k}]]"),
                };
                let var = hole_var(i);
                self.holes.push(HoleSpec { id: HoleId(i as u32), var: var.clone(), token: decl_token(k), name });
                Term::Var(var)
            }
        }
    }

    fn expr(&mut self, e: &LmExpr) -> Term {
        match e {
            LmExpr::Num(n) => Term::app("num", vec![Term::atom(&n.to_string())]),
            LmExpr::Add(a, b) => {
                let a = self.expr(a);
                Term::app("add", vec![a, self.expr(b)])
            }
            LmExpr::Ref(r) => self.reference(r, false),
        }
    }

    fn decls(&mut self, ds: &[LmDecl]) -> Term {
        let mut items = Vec::new();
        for d in ds {
            let key = self.keys.next().expect("one key per declaration");
            items.push(match d {
                LmDecl::Var { name: x, expr } => {
                    let e = self.expr(expr);
                    Term::app("var", vec![name(x), decl_token(&key), e])
                }
                LmDecl::Mod { name: a, imports, members } => {
                    let is: Vec<Term> =
                        imports.iter().map(|i| Term::app("import", vec![self.reference(i, true)])).collect();
                    let ms = self.decls(members);
                    Term::app("mod", vec![name(a), decl_token(&key), list(is), ms])
                }
            });
        }
        list(items)
    }
}

/// The program as a term, and each lock as a hole whose variable occupies
/// the lock's position.
pub fn encode(p: &LmProgram) -> (Term, Vec<HoleSpec>) {
    let mut enc = Encoder { keys: p.decl_keys().into_iter(), prog: p, holes: Vec::new() };
    let ds = enc.decls(&p.decls);
    (Term::app("prog", vec![ds]), enc.holes)
}

/// The initial goal `programOk(P)` with one hole per lock.
pub fn gen_constraint(p: &LmProgram) -> LockedProgram {
    let (t, holes) = encode(p);
    LockedProgram { goal: Constraint::pred("programOk", vec![t]), holes }
}
