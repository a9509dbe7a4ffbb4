//! First-order terms, substitutions and syntactic unification.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use std::sync::Arc;

use thiserror::Error;

use crate::graph::ScopeId;
use crate::regex::Label;

pub type Sym = Arc<str>;

static FRESH: AtomicU64 = AtomicU64::new(0);

/// A logic variable. Names coming from specification files never contain `$`;
/// engine-generated names always do, so the two never collide.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub Sym);

impl Var {
    pub fn new(name: &str) -> Var {
        Var(Arc::from(name))
    }

    /// A variable no other part of the process has seen. Keeps the readable
    /// stem of `hint` and replaces any previous counter suffix.
    pub fn fresh(hint: &str) -> Var {
        let n = FRESH.fetch_add(1, AtomicOrdering::Relaxed);
        let stem = hint.split('$').next().unwrap_or("v");
        let stem = if stem.is_empty() { "v" } else { stem };
        Var(Arc::from(format!("{stem}${n}")))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?{}", self.0)
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?{}", self.0)
    }
}

/// A variable ranging over term sets (query results).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SetVar(pub Sym);

impl SetVar {
    pub fn new(name: &str) -> SetVar {
        SetVar(Arc::from(name))
    }

    pub fn fresh(hint: &str) -> SetVar {
        SetVar(Var::fresh(hint).0)
    }
}

impl fmt::Display for SetVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?{}", self.0)
    }
}

impl fmt::Debug for SetVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?{}", self.0)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(Var),
    App(Sym, Arc<[Term]>),
    Label(Label),
    Scope(ScopeId),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(Var::new(name))
    }

    pub fn app(sym: &str, args: Vec<Term>) -> Term {
        Term::App(Arc::from(sym), args.into())
    }

    pub fn atom(sym: &str) -> Term {
        Term::App(Arc::from(sym), Arc::from(Vec::new()))
    }

    pub fn as_var(&self) -> Option<&Var> {
        match self {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_scope(&self) -> Option<ScopeId> {
        match self {
            Term::Scope(s) => Some(*s),
            _ => None,
        }
    }

    pub fn as_app(&self) -> Option<(&str, &[Term])> {
        match self {
            Term::App(f, args) => Some((f, args)),
            _ => None,
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::App(_, args) => args.iter().all(Term::is_ground),
            _ => true,
        }
    }

    pub fn occurs(&self, v: &Var) -> bool {
        match self {
            Term::Var(w) => w == v,
            Term::App(_, args) => args.iter().any(|a| a.occurs(v)),
            _ => false,
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::App(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
            _ => {}
        }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_scopes(&self, out: &mut BTreeSet<ScopeId>) {
        match self {
            Term::Scope(s) => {
                out.insert(*s);
            }
            Term::App(_, args) => args.iter().for_each(|a| a.collect_scopes(out)),
            _ => {}
        }
    }

    /// Does `needle` occur as a subterm?
    pub fn contains(&self, needle: &Term) -> bool {
        if self == needle {
            return true;
        }
        match self {
            Term::App(_, args) => args.iter().any(|a| a.contains(needle)),
            _ => false,
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Term::App(_, args) => 1 + args.iter().map(Term::size).sum::<usize>(),
            _ => 1,
        }
    }

    /// Applies `f` bottom-up to every variable; `None` keeps the variable.
    pub fn map_vars(&self, f: &mut impl FnMut(&Var) -> Option<Term>) -> Term {
        match self {
            Term::Var(v) => f(v).unwrap_or_else(|| self.clone()),
            Term::App(sym, args) => {
                let mut changed = false;
                let new: Vec<Term> = args
                    .iter()
                    .map(|a| {
                        let b = a.map_vars(f);
                        changed |= &b != a;
                        b
                    })
                    .collect();
                if changed {
                    Term::App(sym.clone(), new.into())
                } else {
                    self.clone()
                }
            }
            _ => self.clone(),
        }
    }

    /// Bottom-up rewrite of application nodes.
    pub fn rewrite_apps(&self, f: &impl Fn(&Sym, &[Term]) -> Option<Term>) -> Term {
        match self {
            Term::App(sym, args) => {
                let new: Vec<Term> = args.iter().map(|a| a.rewrite_apps(f)).collect();
                f(sym, &new).unwrap_or_else(|| Term::App(sym.clone(), new.into()))
            }
            _ => self.clone(),
        }
    }

    pub fn parse(src: &str) -> Result<Term, TermParseError> {
        let mut p = TermParser::new(src);
        let t = p.term()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(p.err("trailing input"));
        }
        Ok(t)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Label(l) => write!(f, "#{l}"),
            Term::Scope(s) => write!(f, "{s}"),
            Term::App(sym, args) => {
                write!(f, "{sym}")?;
                if !args.is_empty() {
                    write!(f, "(")?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            write!(f, ", ")?;
                        }
                        write!(f, "{a}")?;
                    }
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SetTerm {
    Var(SetVar),
    Lit(Vec<Term>),
}

impl fmt::Display for SetTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetTerm::Var(v) => write!(f, "{v}"),
            SetTerm::Lit(ts) => {
                write!(f, "{{")?;
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

impl fmt::Debug for SetTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl SetTerm {
    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        if let SetTerm::Lit(ts) = self {
            ts.iter().for_each(|t| t.collect_vars(out));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnifyError {
    #[error("cannot unify {0} with {1}")]
    Clash(Term, Term),
    #[error("occurs check: {0} in {1}")]
    Occurs(Var, Term),
    #[error("arity mismatch")]
    Arity,
}

/// Idempotent once built by [`mgu`]; `apply` still chases bindings so a
/// hand-built triangular substitution behaves the same.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Substitution {
    pub terms: BTreeMap<Var, Term>,
    pub sets: BTreeMap<SetVar, SetTerm>,
}

impl fmt::Debug for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        let mut first = true;
        for (v, t) in &self.terms {
            if !first {
                write!(f, ", ")?;
            }
            first = false;
            write!(f, "{v} ↦ {t}")?;
        }
        for (v, t) in &self.sets {
            if !first {
                write!(f, ", ")?;
            }
            first = false;
            write!(f, "{v} ↦ {t}")?;
        }
        write!(f, "}}")
    }
}

impl Substitution {
    pub fn new() -> Substitution {
        Substitution::default()
    }

    pub fn single(v: Var, t: Term) -> Substitution {
        let mut s = Substitution::new();
        s.terms.insert(v, t);
        s
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty() && self.sets.is_empty()
    }

    pub fn get(&self, v: &Var) -> Option<&Term> {
        self.terms.get(v)
    }

    pub fn apply(&self, t: &Term) -> Term {
        if self.terms.is_empty() {
            return t.clone();
        }
        t.map_vars(&mut |v| self.terms.get(v).map(|b| self.apply(b)))
    }

    /// Simultaneous application without chasing. This is the reading for
    /// results of [`match_term`], whose range may mention its domain.
    pub fn apply_once(&self, t: &Term) -> Term {
        t.map_vars(&mut |v| self.terms.get(v).cloned())
    }

    pub fn apply_set(&self, s: &SetTerm) -> SetTerm {
        match s {
            SetTerm::Var(v) => match self.sets.get(v) {
                Some(b) if b != s => self.apply_set(b),
                _ => s.clone(),
            },
            SetTerm::Lit(ts) => SetTerm::Lit(ts.iter().map(|t| self.apply(t)).collect()),
        }
    }

    /// Binds `v`, keeping the substitution idempotent. Caller guarantees the
    /// occurs check.
    fn bind(&mut self, v: Var, t: Term) {
        let single = Substitution::single(v.clone(), t.clone());
        for b in self.terms.values_mut() {
            if b.occurs(&v) {
                *b = single.apply(b);
            }
        }
        self.terms.insert(v, t);
    }

    /// Unifies `a` and `b` under the current bindings, extending `self`.
    pub fn unify(&mut self, a: &Term, b: &Term) -> Result<(), UnifyError> {
        let mut work = vec![(a.clone(), b.clone())];
        while let Some((x, y)) = work.pop() {
            let x = self.apply(&x);
            let y = self.apply(&y);
            if x == y {
                continue;
            }
            match (&x, &y) {
                (Term::Var(v), _) => {
                    if y.occurs(v) {
                        return Err(UnifyError::Occurs(v.clone(), y));
                    }
                    self.bind(v.clone(), y);
                }
                (_, Term::Var(v)) => {
                    if x.occurs(v) {
                        return Err(UnifyError::Occurs(v.clone(), x));
                    }
                    self.bind(v.clone(), x);
                }
                (Term::App(f, xs), Term::App(g, ys)) => {
                    if f != g || xs.len() != ys.len() {
                        return Err(UnifyError::Clash(x.clone(), y.clone()));
                    }
                    for (p, q) in xs.iter().zip(ys.iter()).rev() {
                        work.push((p.clone(), q.clone()));
                    }
                }
                _ => return Err(UnifyError::Clash(x.clone(), y.clone())),
            }
        }
        Ok(())
    }

    /// `apply(compose(a, b), t) == apply(b, apply(a, t))`.
    pub fn compose(&self, later: &Substitution) -> Substitution {
        let mut out = Substitution::new();
        for (v, t) in &self.terms {
            out.terms.insert(v.clone(), later.apply(t));
        }
        for (v, t) in &later.terms {
            out.terms.entry(v.clone()).or_insert_with(|| t.clone());
        }
        for (v, s) in &self.sets {
            out.sets.insert(v.clone(), later.apply_set(s));
        }
        for (v, s) in &later.sets {
            out.sets.entry(v.clone()).or_insert_with(|| s.clone());
        }
        out.terms.retain(|v, t| t.as_var() != Some(v));
        out
    }

    pub fn domain(&self) -> impl Iterator<Item = &Var> {
        self.terms.keys()
    }

    /// A bijective variable-to-variable substitution (or empty)?
    pub fn is_renaming(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.terms
            .values()
            .all(|t| matches!(t, Term::Var(v) if seen.insert(v.clone())))
    }
}

pub fn mgu(a: &Term, b: &Term) -> Result<Substitution, UnifyError> {
    let mut s = Substitution::new();
    s.unify(a, b)?;
    Ok(s)
}

pub fn mgu_seq(xs: &[Term], ys: &[Term]) -> Result<Substitution, UnifyError> {
    if xs.len() != ys.len() {
        return Err(UnifyError::Arity);
    }
    let mut s = Substitution::new();
    for (x, y) in xs.iter().zip(ys) {
        s.unify(x, y)?;
    }
    Ok(s)
}

/// One-way matching: a θ with `θ(pattern) == target`, binding only pattern
/// variables. Apply it with [`Substitution::apply_once`]: pattern and target
/// may share variables, so the result need not be idempotent.
pub fn match_term(pattern: &Term, target: &Term) -> Option<Substitution> {
    fn go(p: &Term, t: &Term, acc: &mut BTreeMap<Var, Term>) -> bool {
        match (p, t) {
            (Term::Var(v), _) => match acc.get(v) {
                Some(b) => b == t,
                None => {
                    acc.insert(v.clone(), t.clone());
                    true
                }
            },
            (Term::App(f, xs), Term::App(g, ys)) => {
                f == g && xs.len() == ys.len() && xs.iter().zip(ys.iter()).all(|(x, y)| go(x, y, acc))
            }
            _ => p == t,
        }
    }
    let mut acc = BTreeMap::new();
    go(pattern, target, &mut acc).then(|| Substitution { terms: acc, sets: BTreeMap::new() })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("term syntax error at byte {pos}: {msg}")]
pub struct TermParseError {
    pub pos: usize,
    pub msg: String,
}

struct TermParser<'a> {
    src: &'a [u8],
    text: &'a str,
    pos: usize,
}

pub(crate) fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'$' || b == b'\''
}

impl<'a> TermParser<'a> {
    fn new(text: &'a str) -> Self {
        TermParser { src: text.as_bytes(), text, pos: 0 }
    }

    fn err(&self, msg: &str) -> TermParseError {
        TermParseError { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn ident(&mut self) -> &'a str {
        let start = self.pos;
        while self.pos < self.src.len() && is_ident_byte(self.src[self.pos]) {
            self.pos += 1;
        }
        &self.text[start..self.pos]
    }

    fn term(&mut self) -> Result<Term, TermParseError> {
        self.skip_ws();
        match self.src.get(self.pos) {
            Some(b'?') => {
                self.pos += 1;
                let name = self.ident();
                if name.is_empty() {
                    return Err(self.err("variable name expected"));
                }
                Ok(Term::var(name))
            }
            Some(b'#') => {
                self.pos += 1;
                let name = self.ident();
                if name.is_empty() {
                    return Err(self.err("label expected"));
                }
                Ok(Term::Label(Label::new(name)))
            }
            Some(b'$') => {
                self.pos += 1;
                if self.src.get(self.pos) == Some(&b's') {
                    self.pos += 1;
                }
                let n = self.ident();
                n.parse::<u32>().map(|n| Term::Scope(ScopeId(n))).map_err(|_| self.err("scope id expected"))
            }
            Some(_) => {
                let name = self.ident();
                if name.is_empty() {
                    return Err(self.err("term expected"));
                }
                let mut args = Vec::new();
                self.skip_ws();
                if self.src.get(self.pos) == Some(&b'(') {
                    self.pos += 1;
                    self.skip_ws();
                    if self.src.get(self.pos) == Some(&b')') {
                        self.pos += 1;
                    } else {
                        loop {
                            args.push(self.term()?);
                            self.skip_ws();
                            match self.src.get(self.pos) {
                                Some(b',') => self.pos += 1,
                                Some(b')') => {
                                    self.pos += 1;
                                    break;
                                }
                                _ => return Err(self.err("expected ',' or ')'")),
                            }
                        }
                    }
                }
                Ok(Term::app(name, args))
            }
            None => Err(self.err("unexpected end of input")),
        }
    }
}

pub struct FreshRenamer {
    pub map: BTreeMap<Var, Var>,
    pub sets: BTreeMap<SetVar, SetVar>,
}

impl FreshRenamer {
    pub fn new() -> Self {
        FreshRenamer { map: BTreeMap::new(), sets: BTreeMap::new() }
    }

    pub fn var(&mut self, v: &Var) -> Var {
        self.map.entry(v.clone()).or_insert_with(|| Var::fresh(v.name())).clone()
    }

    pub fn set_var(&mut self, v: &SetVar) -> SetVar {
        self.sets.entry(v.clone()).or_insert_with(|| SetVar::fresh(&v.0)).clone()
    }

    pub fn term(&mut self, t: &Term) -> Term {
        t.map_vars(&mut |v| Some(Term::Var(self.var(v))))
    }
}

impl Default for FreshRenamer {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Term {
        Term::parse(s).unwrap()
    }

    #[test]
    fn mgu_binds_both_sides() {
        let s = mgu(&t("f(?x, b)"), &t("f(a, ?y)")).unwrap();
        assert_eq!(s.get(&Var::new("x")), Some(&t("a")));
        assert_eq!(s.get(&Var::new("y")), Some(&t("b")));
        assert_eq!(s.terms.len(), 2);
    }

    #[test]
    fn occurs_check() {
        assert!(matches!(mgu(&t("?x"), &t("f(?x)")), Err(UnifyError::Occurs(..))));
    }

    #[test]
    fn clash() {
        assert!(matches!(mgu(&t("f(a)"), &t("g(a)")), Err(UnifyError::Clash(..))));
        assert!(mgu(&t("f(a)"), &t("f(a, b)")).is_err());
    }

    #[test]
    fn nullary_with_or_without_parens() {
        assert_eq!(t("int()"), t("int"));
        assert_eq!(t("int").to_string(), "int");
        assert_eq!(t("42").to_string(), "42");
    }

    #[test]
    fn display_round_trip() {
        for s in ["decl(x, ?T$3, did(x, 1))", "step(path($s1), #LEX, $s0)", "?v", "nil"] {
            assert_eq!(t(s).to_string(), s);
        }
    }

    #[test]
    fn compose_applies_in_order() {
        let a = Substitution::single(Var::new("x"), t("f(?y)"));
        let b = Substitution::single(Var::new("y"), t("c"));
        let c = a.compose(&b);
        assert_eq!(c.apply(&t("g(?x, ?y)")), t("g(f(c), c)"));
    }

    #[test]
    fn triangular_chains_resolve() {
        let mut s = Substitution::new();
        s.terms.insert(Var::new("x"), t("?y"));
        s.terms.insert(Var::new("y"), t("z"));
        assert_eq!(s.apply(&t("?x")), t("z"));
    }

    #[test]
    fn fresh_is_unique() {
        let a = Var::fresh("s");
        let b = Var::fresh("s");
        assert_ne!(a, b);
        assert!(a.name().starts_with("s$"));
        let c = Var::fresh(b.name());
        assert!(c.name().starts_with("s$"));
    }

    #[test]
    fn matching_is_one_way() {
        let s = match_term(&t("qref(?a, x)"), &t("qref(mref(A), x)")).unwrap();
        assert_eq!(s.get(&Var::new("a")), Some(&t("mref(A)")));
        assert!(match_term(&t("qref(mref(A), x)"), &t("qref(?a, x)")).is_none());
    }
}
