//! The constraint language, equality-constraint evaluation and rule lookup.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::graph::{DataFilter, LabelOrder, ResolutionPath, ScopeGraph};
use crate::regex::{Label, LabelRegex};
use crate::spec::Specification;
use crate::term::{mgu, FreshRenamer, SetTerm, SetVar, Substitution, Sym, Term, Var};

/// Equality constraints: the fragment allowed inside query filters.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EqConstraint {
    Eq(Term, Term),
    DataOf(Term, Term),
    Conj(Box<EqConstraint>, Box<EqConstraint>),
    Exists(Var, Box<EqConstraint>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("clash: {0}")]
    Clash(String),
    #[error("scope argument of dataOf is not ground")]
    NotGround,
}

/// Evaluates an equality constraint against the graph's data.
pub fn eval_eq(g: &ScopeGraph, e: &EqConstraint) -> Result<Substitution, EvalError> {
    match e {
        EqConstraint::Eq(a, b) => mgu(a, b).map_err(|err| EvalError::Clash(err.to_string())),
        EqConstraint::DataOf(s, t) => {
            let s = normalize_term(s);
            let Term::Scope(sid) = s else {
                return Err(if s.is_ground() {
                    EvalError::Clash(format!("{s} is not a scope"))
                } else {
                    EvalError::NotGround
                });
            };
            let d = g.data(sid).ok_or_else(|| EvalError::Clash(format!("no data for {sid}")))?;
            mgu(t, d).map_err(|err| EvalError::Clash(err.to_string()))
        }
        EqConstraint::Conj(a, b) => {
            let t1 = eval_eq(g, a)?;
            let t2 = eval_eq(g, &b.subst(&t1))?;
            Ok(t1.compose(&t2))
        }
        EqConstraint::Exists(x, body) => {
            let y = Var::fresh(x.name());
            let body = body.subst(&Substitution::single(x.clone(), Term::Var(y)));
            eval_eq(g, &body)
        }
    }
}

fn without(theta: &Substitution, v: &Var) -> Option<Substitution> {
    theta.terms.contains_key(v).then(|| {
        let mut t = theta.clone();
        t.terms.remove(v);
        t
    })
}

fn without_set(theta: &Substitution, v: &SetVar) -> Option<Substitution> {
    theta.sets.contains_key(v).then(|| {
        let mut t = theta.clone();
        t.sets.remove(v);
        t
    })
}

/// Rewrites `tgt(p)` to the target scope once `p` is a path term.
pub fn normalize_term(t: &Term) -> Term {
    if !mentions_sym(t, "tgt") {
        return t.clone();
    }
    t.rewrite_apps(&|f, args| {
        if &**f == "tgt" && args.len() == 1 {
            ResolutionPath::from_term(&args[0]).map(|p| Term::Scope(p.target()))
        } else {
            None
        }
    })
}

pub fn mentions_sym(t: &Term, sym: &str) -> bool {
    match t {
        Term::App(f, args) => &**f == sym || args.iter().any(|a| mentions_sym(a, sym)),
        _ => false,
    }
}

fn subst_term(theta: &Substitution, t: &Term) -> Term {
    normalize_term(&theta.apply(t))
}

impl EqConstraint {
    pub fn subst(&self, theta: &Substitution) -> EqConstraint {
        match self {
            EqConstraint::Eq(a, b) => EqConstraint::Eq(subst_term(theta, a), subst_term(theta, b)),
            EqConstraint::DataOf(a, b) => EqConstraint::DataOf(subst_term(theta, a), subst_term(theta, b)),
            EqConstraint::Conj(a, b) => EqConstraint::Conj(Box::new(a.subst(theta)), Box::new(b.subst(theta))),
            EqConstraint::Exists(x, body) => match without(theta, x) {
                Some(t) => EqConstraint::Exists(x.clone(), Box::new(body.subst(&t))),
                None => EqConstraint::Exists(x.clone(), Box::new(body.subst(theta))),
            },
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.free_vars_into(&mut out);
        out
    }

    fn free_vars_into(&self, out: &mut BTreeSet<Var>) {
        match self {
            EqConstraint::Eq(a, b) | EqConstraint::DataOf(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            EqConstraint::Conj(a, b) => {
                a.free_vars_into(out);
                b.free_vars_into(out);
            }
            EqConstraint::Exists(x, body) => {
                let mut inner = BTreeSet::new();
                body.free_vars_into(&mut inner);
                inner.remove(x);
                out.extend(inner);
            }
        }
    }

    pub fn rename_all(&self, r: &mut FreshRenamer) -> EqConstraint {
        match self {
            EqConstraint::Eq(a, b) => EqConstraint::Eq(r.term(a), r.term(b)),
            EqConstraint::DataOf(a, b) => EqConstraint::DataOf(r.term(a), r.term(b)),
            EqConstraint::Conj(a, b) => EqConstraint::Conj(Box::new(a.rename_all(r)), Box::new(b.rename_all(r))),
            EqConstraint::Exists(x, body) => EqConstraint::Exists(r.var(x), Box::new(body.rename_all(r))),
        }
    }

    pub fn terms(&self, out: &mut Vec<Term>) {
        match self {
            EqConstraint::Eq(a, b) | EqConstraint::DataOf(a, b) => {
                out.push(a.clone());
                out.push(b.clone());
            }
            EqConstraint::Conj(a, b) => {
                a.terms(out);
                b.terms(out);
            }
            EqConstraint::Exists(_, body) => body.terms(out),
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, in_conj: bool) -> fmt::Result {
        match self {
            EqConstraint::Eq(a, b) => write!(f, "{a} = {b}"),
            EqConstraint::DataOf(a, b) => write!(f, "dataOf({a}, {b})"),
            EqConstraint::Conj(a, b) => {
                a.fmt_prec(f, true)?;
                write!(f, " * ")?;
                b.fmt_prec(f, false)
            }
            EqConstraint::Exists(x, body) => {
                if in_conj {
                    write!(f, "(")?;
                }
                write!(f, "exists {x}. ")?;
                body.fmt_prec(f, false)?;
                if in_conj {
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for EqConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, false)
    }
}

impl fmt::Debug for EqConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pred {
    pub symbol: Sym,
    pub args: Vec<Term>,
}

impl fmt::Display for Pred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.symbol)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Debug for Pred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Query {
    pub source: Term,
    pub regex: LabelRegex,
    pub filter: DataFilter,
    pub order: LabelOrder,
    pub result: SetVar,
    pub cont: Constraint,
}

impl fmt::Debug for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", Constraint::Query(Arc::new(self.clone())))
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constraint {
    Emp,
    False,
    Conj(Arc<Constraint>, Arc<Constraint>),
    Exists(Var, Arc<Constraint>),
    Single(Term, SetTerm),
    Forall(Var, SetTerm, Arc<Constraint>),
    NewScope(Term, Term),
    NewEdge(Term, Label, Term),
    Query(Arc<Query>),
    Eq(EqConstraint),
    Pred(Pred),
}

impl Constraint {
    pub fn conj(a: Constraint, b: Constraint) -> Constraint {
        Constraint::Conj(Arc::new(a), Arc::new(b))
    }

    pub fn conjs(items: impl IntoIterator<Item = Constraint>) -> Constraint {
        let v: Vec<Constraint> = items.into_iter().collect();
        v.into_iter().rev().reduce(|acc, c| Constraint::conj(c, acc)).unwrap_or(Constraint::Emp)
    }

    pub fn exists(vars: &[Var], body: Constraint) -> Constraint {
        vars.iter().rev().fold(body, |acc, v| Constraint::Exists(v.clone(), Arc::new(acc)))
    }

    pub fn pred(symbol: &str, args: Vec<Term>) -> Constraint {
        Constraint::Pred(Pred { symbol: Arc::from(symbol), args })
    }

    pub fn eq(a: Term, b: Term) -> Constraint {
        Constraint::Eq(EqConstraint::Eq(a, b))
    }

    pub fn as_pred(&self) -> Option<&Pred> {
        match self {
            Constraint::Pred(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_query(&self) -> Option<&Query> {
        match self {
            Constraint::Query(q) => Some(q),
            _ => None,
        }
    }

    pub fn subst(&self, theta: &Substitution) -> Constraint {
        if theta.is_empty() {
            return self.clone();
        }
        match self {
            Constraint::Emp | Constraint::False => self.clone(),
            Constraint::Conj(a, b) => Constraint::conj(a.subst(theta), b.subst(theta)),
            Constraint::Exists(x, body) => match without(theta, x) {
                Some(t) => Constraint::Exists(x.clone(), Arc::new(body.subst(&t))),
                None => Constraint::Exists(x.clone(), Arc::new(body.subst(theta))),
            },
            Constraint::Single(t, s) => Constraint::Single(subst_term(theta, t), subst_set(theta, s)),
            Constraint::Forall(x, s, body) => {
                let inner = without(theta, x);
                let th = inner.as_ref().unwrap_or(theta);
                Constraint::Forall(x.clone(), subst_set(theta, s), Arc::new(body.subst(th)))
            }
            Constraint::NewScope(s, d) => Constraint::NewScope(subst_term(theta, s), subst_term(theta, d)),
            Constraint::NewEdge(s, l, t) => Constraint::NewEdge(subst_term(theta, s), l.clone(), subst_term(theta, t)),
            Constraint::Query(q) => {
                let filter_theta = without(theta, &q.filter.binder);
                let filter = DataFilter {
                    binder: q.filter.binder.clone(),
                    body: q.filter.body.subst(filter_theta.as_ref().unwrap_or(theta)),
                };
                let cont_theta = without_set(theta, &q.result);
                Constraint::Query(Arc::new(Query {
                    source: subst_term(theta, &q.source),
                    regex: q.regex.clone(),
                    filter,
                    order: q.order.clone(),
                    result: q.result.clone(),
                    cont: q.cont.subst(cont_theta.as_ref().unwrap_or(theta)),
                }))
            }
            Constraint::Eq(e) => Constraint::Eq(e.subst(theta)),
            Constraint::Pred(p) => Constraint::Pred(Pred {
                symbol: p.symbol.clone(),
                args: p.args.iter().map(|a| subst_term(theta, a)).collect(),
            }),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.free_vars_into(&mut out);
        out
    }

    pub fn free_vars_into(&self, out: &mut BTreeSet<Var>) {
        match self {
            Constraint::Emp | Constraint::False => {}
            Constraint::Conj(a, b) => {
                a.free_vars_into(out);
                b.free_vars_into(out);
            }
            Constraint::Exists(x, body) => {
                let mut inner = BTreeSet::new();
                body.free_vars_into(&mut inner);
                inner.remove(x);
                out.extend(inner);
            }
            Constraint::Single(t, s) => {
                t.collect_vars(out);
                s.collect_vars(out);
            }
            Constraint::Forall(x, s, body) => {
                s.collect_vars(out);
                let mut inner = BTreeSet::new();
                body.free_vars_into(&mut inner);
                inner.remove(x);
                out.extend(inner);
            }
            Constraint::NewScope(s, d) => {
                s.collect_vars(out);
                d.collect_vars(out);
            }
            Constraint::NewEdge(s, _, t) => {
                s.collect_vars(out);
                t.collect_vars(out);
            }
            Constraint::Query(q) => {
                q.source.collect_vars(out);
                out.extend(q.filter.free_vars());
                q.cont.free_vars_into(out);
            }
            Constraint::Eq(e) => out.extend(e.free_vars()),
            Constraint::Pred(p) => p.args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    /// Renames every variable, bound ones included, to fresh names.
    pub fn rename_all(&self, r: &mut FreshRenamer) -> Constraint {
        match self {
            Constraint::Emp | Constraint::False => self.clone(),
            Constraint::Conj(a, b) => Constraint::conj(a.rename_all(r), b.rename_all(r)),
            Constraint::Exists(x, body) => Constraint::Exists(r.var(x), Arc::new(body.rename_all(r))),
            Constraint::Single(t, s) => Constraint::Single(r.term(t), rename_set(r, s)),
            Constraint::Forall(x, s, body) => {
                Constraint::Forall(r.var(x), rename_set(r, s), Arc::new(body.rename_all(r)))
            }
            Constraint::NewScope(s, d) => Constraint::NewScope(r.term(s), r.term(d)),
            Constraint::NewEdge(s, l, t) => Constraint::NewEdge(r.term(s), l.clone(), r.term(t)),
            Constraint::Query(q) => Constraint::Query(Arc::new(Query {
                source: r.term(&q.source),
                regex: q.regex.clone(),
                filter: DataFilter { binder: r.var(&q.filter.binder), body: q.filter.body.rename_all(r) },
                order: q.order.clone(),
                result: r.set_var(&q.result),
                cont: q.cont.rename_all(r),
            })),
            Constraint::Eq(e) => Constraint::Eq(e.rename_all(r)),
            Constraint::Pred(p) => Constraint::Pred(Pred {
                symbol: p.symbol.clone(),
                args: p.args.iter().map(|a| r.term(a)).collect(),
            }),
        }
    }

    /// Visits this constraint and all nested ones (query continuations,
    /// quantifier bodies, conjuncts).
    pub fn visit(&self, f: &mut impl FnMut(&Constraint)) {
        f(self);
        match self {
            Constraint::Conj(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Constraint::Exists(_, body) | Constraint::Forall(_, _, body) => body.visit(f),
            Constraint::Query(q) => q.cont.visit(f),
            _ => {}
        }
    }

    /// Every term occurring directly in this constraint or below.
    pub fn terms(&self) -> Vec<Term> {
        let mut out = Vec::new();
        self.visit(&mut |c| match c {
            Constraint::Single(t, s) => {
                out.push(t.clone());
                if let SetTerm::Lit(ts) = s {
                    out.extend(ts.iter().cloned());
                }
            }
            Constraint::Forall(_, SetTerm::Lit(ts), _) => out.extend(ts.iter().cloned()),
            Constraint::NewScope(s, d) => {
                out.push(s.clone());
                out.push(d.clone());
            }
            Constraint::NewEdge(s, _, t) => {
                out.push(s.clone());
                out.push(t.clone());
            }
            Constraint::Query(q) => {
                out.push(q.source.clone());
                q.filter.body.terms(&mut out);
            }
            Constraint::Eq(e) => e.terms(&mut out),
            Constraint::Pred(p) => out.extend(p.args.iter().cloned()),
            _ => {}
        });
        out
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, in_conj: bool) -> fmt::Result {
        let binder = matches!(self, Constraint::Exists(..) | Constraint::Forall(..) | Constraint::Query(_));
        if binder && in_conj {
            write!(f, "(")?;
            self.fmt_prec(f, false)?;
            return write!(f, ")");
        }
        match self {
            Constraint::Emp => write!(f, "emp"),
            Constraint::False => write!(f, "false"),
            Constraint::Conj(a, b) => {
                a.fmt_prec(f, true)?;
                write!(f, " * ")?;
                b.fmt_prec(f, false)
            }
            Constraint::Exists(x, body) => {
                write!(f, "exists {x}")?;
                let mut body = body;
                while let Constraint::Exists(y, inner) = &**body {
                    write!(f, " {y}")?;
                    body = inner;
                }
                write!(f, ". ")?;
                body.fmt_prec(f, false)
            }
            Constraint::Single(t, s) => write!(f, "single({t}, {s})"),
            Constraint::Forall(x, s, body) => {
                write!(f, "forall {x} in {s}. ")?;
                body.fmt_prec(f, false)
            }
            Constraint::NewScope(s, d) => write!(f, "new {s} -> {d}"),
            Constraint::NewEdge(s, l, t) => write!(f, "{s} -[{l}]-> {t}"),
            Constraint::Query(q) => {
                write!(f, "query {} regex {}", q.source, q.regex)?;
                if let Some(n) = &q.order.name {
                    write!(f, " order {n}")?;
                }
                write!(f, " filter ({}) => {} as {}. ", q.filter.binder, q.filter.body, q.result)?;
                q.cont.fmt_prec(f, false)
            }
            Constraint::Eq(e) => match e {
                EqConstraint::Conj(..) | EqConstraint::Exists(..) if in_conj => write!(f, "({e})"),
                _ => write!(f, "{e}"),
            },
            Constraint::Pred(p) => write!(f, "{p}"),
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, false)
    }
}

impl fmt::Debug for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

fn subst_set(theta: &Substitution, s: &SetTerm) -> SetTerm {
    match theta.apply_set(s) {
        SetTerm::Lit(ts) => SetTerm::Lit(ts.iter().map(normalize_term).collect()),
        v => v,
    }
}

fn rename_set(r: &mut FreshRenamer, s: &SetTerm) -> SetTerm {
    match s {
        SetTerm::Var(v) => SetTerm::Var(r.set_var(v)),
        SetTerm::Lit(ts) => SetTerm::Lit(ts.iter().map(|t| r.term(t)).collect()),
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Rule {
    pub name: String,
    pub head: Pred,
    pub body: Constraint,
}

impl fmt::Debug for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} <- {}", self.name, self.head, self.body)
    }
}

impl Rule {
    /// A copy with every variable renamed apart from everything else.
    pub fn freshen(&self) -> (Pred, Constraint) {
        let mut r = FreshRenamer::new();
        let head = Pred { symbol: self.head.symbol.clone(), args: self.head.args.iter().map(|a| r.term(a)).collect() };
        let body = self.body.rename_all(&mut r);
        (head, body)
    }
}

/// A rule whose freshly renamed head unifies with a goal.
#[derive(Clone, Debug)]
pub struct RuleMatch {
    pub rule: Arc<Rule>,
    pub body: Constraint,
    pub theta: Substitution,
}

/// Rules whose head unifies with `goal`, in declaration order.
pub fn matching_rules(spec: &Specification, goal: &Pred) -> Vec<RuleMatch> {
    spec.rules_for(&goal.symbol)
        .filter(|r| head_unifies(&r.head, goal))
        .filter_map(|r| {
            let (head, body) = r.freshen();
            crate::term::mgu_seq(&goal.args, &head.args)
                .ok()
                .map(|theta| RuleMatch { rule: r.clone(), body, theta })
        })
        .collect()
}

/// Source-level rule variables never contain `$` while every runtime variable
/// does, so the unrenamed head can be tested against a runtime goal directly.
/// Goals mentioning `$`-free variables are checked against a renamed head.
pub fn head_unifies(head: &Pred, goal: &Pred) -> bool {
    if head.symbol != goal.symbol {
        return false;
    }
    let runtime = goal.args.iter().all(|a| a.vars().iter().all(|v| v.name().contains('$')));
    if runtime {
        crate::term::mgu_seq(&goal.args, &head.args).is_ok()
    } else {
        let mut r = FreshRenamer::new();
        let renamed: Vec<Term> = head.args.iter().map(|a| r.term(a)).collect();
        crate::term::mgu_seq(&goal.args, &renamed).is_ok()
    }
}

pub fn count_matching(spec: &Specification, goal: &Pred) -> usize {
    spec.rules_for(&goal.symbol).filter(|r| head_unifies(&r.head, goal)).count()
}
