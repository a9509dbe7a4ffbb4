//! Small-step constraint solving over configurations ⟨G, C, U, H⟩.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::constraint::{count_matching, matching_rules, mentions_sym, Constraint, EqConstraint, Pred};
use crate::graph::{DataFilter, LabelOrder, PotentialEdge, ResolutionPath, ScopeGraph, ScopeId};
use crate::regex::{Label, LabelRegex};
use crate::spec::Specification;
use crate::term::{mgu, SetTerm, Substitution, Sym, Term, Var};

pub const DEFAULT_FUEL: usize = 100_000;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HoleId(pub u32);

impl fmt::Display for HoleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "h{}", self.0)
    }
}

impl fmt::Debug for HoleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "h{}", self.0)
    }
}

/// Composite path (first scope is where the reference sits once complete)
/// and the reference term built so far.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HoleState {
    pub path: Vec<ScopeId>,
    pub term: Term,
}

impl HoleState {
    pub fn target(&self) -> ScopeId {
        *self.path.last().expect("hole path is never empty")
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Pending {
    pub age: u64,
    pub constraint: Arc<Constraint>,
}

impl fmt::Debug for Pending {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.age, self.constraint)
    }
}

/// A query answered by Op-Query, kept so composite paths can be checked
/// against the queries that produced them.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SolvedQuery {
    pub source: ScopeId,
    pub regex: LabelRegex,
    pub filter: DataFilter,
    pub order: LabelOrder,
    pub answers: Vec<ResolutionPath>,
}

#[derive(Clone, Default, PartialEq, Eq)]
pub struct Configuration {
    pub graph: ScopeGraph,
    pub constraints: im::Vector<Pending>,
    pub holes: im::OrdMap<Var, HoleId>,
    pub hole_states: im::OrdMap<HoleId, HoleState>,
    pub solved: im::Vector<Arc<SolvedQuery>>,
    pub next_age: u64,
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:?}", self.graph)?;
        for p in &self.constraints {
            writeln!(f, "  {p:?}")?;
        }
        for (v, h) in &self.holes {
            writeln!(f, "  U: {v} ↦ {h}")?;
        }
        for (h, st) in &self.hole_states {
            writeln!(f, "  H: {h} ↦ ({:?}, {})", st.path, st.term)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("U[t/x] undefined: {var} would join holes {a} and {b}")]
pub struct Incoherent {
    pub var: Var,
    pub a: HoleId,
    pub b: HoleId,
}

impl Configuration {
    pub fn new(goal: Constraint) -> Configuration {
        let mut k = Configuration::default();
        k.push(goal);
        k
    }

    pub fn push(&mut self, c: Constraint) {
        let age = self.fresh_age();
        self.constraints.push_back(Pending { age, constraint: Arc::new(c) });
    }

    pub fn fresh_age(&mut self) -> u64 {
        let a = self.next_age;
        self.next_age += 1;
        a
    }

    pub fn constraint(&self, i: usize) -> &Constraint {
        &self.constraints[i].constraint
    }

    pub fn replace(&mut self, i: usize, with: Vec<Constraint>, age: u64) {
        self.constraints.remove(i);
        for (j, c) in with.into_iter().enumerate() {
            self.constraints.insert(i + j, Pending { age, constraint: Arc::new(c) });
        }
    }

    pub fn hole_of(&self, v: &Var) -> Option<HoleId> {
        self.holes.get(v).copied()
    }

    /// Variables U maps to `h`.
    pub fn hole_vars(&self, h: HoleId) -> BTreeSet<Var> {
        self.holes.iter().filter(|(_, g)| **g == h).map(|(v, _)| v.clone()).collect()
    }

    /// Applies θ everywhere and updates U as U[t/x] for each binding.
    pub fn apply(&mut self, theta: &Substitution) -> Result<(), Incoherent> {
        if theta.is_empty() {
            return Ok(());
        }
        for (x, t) in &theta.terms {
            let Some(h) = self.holes.remove(x) else { continue };
            for v in t.vars() {
                match self.holes.get(&v) {
                    Some(g) if *g != h => return Err(Incoherent { var: v, a: h, b: *g }),
                    _ => {
                        self.holes.insert(v, h);
                    }
                }
            }
        }
        self.graph.apply(theta);
        let dom: BTreeSet<&Var> = theta.terms.keys().collect();
        for i in 0..self.constraints.len() {
            let p = &self.constraints[i];
            if !mentions_any(&p.constraint, &dom) && theta.sets.is_empty() {
                continue;
            }
            let c = p.constraint.subst(theta);
            let age = p.age;
            self.constraints.set(i, Pending { age, constraint: Arc::new(c) });
        }
        let hs: Vec<(HoleId, HoleState)> = self.hole_states.iter().map(|(h, s)| (*h, s.clone())).collect();
        for (h, mut st) in hs {
            let nt = theta.apply(&st.term);
            if nt != st.term {
                st.term = nt;
                self.hole_states.insert(h, st);
            }
        }
        Ok(())
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        for p in &self.constraints {
            p.constraint.free_vars_into(&mut out);
        }
        out
    }
}

fn mentions_any(c: &Constraint, dom: &BTreeSet<&Var>) -> bool {
    c.terms().iter().any(|t| t.vars().iter().any(|v| dom.contains(v)))
        || matches!(c, Constraint::Query(q) if q.filter.body.free_vars().iter().any(|v| dom.contains(v)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintFailure {
    pub constraint: Arc<Constraint>,
    pub reason: String,
}

impl fmt::Display for ConstraintFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.constraint, self.reason)
    }
}

#[derive(Debug, Clone)]
pub struct StepInfo {
    pub rule: &'static str,
    pub index: usize,
    pub constraint: Arc<Constraint>,
}

#[derive(Debug, Clone)]
pub enum StepOutcome {
    Progressed(Configuration, StepInfo),
    Failed(ConstraintFailure),
    Stuck,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveStatus {
    Success,
    Failure(ConstraintFailure),
    Stuck,
    FuelExhausted,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub configuration: Configuration,
    pub steps: usize,
}

/// First progressable constraint in list order.
pub fn step(spec: &Specification, k: &Configuration) -> StepOutcome {
    for i in 0..k.constraints.len() {
        match try_at(spec, k, i) {
            None => continue,
            Some(Ok((k2, info))) => return StepOutcome::Progressed(k2, info),
            Some(Err(f)) => return StepOutcome::Failed(f),
        }
    }
    StepOutcome::Stuck
}

type Attempt = Option<Result<(Configuration, StepInfo), ConstraintFailure>>;

fn fail(c: &Arc<Constraint>, reason: impl Into<String>) -> Attempt {
    Some(Err(ConstraintFailure { constraint: c.clone(), reason: reason.into() }))
}

/// Tries to rewrite the constraint at position `i`; `None` when it is stuck.
pub fn try_at(spec: &Specification, k: &Configuration, i: usize) -> Attempt {
    let p = &k.constraints[i];
    let c = &p.constraint;
    let done = |k2: Configuration, rule: &'static str| Some(Ok((k2, StepInfo { rule, index: i, constraint: c.clone() })));
    match &**c {
        Constraint::Emp => {
            let mut k2 = k.clone();
            k2.replace(i, vec![], p.age);
            done(k2, "Op-True")
        }
        Constraint::False => fail(c, "false"),
        Constraint::Conj(a, b) => {
            let mut k2 = k.clone();
            k2.replace(i, vec![(**a).clone(), (**b).clone()], p.age);
            done(k2, "Op-Conj")
        }
        Constraint::Exists(x, body) => {
            let y = Var::fresh(x.name());
            let body = body.subst(&Substitution::single(x.clone(), Term::Var(y)));
            let mut k2 = k.clone();
            k2.replace(i, vec![body], p.age);
            done(k2, "Op-Exists")
        }
        Constraint::Eq(e) => match e {
            EqConstraint::Eq(a, b) => {
                if mentions_sym(a, "tgt") || mentions_sym(b, "tgt") {
                    return None;
                }
                match mgu(a, b) {
                    Ok(theta) => {
                        let mut k2 = k.clone();
                        k2.replace(i, vec![], p.age);
                        match k2.apply(&theta) {
                            Ok(()) => done(k2, "Op-Eq"),
                            Err(inc) => fail(c, inc.to_string()),
                        }
                    }
                    Err(err) => fail(c, err.to_string()),
                }
            }
            EqConstraint::DataOf(s, t) => match s {
                Term::Scope(sid) => match k.graph.data(*sid) {
                    Some(d) => {
                        let d = d.clone();
                        let mut k2 = k.clone();
                        k2.replace(i, vec![Constraint::eq(t.clone(), d)], p.age);
                        done(k2, "Op-Data")
                    }
                    None => fail(c, format!("unknown scope {sid}")),
                },
                s if s.is_ground() => fail(c, "dataOf on a non-scope"),
                _ => None,
            },
            EqConstraint::Conj(a, b) => {
                let mut k2 = k.clone();
                k2.replace(i, vec![Constraint::Eq((**a).clone()), Constraint::Eq((**b).clone())], p.age);
                done(k2, "Op-Conj")
            }
            EqConstraint::Exists(x, body) => {
                let y = Var::fresh(x.name());
                let body = body.subst(&Substitution::single(x.clone(), Term::Var(y)));
                let mut k2 = k.clone();
                k2.replace(i, vec![Constraint::Eq(body)], p.age);
                done(k2, "Op-Exists")
            }
        },
        Constraint::Single(t, s) => match s {
            SetTerm::Lit(ts) if ts.len() == 1 => {
                let mut k2 = k.clone();
                k2.replace(i, vec![Constraint::eq(t.clone(), ts[0].clone())], p.age);
                done(k2, "Op-Singleton")
            }
            SetTerm::Lit(ts) => fail(c, format!("expected exactly one answer, found {}", ts.len())),
            SetTerm::Var(_) => None,
        },
        Constraint::Forall(x, s, body) => match s {
            SetTerm::Lit(ts) => {
                let parts: Vec<Constraint> =
                    ts.iter().map(|t| body.subst(&Substitution::single(x.clone(), t.clone()))).collect();
                let mut k2 = k.clone();
                k2.replace(i, vec![Constraint::conjs(parts)], p.age);
                done(k2, "Op-Forall")
            }
            SetTerm::Var(_) => None,
        },
        Constraint::NewScope(v, d) => match v {
            Term::Var(x) => {
                let mut k2 = k.clone();
                let s = k2.graph.add_scope(d.clone());
                k2.replace(i, vec![], p.age);
                match k2.apply(&Substitution::single(x.clone(), Term::Scope(s))) {
                    Ok(()) => done(k2, "Op-New-Scope"),
                    Err(inc) => fail(c, inc.to_string()),
                }
            }
            _ => fail(c, "scope variable already bound"),
        },
        Constraint::NewEdge(s, l, t) => match (s, t) {
            (Term::Scope(a), Term::Scope(b)) => {
                let mut k2 = k.clone();
                if let Err(e) = k2.graph.add_edge(*a, l.clone(), *b) {
                    return fail(c, e.to_string());
                }
                k2.replace(i, vec![], p.age);
                done(k2, "Op-New-Edge")
            }
            (s, t) if (s.is_ground() && s.as_scope().is_none()) || (t.is_ground() && t.as_scope().is_none()) => {
                fail(c, "edge endpoint is not a scope")
            }
            _ => None,
        },
        Constraint::Query(q) => {
            let src = match &q.source {
                Term::Scope(s) => *s,
                s if s.is_ground() => return fail(c, "query source is not a scope"),
                _ => return None,
            };
            if !q.filter.free_vars().is_empty() {
                return None;
            }
            if !guard(spec, k, i) {
                return None;
            }
            let answers = k.graph.resolve(src, &q.regex, &q.filter, &q.order);
            let set: Vec<Term> = answers
                .iter()
                .map(|p| Term::app("ans", vec![p.to_term(), k.graph.data(p.target()).cloned().unwrap()]))
                .collect();
            let mut theta = Substitution::new();
            theta.sets.insert(q.result.clone(), SetTerm::Lit(set));
            let cont = q.cont.subst(&theta);
            let mut k2 = k.clone();
            k2.replace(i, vec![cont], p.age);
            k2.solved.push_back(Arc::new(SolvedQuery {
                source: src,
                regex: q.regex.clone(),
                filter: q.filter.clone(),
                order: q.order.clone(),
                answers,
            }));
            done(k2, "Op-Query")
        }
        Constraint::Pred(goal) => match count_matching(spec, goal) {
            0 => fail(c, "no rule matches"),
            1 => {
                let m = matching_rules(spec, goal).pop().expect("one matching rule");
                let mut k2 = k.clone();
                let age = k2.fresh_age();
                k2.replace(i, vec![m.body], age);
                match k2.apply(&m.theta) {
                    Ok(()) => done(k2, "Op-Pred"),
                    Err(inc) => fail(c, inc.to_string()),
                }
            }
            _ => None,
        },
    }
}

pub fn solve_exhaustively(spec: &Specification, k: &Configuration, fuel: usize) -> SolveResult {
    solve_traced(spec, k, fuel, &mut |_, _| {})
}

/// Sweeps the constraint list front to back, rewriting in place, until a full
/// sweep makes no progress.
pub fn solve_traced(
    spec: &Specification,
    k: &Configuration,
    fuel: usize,
    trace: &mut dyn FnMut(&StepInfo, &Configuration),
) -> SolveResult {
    let mut k = k.clone();
    let mut steps = 0;
    loop {
        let mut progressed = false;
        let mut i = 0;
        while i < k.constraints.len() {
            match try_at(spec, &k, i) {
                None => i += 1,
                Some(Ok((k2, info))) => {
                    if steps >= fuel {
                        return SolveResult { status: SolveStatus::FuelExhausted, configuration: k, steps };
                    }
                    steps += 1;
                    trace(&info, &k2);
                    k = k2;
                    progressed = true;
                }
                Some(Err(f)) => return SolveResult { status: SolveStatus::Failure(f), configuration: k, steps },
            }
        }
        if !progressed {
            break;
        }
    }
    let status = if k.constraints.is_empty() { SolveStatus::Success } else { SolveStatus::Stuck };
    SolveResult { status, configuration: k, steps }
}

/// Like [`solve_exhaustively`], but `pick(n)` chooses which of the `n`
/// currently progressable constraints to rewrite next.
pub fn solve_with(
    spec: &Specification,
    k: &Configuration,
    fuel: usize,
    pick: &mut dyn FnMut(usize) -> usize,
) -> SolveResult {
    let mut k = k.clone();
    let mut steps = 0;
    loop {
        let mut options = Vec::new();
        for i in 0..k.constraints.len() {
            match try_at(spec, &k, i) {
                None => {}
                Some(Ok((k2, _))) => options.push(k2),
                Some(Err(f)) => return SolveResult { status: SolveStatus::Failure(f), configuration: k, steps },
            }
        }
        if options.is_empty() {
            break;
        }
        if steps >= fuel {
            return SolveResult { status: SolveStatus::FuelExhausted, configuration: k, steps };
        }
        let n = options.len();
        k = options.swap_remove(pick(n) % n);
        steps += 1;
    }
    let status = if k.constraints.is_empty() { SolveStatus::Success } else { SolveStatus::Stuck };
    SolveResult { status, configuration: k, steps }
}

/// Where a predicate may add edges: a head argument or an unknown scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FootSrc {
    Arg(usize),
    Unknown,
}

pub type Footprint = BTreeSet<(FootSrc, Label)>;

/// Least fixpoint of per-predicate edge footprints over all rules.
pub fn footprints(spec: &Specification) -> BTreeMap<Sym, Footprint> {
    let mut fp: BTreeMap<Sym, Footprint> = spec.predicates.keys().map(|p| (p.clone(), Footprint::new())).collect();
    loop {
        let mut changed = false;
        for r in &spec.rules {
            let mut news = BTreeSet::new();
            r.body.visit(&mut |c| {
                if let Constraint::NewScope(Term::Var(v), _) = c {
                    news.insert(v.clone());
                }
            });
            let classify = |t: &Term| -> Option<FootSrc> {
                match t {
                    Term::Var(v) if news.contains(v) => None,
                    Term::Var(v) => Some(
                        r.head
                            .args
                            .iter()
                            .position(|a| a.as_var() == Some(v))
                            .map(FootSrc::Arg)
                            .unwrap_or(FootSrc::Unknown),
                    ),
                    _ => Some(FootSrc::Unknown),
                }
            };
            let mut add = Footprint::new();
            r.body.visit(&mut |c| match c {
                Constraint::NewEdge(s, l, _) => {
                    if let Some(src) = classify(s) {
                        add.insert((src, l.clone()));
                    }
                }
                Constraint::Pred(p) => {
                    for (src, l) in fp.get(&p.symbol).into_iter().flatten() {
                        let src = match src {
                            FootSrc::Arg(j) => p.args.get(*j).and_then(&classify),
                            FootSrc::Unknown => Some(FootSrc::Unknown),
                        };
                        if let Some(src) = src {
                            add.insert((src, l.clone()));
                        }
                    }
                }
                _ => {}
            });
            let entry = fp.get_mut(&r.head.symbol).expect("declared predicate");
            for e in add {
                changed |= entry.insert(e);
            }
        }
        if !changed {
            return fp;
        }
    }
}

/// Edges a single pending constraint may still add.
pub fn constraint_potential_edges(spec: &Specification, c: &Constraint, out: &mut BTreeSet<PotentialEdge>) {
    c.visit(&mut |c| match c {
        Constraint::NewEdge(s, l, _) => {
            out.insert(PotentialEdge { source: s.as_scope(), label: l.clone() });
        }
        Constraint::Pred(p) => {
            for (src, l) in spec.footprint(&p.symbol).into_iter().flatten() {
                let source = match src {
                    FootSrc::Arg(j) => p.args.get(*j).and_then(Term::as_scope),
                    FootSrc::Unknown => None,
                };
                out.insert(PotentialEdge { source, label: l.clone() });
            }
        }
        _ => {}
    });
}

/// Edges that pending constraints (other than `exclude`) may still add.
pub fn potential_edges(spec: &Specification, k: &Configuration, exclude: Option<usize>) -> BTreeSet<PotentialEdge> {
    let mut out = BTreeSet::new();
    for (i, p) in k.constraints.iter().enumerate() {
        if Some(i) != exclude {
            constraint_potential_edges(spec, &p.constraint, &mut out);
        }
    }
    out
}

/// Can the query at `i` be answered now? It must not be able to extend
/// through any edge other pending constraints may still add.
pub fn guard(spec: &Specification, k: &Configuration, i: usize) -> bool {
    let Some(q) = k.constraint(i).as_query() else { return false };
    let Some(src) = q.source.as_scope() else { return false };
    let pot = potential_edges(spec, k, Some(i));
    guard_against(&k.graph, src, &q.regex, &pot)
}

pub fn guard_against(g: &ScopeGraph, src: ScopeId, regex: &LabelRegex, pot: &BTreeSet<PotentialEdge>) -> bool {
    pot.is_empty() || guard_conflicts(g, src, regex, pot).is_empty()
}

/// The potential edges a query from `src` could still extend through.
pub fn guard_conflicts(
    g: &ScopeGraph,
    src: ScopeId,
    regex: &LabelRegex,
    pot: &BTreeSet<PotentialEdge>,
) -> BTreeSet<PotentialEdge> {
    if pot.is_empty() {
        return BTreeSet::new();
    }
    let critical = g.critical_edges(src, regex);
    pot.iter()
        .filter(|pe| match pe.source {
            Some(s) => critical.contains(&(s, pe.label.clone())),
            None => critical.iter().any(|(_, l)| *l == pe.label),
        })
        .cloned()
        .collect()
}

/// Does the pending goal have at least one applicable rule? Used by callers
/// that want to distinguish a stuck predicate from a failed one.
pub fn rule_count(spec: &Specification, p: &Pred) -> usize {
    count_matching(spec, p)
}
