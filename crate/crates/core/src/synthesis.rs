//! Speculative expansion of stuck constraints and the synthesis entry point.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use crate::constraint::{count_matching, eval_eq, Constraint, RuleMatch};
use crate::graph::{PotentialEdge, ScopeId};
use crate::search::{run_search, SearchBudget, SearchOptions, SearchReport};
use crate::solver::{
    guard_against, guard_conflicts, potential_edges, solve_exhaustively, Configuration, ConstraintFailure, HoleId, HoleState,
    SolveStatus,
};
use crate::spec::Specification;
use crate::term::{mgu, Substitution, Term, Var};

/// One lock: the variable standing for the hole in the initial goal and a
/// ground token occurring in exactly one scope's data (the target).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HoleSpec {
    pub id: HoleId,
    pub var: Var,
    pub token: Term,
    pub name: String,
}

#[derive(Debug, Clone)]
pub struct LockedProgram {
    pub goal: Constraint,
    pub holes: Vec<HoleSpec>,
}

impl LockedProgram {
    pub fn initial(&self) -> Configuration {
        let mut k = Configuration::new(self.goal.clone());
        for h in &self.holes {
            k.holes.insert(h.var.clone(), h.id);
            k.hole_states.insert(h.id, HoleState { path: Vec::new(), term: Term::Var(h.var.clone()) });
        }
        k
    }

    pub fn hole(&self, id: HoleId) -> Option<&HoleSpec> {
        self.holes.iter().find(|h| h.id == id)
    }
}

#[derive(Debug, Clone)]
pub struct SolutionRecord {
    pub hole: HoleId,
    pub term: Term,
    pub path: Vec<ScopeId>,
    pub steps: usize,
    /// Number of speculative expansions on the branch that produced it.
    pub depth: usize,
    /// Other holes whose term was fixed on the same branch.
    pub assignments: BTreeMap<HoleId, Term>,
    pub configuration: Arc<Configuration>,
    pub derived: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthesisError {
    #[error("no scope carries the target of hole {0}")]
    TargetNotFound(HoleId),
    #[error("target of hole {0} is carried by several scopes")]
    AmbiguousTarget(HoleId),
    #[error("program does not typecheck: {0}")]
    InitialTypeError(ConstraintFailure),
    #[error("solver fuel exhausted on the initial program")]
    FuelExhausted,
}

/// Solves the locked program as far as it goes and records each hole's
/// target scope in H.
pub fn initial_configuration(
    spec: &Specification,
    locked: &LockedProgram,
    fuel: usize,
) -> Result<Configuration, SynthesisError> {
    let r = solve_exhaustively(spec, &locked.initial(), fuel);
    let mut k = match r.status {
        SolveStatus::Failure(f) => return Err(SynthesisError::InitialTypeError(f)),
        SolveStatus::FuelExhausted => return Err(SynthesisError::FuelExhausted),
        SolveStatus::Success | SolveStatus::Stuck => r.configuration,
    };
    for h in &locked.holes {
        let scopes = k.graph.scopes_with_data(&h.token);
        let target = match scopes.as_slice() {
            [] => return Err(SynthesisError::TargetNotFound(h.id)),
            [s] => *s,
            _ => return Err(SynthesisError::AmbiguousTarget(h.id)),
        };
        let term = k.hole_states.get(&h.id).map(|s| s.term.clone()).unwrap_or(Term::Var(h.var.clone()));
        k.hole_states.insert(h.id, HoleState { path: vec![target], term });
    }
    Ok(k)
}

/// Op-Expand-Pred: one child per rule candidate, in the given order.
pub fn expand_pred(k: &Configuration, i: usize, candidates: Vec<RuleMatch>) -> Vec<Configuration> {
    let mut out = Vec::new();
    for m in candidates {
        let mut k2 = k.clone();
        let age = k2.fresh_age();
        k2.replace(i, vec![m.body], age);
        if k2.apply(&m.theta).is_ok() {
            out.push(k2);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpansionMode {
    /// Only sources found by walking backwards from the hole's current scope.
    Guided,
    /// Every (source, target) scope pair.
    Exhaustive,
}

#[derive(Debug, Clone, Default)]
pub struct QueryExpansion {
    pub children: Vec<Configuration>,
    /// Potential edges that could open further candidate sources later.
    pub blockers: BTreeSet<PotentialEdge>,
}

/// Holes U assigns to free variables of the filter of query `i`.
pub fn query_holes(k: &Configuration, i: usize) -> BTreeSet<HoleId> {
    match k.constraint(i).as_query() {
        Some(q) => q.filter.free_vars().iter().filter_map(|v| k.hole_of(v)).collect(),
        None => BTreeSet::new(),
    }
}

/// Op-Expand-Query: guess the query's source s' and the scope s'' it must
/// reach, so the hole's composite path grows to s' · path. The query stays
/// in place; the solver answers it afterwards.
pub fn expand_query(spec: &Specification, k: &Configuration, i: usize, h: HoleId, mode: ExpansionMode) -> QueryExpansion {
    let mut out = QueryExpansion::default();
    let Some(q) = k.constraint(i).as_query() else { return out };
    let Some(st) = k.hole_states.get(&h) else { return out };
    let head = st.path[0];
    let g = &k.graph;
    let open: Vec<PotentialEdge> = potential_edges(spec, k, Some(i)).into_iter().collect();

    let mut ends: Vec<ScopeId> = vec![head];
    ends.extend(g.scopes().filter(|s| *s != head && g.data_contains(*s, head)));

    let mut pairs: Vec<(ScopeId, ScopeId)> = Vec::new();
    match mode {
        ExpansionMode::Guided => {
            for &end in &ends {
                let back = g.resolve_backward(end, &q.regex, &open);
                out.blockers.extend(back.blockers);
                for (src, _) in back.sources {
                    pairs.push((src, end));
                }
            }
        }
        ExpansionMode::Exhaustive => {
            for &end in &ends {
                for src in g.scopes() {
                    pairs.push((src, end));
                }
            }
        }
    }

    let mut seen = BTreeSet::new();
    for (src, end) in pairs {
        let Ok(theta1) = mgu(&q.source, &Term::Scope(src)) else { continue };
        let filter = q.filter.body.subst(&theta1);
        let data = g.data(end).cloned().expect("scope has data");
        let body = filter.subst(&Substitution::single(q.filter.binder.clone(), data));
        let Ok(theta2) = eval_eq(g, &body) else { continue };
        let theta = theta1.compose(&theta2);

        let mut k2 = k.clone();
        if k2.apply(&theta).is_err() {
            continue;
        }
        let q2 = k2.constraint(i).as_query().expect("query stays in place").clone();
        if !q2.filter.free_vars().is_empty() {
            continue;
        }
        let reaches = k2.graph.resolve(src, &q2.regex, &q2.filter, &q2.order).iter().any(|p| p.target() == end);
        if !reaches {
            continue;
        }
        let pot = potential_edges(spec, &k2, Some(i));
        let conflicts = guard_conflicts(&k2.graph, src, &q2.regex, &pot);
        if !conflicts.is_empty() {
            if mode == ExpansionMode::Guided {
                out.blockers.extend(conflicts);
            }
            continue;
        }
        let mut hs = k2.hole_states.get(&h).expect("hole state").clone();
        hs.path.insert(0, src);
        k2.hole_states.insert(h, hs);
        if seen.insert(format!("{src}:{theta:?}")) {
            out.children.push(k2);
        }
    }
    out
}

/// No constraints left and every hole assigned a ground term resolving
/// along a path of at least one step.
pub fn accept(k: &Configuration) -> bool {
    k.constraints.is_empty() && k.hole_states.values().all(|s| s.path.len() >= 2 && s.term.is_ground())
}

/// Acceptance for a single hole while others may still be open: its term is
/// ground, its path has a step, and whatever constraints remain belong to
/// the other open holes.
pub fn focus_accept(spec: &Specification, k: &Configuration, h: HoleId) -> bool {
    let Some(st) = k.hole_states.get(&h) else { return false };
    if st.path.len() < 2 || !st.term.is_ground() {
        return false;
    }
    let others: BTreeSet<Var> = k.holes.iter().filter(|(_, g)| **g != h).map(|(v, _)| v.clone()).collect();
    attributable(spec, k, &others)
}

/// Indices of constraints connected to `seeds` through shared variables.
pub fn related_constraints(k: &Configuration, seeds: &BTreeSet<Var>) -> BTreeSet<usize> {
    let fvs: Vec<BTreeSet<Var>> = k.constraints.iter().map(|p| p.constraint.free_vars()).collect();
    let mut vars = seeds.clone();
    let mut rel = BTreeSet::new();
    loop {
        let mut changed = false;
        for (i, fv) in fvs.iter().enumerate() {
            if !rel.contains(&i) && fv.iter().any(|v| vars.contains(v)) {
                rel.insert(i);
                vars.extend(fv.iter().cloned());
                changed = true;
            }
        }
        if !changed {
            return rel;
        }
    }
}

/// Every remaining constraint either shares variables (transitively) with
/// `hole_vars`, or is a query that is ready except for edges those
/// constraints may still add.
pub fn attributable(spec: &Specification, k: &Configuration, hole_vars: &BTreeSet<Var>) -> bool {
    let rel = related_constraints(k, hole_vars);
    for i in 0..k.constraints.len() {
        if rel.contains(&i) {
            continue;
        }
        let Some(q) = k.constraint(i).as_query() else { return false };
        let Some(src) = q.source.as_scope() else { return false };
        if !q.filter.free_vars().is_empty() {
            return false;
        }
        let mut unrelated = k.clone();
        let keep: Vec<_> = k
            .constraints
            .iter()
            .enumerate()
            .filter(|(j, _)| !rel.contains(j) || *j == i)
            .map(|(_, p)| p.clone())
            .collect();
        unrelated.constraints = keep.into_iter().collect();
        let j = unrelated.constraints.iter().position(|p| Arc::ptr_eq(&p.constraint, &k.constraints[i].constraint));
        let pot = potential_edges(spec, &unrelated, j);
        if !guard_against(&k.graph, src, &q.regex, &pot) {
            return false;
        }
    }
    true
}

/// Independent re-validation of an emitted record: substitute its term (and
/// the donor terms fixed on the same branch) into the original goal, solve
/// from scratch, and check the composite path against the solved queries.
pub fn check_solution(spec: &Specification, locked: &LockedProgram, record: &SolutionRecord) -> bool {
    if !record.term.is_ground() || record.path.len() < 2 || record.steps != record.path.len() - 1 {
        return false;
    }
    let Some(hole) = locked.hole(record.hole) else { return false };
    let k = &record.configuration;
    // The record must be the one its own derivation produced.
    match k.hole_states.get(&record.hole) {
        Some(st) if st.term == record.term && st.path == record.path => {}
        _ => return false,
    }
    let targets = k.graph.scopes_with_data(&hole.token);
    if targets.len() != 1 || record.path.last() != targets.first() {
        return false;
    }
    for w in record.path.windows(2) {
        let (a, b) = (w[0], w[1]);
        let ok = k.solved.iter().any(|sq| {
            sq.source == a && sq.answers.iter().any(|p| p.target() == b || k.graph.data_contains(p.target(), b))
        });
        if !ok {
            return false;
        }
    }
    let mut assign = record.assignments.clone();
    assign.insert(record.hole, record.term.clone());
    let mut theta = Substitution::new();
    for h in &locked.holes {
        if let Some(t) = assign.get(&h.id) {
            theta.terms.insert(h.var.clone(), t.clone());
        }
    }
    let mut k0 = Configuration::new(locked.goal.subst(&theta));
    for h in &locked.holes {
        if !assign.contains_key(&h.id) {
            k0.holes.insert(h.var.clone(), h.id);
        }
    }
    let r = solve_exhaustively(spec, &k0, crate::solver::DEFAULT_FUEL);
    match r.status {
        SolveStatus::Success => true,
        SolveStatus::Stuck => {
            let open: BTreeSet<Var> = r.configuration.holes.keys().cloned().collect();
            !open.is_empty() && attributable(spec, &r.configuration, &open)
        }
        _ => false,
    }
}

#[derive(Debug, Clone)]
pub struct SynthesisOutcome {
    pub report: SearchReport,
    pub initial: Configuration,
}

/// Runs the whole pipeline: initial solve, target discovery, search.
/// `on_record` sees each solution as it is emitted.
pub fn synthesize(
    spec: &Specification,
    locked: &LockedProgram,
    budget: &SearchBudget,
    options: &SearchOptions,
    on_record: &mut dyn FnMut(&SolutionRecord),
) -> Result<SynthesisOutcome, SynthesisError> {
    let k0 = initial_configuration(spec, locked, options.fuel)?;
    let report = run_search(spec, locked, &k0, budget, options, on_record);
    Ok(SynthesisOutcome { report, initial: k0 })
}

/// Distinguishes a stuck predicate (several rules apply) from one no rule
/// can ever satisfy.
pub fn is_open_pred(spec: &Specification, c: &Constraint) -> bool {
    c.as_pred().is_some_and(|p| count_matching(spec, p) >= 2)
}
