//! Breadth-first search over speculative expansions, with the heuristics
//! that make it practical: focus holes, constraint selection, rule ordering,
//! guided query expansion, cross-hole insertion and recursion replay.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::hash::{Hash, Hasher};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::canon::{constraint_key, state_key};
use crate::constraint::{count_matching, matching_rules, Constraint, RuleMatch};
use crate::graph::PotentialEdge;
use crate::solver::{constraint_potential_edges, solve_exhaustively, Configuration, HoleId, SolveStatus};
use crate::spec::Specification;
use crate::synthesis::{
    accept, expand_pred, expand_query, focus_accept, query_holes, related_constraints, ExpansionMode, LockedProgram,
    SolutionRecord,
};
use crate::term::{match_term, mgu, Substitution, Term, Var};

#[derive(Debug, Clone)]
pub struct SearchBudget {
    pub wall_clock: Duration,
    pub max_solutions_per_hole: usize,
    pub max_depth: usize,
    pub max_branches: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            wall_clock: Duration::from_secs(60),
            max_solutions_per_hole: 1,
            max_depth: 6,
            max_branches: 200_000,
        }
    }
}

pub type Renderer = Arc<dyn Fn(&Term) -> String + Send + Sync>;

#[derive(Clone)]
pub struct SearchOptions {
    pub heuristics: bool,
    pub workers: usize,
    pub fuel: usize,
    /// Secondary sort key within a depth stratum (after path length).
    pub render: Option<Renderer>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { heuristics: true, workers: 1, fuel: crate::solver::DEFAULT_FUEL, render: None }
    }
}

impl std::fmt::Debug for SearchOptions {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SearchOptions")
            .field("heuristics", &self.heuristics)
            .field("workers", &self.workers)
            .field("fuel", &self.fuel)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExhaustReason {
    Timeout,
    Depth,
    Branches,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchStatus {
    Complete,
    BudgetExhausted(ExhaustReason),
}

#[derive(Debug, Clone, Default)]
pub struct SearchStats {
    pub branches: usize,
    pub parked: usize,
    pub insertions: usize,
    pub witnesses: usize,
    pub derived: usize,
    pub max_depth_reached: usize,
    pub first_solution: BTreeMap<HoleId, Duration>,
    /// Depths of processed branches, in processing order.
    pub depth_trace: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SearchReport {
    pub records: Vec<SolutionRecord>,
    pub status: SearchStatus,
    pub stats: SearchStats,
    pub elapsed: Duration,
}

impl SearchReport {
    pub fn for_hole(&self, h: HoleId) -> impl Iterator<Item = &SolutionRecord> {
        self.records.iter().filter(move |r| r.hole == h)
    }
}

/// An ancestor on a branch's lineage, with its solved configuration.
#[derive(Debug)]
pub struct Ancestor {
    pub id: u64,
    pub depth: usize,
    pub configuration: Configuration,
    pub key: String,
    pub key_vars: Vec<String>,
    pub parent: Option<Arc<Ancestor>>,
}

impl Ancestor {
    fn chain(this: &Option<Arc<Ancestor>>) -> impl Iterator<Item = &Arc<Ancestor>> {
        std::iter::successors(this.as_ref(), |a| a.parent.as_ref())
    }
}

#[derive(Debug, Clone)]
pub struct SearchBranch {
    pub id: u64,
    pub configuration: Configuration,
    pub focus: Option<HoleId>,
    pub depth: usize,
    /// Expansions charged to each hole; without a focus the depth bound
    /// applies per hole.
    pub hole_depths: BTreeMap<HoleId, usize>,
    pub pending_blockers: BTreeSet<PotentialEdge>,
    pub lineage: Option<Arc<Ancestor>>,
}

/// A state that repeats an ancestor's constraints with a more instantiated
/// hole term. Its solutions follow from the base's.
#[derive(Debug, Clone)]
pub struct Witness {
    pub base_id: u64,
    pub base_depth: usize,
    pub base_term: Term,
    pub base_path: Vec<crate::graph::ScopeId>,
    pub rec: Arc<Ancestor>,
    pub rec_term: Term,
    pub rec_path: Vec<crate::graph::ScopeId>,
    pub focus: HoleId,
    /// (variable in the recursive state, corresponding base variable)
    pub correspondence: Vec<(Var, Var)>,
}

#[derive(Default)]
struct Processed {
    accepted: Option<(Configuration, usize)>,
    /// Each child with the holes its expansion is charged to.
    children: Vec<(Configuration, Vec<HoleId>)>,
    park: Option<(BTreeSet<HoleId>, BTreeSet<PotentialEdge>)>,
    witness: Option<Witness>,
    depth_cut: bool,
    solved: Option<Arc<Ancestor>>,
}

/// Picks the constraint to expand on a focus-hole branch: the oldest query
/// over the focus hole, else the oldest open predicate connected to it,
/// preferring predicates whose rules can reach a query.
pub fn select_constraint(spec: &Specification, k: &Configuration, focus: HoleId) -> Option<usize> {
    let seeds = k.hole_vars(focus);
    if seeds.is_empty() {
        return None;
    }
    let rel = related_constraints(k, &seeds);
    let by_age = |i: &usize| (k.constraints[*i].age, *i);
    let queries = rel.iter().copied().filter(|&i| query_holes(k, i).contains(&focus));
    if let Some(i) = queries.min_by_key(by_age) {
        return Some(i);
    }
    let preds: Vec<usize> = rel
        .iter()
        .copied()
        .filter(|&i| k.constraint(i).as_pred().is_some_and(|p| count_matching(spec, p) >= 2))
        .collect();
    let leading = query_leading(spec);
    preds
        .iter()
        .copied()
        .filter(|&i| leading.contains(&*k.constraint(i).as_pred().unwrap().symbol))
        .min_by_key(by_age)
        .or_else(|| preds.iter().copied().min_by_key(by_age))
}

/// Predicates some rule of which contains a query, directly or through
/// other predicates.
pub fn query_leading(spec: &Specification) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = BTreeSet::new();
    loop {
        let mut changed = false;
        for r in &spec.rules {
            if out.contains(&*r.head.symbol) {
                continue;
            }
            let mut hit = false;
            r.body.visit(&mut |c| match c {
                Constraint::Query(_) => hit = true,
                Constraint::Pred(p) if out.contains(&*p.symbol) => hit = true,
                _ => {}
            });
            if hit {
                out.insert(r.head.symbol.to_string());
                changed = true;
            }
        }
        if !changed {
            return out;
        }
    }
}

/// Stable: query-leading rules first, then fewer existentially bound
/// variables. Never drops a candidate.
pub fn order_rule_candidates(spec: &Specification, mut ms: Vec<RuleMatch>) -> Vec<RuleMatch> {
    let leading = query_leading(spec);
    let key = |m: &RuleMatch| {
        let mut lead = false;
        let mut bound = 0;
        m.body.visit(&mut |c| match c {
            Constraint::Query(_) => lead = true,
            Constraint::Pred(p) if leading.contains(&*p.symbol) => lead = true,
            Constraint::Exists(..) => bound += 1,
            _ => {}
        });
        (!lead, bound)
    };
    ms.sort_by_cached_key(key);
    ms
}

/// Holes that the constraints able to add any of `blockers` (plus whatever
/// shares variables with them) are waiting on.
pub fn responsible_holes(
    spec: &Specification,
    k: &Configuration,
    blockers: &BTreeSet<PotentialEdge>,
    focus: HoleId,
) -> BTreeSet<HoleId> {
    let mut seeds = BTreeSet::new();
    for p in &k.constraints {
        let mut pot = BTreeSet::new();
        constraint_potential_edges(spec, &p.constraint, &mut pot);
        let hit = pot.iter().any(|pe| {
            blockers.iter().any(|b| b.label == pe.label && (b.source.is_none() || pe.source.is_none() || b.source == pe.source))
        });
        if hit {
            seeds.extend(p.constraint.free_vars());
        }
    }
    let rel = related_constraints(k, &seeds);
    let mut vars = seeds;
    for i in rel {
        vars.extend(k.constraints[i].constraint.free_vars());
    }
    vars.iter().filter_map(|v| k.hole_of(v)).filter(|h| *h != focus).collect()
}

/// If the branch repeats an ancestor (same constraints and graph up to
/// renaming, same hole head, strictly more instantiated hole term), the
/// witness relating the two.
pub fn detect_recursion(k: &Configuration, focus: HoleId, me: &Arc<Ancestor>) -> Option<Witness> {
    let st = k.hole_states.get(&focus)?;
    for anc in Ancestor::chain(&me.parent) {
        if anc.key != me.key {
            continue;
        }
        let bst = anc.configuration.hole_states.get(&focus)?;
        let Some(sigma) = match_term(&bst.term, &st.term) else { continue };
        if sigma.is_renaming() {
            continue;
        }
        let correspondence: Vec<(Var, Var)> =
            me.key_vars.iter().zip(anc.key_vars.iter()).map(|(r, b)| (Var::new(r), Var::new(b))).collect();
        return Some(Witness {
            base_id: anc.id,
            base_depth: anc.depth,
            base_term: bst.term.clone(),
            base_path: bst.path.clone(),
            rec: me.clone(),
            rec_term: st.term.clone(),
            rec_path: st.path.clone(),
            focus,
            correspondence,
        });
    }
    None
}

/// Turns a solution found below the base state into one for the recursive
/// state, re-solving to confirm it.
pub fn replay_recursive(
    spec: &Specification,
    w: &Witness,
    term: &Term,
    path: &[crate::graph::ScopeId],
    fuel: usize,
) -> Option<(Configuration, Term, Vec<crate::graph::ScopeId>)> {
    let sigma = match_term(&w.base_term, term)?;
    let mut theta = Substitution::new();
    for (rv, bv) in &w.correspondence {
        if let Some(t) = sigma.get(bv) {
            theta.terms.insert(rv.clone(), t.clone());
        }
    }
    let derived = theta.apply(&w.rec_term);
    if !derived.is_ground() {
        return None;
    }
    if path.len() < w.base_path.len() || path[path.len() - w.base_path.len()..] != w.base_path[..] {
        return None;
    }
    let prefix = &path[..path.len() - w.base_path.len()];
    let mut new_path = prefix.to_vec();
    new_path.extend_from_slice(&w.rec_path);

    let mut k = w.rec.configuration.clone();
    // Bind through unification so U is updated consistently.
    let mut uni = Substitution::new();
    uni.unify(&w.rec_term, &derived).ok()?;
    k.apply(&uni).ok()?;
    let r = solve_exhaustively(spec, &k, fuel);
    if matches!(r.status, SolveStatus::Failure(_) | SolveStatus::FuelExhausted) {
        return None;
    }
    let mut k = r.configuration;
    let mut hs = k.hole_states.get(&w.focus)?.clone();
    hs.path = new_path.clone();
    k.hole_states.insert(w.focus, hs);
    focus_accept(spec, &k, w.focus).then_some((k, derived, new_path))
}

fn mentioned_vars(k: &Configuration) -> BTreeSet<Var> {
    let mut vs = k.free_vars();
    for s in k.graph.scopes() {
        k.graph.data(s).unwrap().collect_vars(&mut vs);
    }
    vs
}

/// A hole term containing a variable no constraint can ever bind will never
/// become ground.
fn hopeless(k: &Configuration, focus: Option<HoleId>) -> bool {
    let vs = mentioned_vars(k);
    k.hole_states.iter().filter(|(h, _)| focus.is_none() || focus == Some(**h)).any(|(_, st)| {
        let tv = st.term.vars();
        !tv.is_empty() && !tv.iter().all(|v| vs.contains(v))
    })
}

fn hash_key(s: &str, focus: Option<HoleId>) -> u64 {
    let mut h = DefaultHasher::new();
    s.hash(&mut h);
    focus.hash(&mut h);
    h.finish()
}

struct Found {
    record: SolutionRecord,
    lineage: Option<Arc<Ancestor>>,
}

struct Parked {
    configuration: Configuration,
    focus: HoleId,
    depth: usize,
    donors: BTreeSet<HoleId>,
    lineage: Option<Arc<Ancestor>>,
}

struct Search<'a> {
    spec: &'a Specification,
    locked: &'a LockedProgram,
    budget: &'a SearchBudget,
    options: &'a SearchOptions,
    start: Instant,
    next_id: u64,
    visited: HashSet<u64>,
    emitted: BTreeMap<HoleId, BTreeSet<Term>>,
    done: BTreeSet<HoleId>,
    found: Vec<Found>,
    parked: Vec<Parked>,
    witnesses: Vec<Witness>,
    derived_queue: BTreeMap<usize, Vec<Found>>,
    stats: SearchStats,
    exhausted: Option<ExhaustReason>,
    records: Vec<SolutionRecord>,
}

impl<'a> Search<'a> {
    fn process(&self, b: &SearchBranch) -> Processed {
        let mut out = Processed::default();
        let r = solve_exhaustively(self.spec, &b.configuration, self.options.fuel);
        let k = match r.status {
            SolveStatus::Failure(_) | SolveStatus::FuelExhausted => return out,
            _ => r.configuration,
        };
        if hopeless(&k, b.focus) {
            return out;
        }
        let key = match b.focus {
            Some(_) => constraint_key(&k),
            None => crate::canon::CanonKey { text: String::new(), vars: Vec::new() },
        };
        let me = Arc::new(Ancestor {
            id: b.id,
            depth: b.depth,
            configuration: k.clone(),
            key: key.text,
            key_vars: key.vars,
            parent: b.lineage.clone(),
        });
        out.solved = Some(me.clone());
        match b.focus {
            Some(h) => {
                if focus_accept(self.spec, &k, h) {
                    out.accepted = Some((k, b.depth));
                    return out;
                }
                if let Some(w) = detect_recursion(&k, h, &me) {
                    out.witness = Some(w);
                    return out;
                }
                if b.depth >= self.budget.max_depth {
                    out.depth_cut = true;
                    return out;
                }
                let Some(i) = select_constraint(self.spec, &k, h) else { return out };
                match k.constraint(i) {
                    Constraint::Query(_) => {
                        let ex = expand_query(self.spec, &k, i, h, ExpansionMode::Guided);
                        out.children = ex.children.into_iter().map(|c| (c, vec![h])).collect();
                        if !ex.blockers.is_empty() {
                            let donors = responsible_holes(self.spec, &k, &ex.blockers, h);
                            if !donors.is_empty() {
                                out.park = Some((donors, ex.blockers));
                            }
                        }
                    }
                    Constraint::Pred(p) => {
                        let ms = order_rule_candidates(self.spec, matching_rules(self.spec, p));
                        out.children = expand_pred(&k, i, ms).into_iter().map(|c| (c, vec![h])).collect();
                    }
                    _ => {}
                }
            }
            None => {
                if accept(&k) {
                    out.accepted = Some((k, b.depth));
                    return out;
                }
                let at_max = |h: &HoleId| b.hole_depths.get(h).copied().unwrap_or(0) >= self.budget.max_depth;
                // A predicate split is a complete case analysis whatever
                // else is pending, so one per branch suffices. Queries are
                // only tried once none is left.
                let open = (0..k.constraints.len())
                    .filter(|&i| k.constraint(i).as_pred().is_some_and(|p| count_matching(self.spec, p) >= 2))
                    .min_by_key(|i| (k.constraints[*i].age, *i));
                if let Some(i) = open {
                    let rel = related_constraints(&k, &k.constraint(i).free_vars());
                    let mut charged: BTreeSet<HoleId> = BTreeSet::new();
                    for j in rel.iter().copied().chain([i]) {
                        charged.extend(k.constraint(j).free_vars().iter().filter_map(|v| k.hole_of(v)));
                    }
                    if charged.is_empty() {
                        charged = k.hole_states.keys().copied().collect();
                    }
                    if charged.iter().any(at_max) {
                        out.depth_cut = true;
                        return out;
                    }
                    let charged: Vec<HoleId> = charged.into_iter().collect();
                    let ms = matching_rules(self.spec, k.constraint(i).as_pred().unwrap());
                    out.children = expand_pred(&k, i, ms).into_iter().map(|c| (c, charged.clone())).collect();
                    return out;
                }
                for i in 0..k.constraints.len() {
                    for h in query_holes(&k, i) {
                        if at_max(&h) {
                            out.depth_cut = true;
                            continue;
                        }
                        let ex = expand_query(self.spec, &k, i, h, ExpansionMode::Exhaustive);
                        out.children.extend(ex.children.into_iter().map(|c| (c, vec![h])));
                    }
                }
            }
        }
        out
    }

    fn make_record(&self, k: &Configuration, h: HoleId, depth: usize, derived: bool) -> SolutionRecord {
        let st = &k.hole_states[&h];
        let assignments = k
            .hole_states
            .iter()
            .filter(|(g, s)| **g != h && s.term.is_ground())
            .map(|(g, s)| (*g, s.term.clone()))
            .collect();
        SolutionRecord {
            hole: h,
            term: st.term.clone(),
            path: st.path.clone(),
            steps: st.path.len() - 1,
            depth,
            assignments,
            configuration: Arc::new(k.clone()),
            derived,
        }
    }

    fn sort_key(&self, r: &SolutionRecord) -> (usize, String) {
        let s = match &self.options.render {
            Some(f) => f(&r.term),
            None => r.term.to_string(),
        };
        (r.steps, s)
    }

    fn timed_out(&self) -> bool {
        self.start.elapsed() >= self.budget.wall_clock
    }

    fn new_branch(
        &mut self,
        k: Configuration,
        focus: Option<HoleId>,
        depth: usize,
        hole_depths: BTreeMap<HoleId, usize>,
        lineage: Option<Arc<Ancestor>>,
    ) -> Option<SearchBranch> {
        let key = hash_key(&state_key(&k).text, focus);
        if !self.visited.insert(key) {
            return None;
        }
        self.next_id += 1;
        Some(SearchBranch {
            id: self.next_id,
            configuration: k,
            focus,
            depth,
            hole_depths,
            pending_blockers: BTreeSet::new(),
            lineage,
        })
    }

    fn insert_children(&mut self, p: &Parked, donor: &SolutionRecord) -> Option<SearchBranch> {
        let cur = p.configuration.hole_states.get(&donor.hole)?;
        let theta = mgu(&cur.term, &donor.term).ok()?;
        let mut k = p.configuration.clone();
        k.apply(&theta).ok()?;
        let mut hs = k.hole_states.get(&donor.hole)?.clone();
        hs.path = donor.path.clone();
        k.hole_states.insert(donor.hole, hs);
        self.stats.insertions += 1;
        self.new_branch(k, Some(p.focus), p.depth + 1, BTreeMap::from([(p.focus, p.depth + 1)]), p.lineage.clone())
    }

    /// Emits solutions of one stratum in (steps, rendering) order; returns
    /// insertion branches they unblock.
    fn emit(&mut self, mut batch: Vec<Found>, on_record: &mut dyn FnMut(&SolutionRecord)) -> Vec<SearchBranch> {
        batch.sort_by_cached_key(|f| self.sort_key(&f.record));
        let mut fresh = Vec::new();
        for f in batch {
            let h = f.record.hole;
            if self.done.contains(&h) {
                continue;
            }
            if !self.emitted.entry(h).or_default().insert(f.record.term.clone()) {
                continue;
            }
            self.stats.first_solution.entry(h).or_insert_with(|| self.start.elapsed());
            on_record(&f.record);
            self.records.push(f.record.clone());
            if self.emitted[&h].len() >= self.budget.max_solutions_per_hole {
                self.done.insert(h);
            }
            fresh.push(f);
        }
        let mut out = Vec::new();
        let mut replays: Vec<(usize, Found)> = Vec::new();
        for f in &fresh {
            let ws = self.witnesses.clone();
            for w in &ws {
                if w.focus == f.record.hole && descends(&f.lineage, w.base_id) {
                    if let Some(d) = self.replay(w, f) {
                        replays.push(d);
                    }
                }
            }
            let parked: Vec<usize> = (0..self.parked.len())
                .filter(|&i| self.parked[i].donors.contains(&f.record.hole) && !self.done.contains(&self.parked[i].focus))
                .collect();
            for i in parked {
                let p = std::mem::replace(&mut self.parked[i], placeholder());
                if let Some(b) = self.insert_children(&p, &f.record) {
                    out.push(b);
                }
                self.parked[i] = p;
            }
        }
        for (d, f) in replays {
            self.derived_queue.entry(d).or_default().push(f);
        }
        self.found.extend(fresh);
        out
    }

    fn replay(&mut self, w: &Witness, f: &Found) -> Option<(usize, Found)> {
        let depth = f.record.depth + (w.rec.depth - w.base_depth);
        if depth > self.budget.max_depth {
            self.exhausted.get_or_insert(ExhaustReason::Depth);
            return None;
        }
        let (k, _term, _path) = replay_recursive(self.spec, w, &f.record.term, &f.record.path, self.options.fuel)?;
        self.stats.derived += 1;
        let mut record = self.make_record(&k, w.focus, depth, true);
        record.depth = depth;
        Some((depth, Found { record, lineage: Some(w.rec.clone()) }))
    }

    fn register_witness(&mut self, w: Witness) -> Vec<(usize, Found)> {
        self.stats.witnesses += 1;
        let mut out = Vec::new();
        let prior: Vec<(Term, Vec<crate::graph::ScopeId>, usize, Option<Arc<Ancestor>>, HoleId)> = self
            .found
            .iter()
            .map(|f| (f.record.term.clone(), f.record.path.clone(), f.record.depth, f.lineage.clone(), f.record.hole))
            .collect();
        for (term, path, depth, lineage, hole) in prior {
            if hole != w.focus || !descends(&lineage, w.base_id) {
                continue;
            }
            let fake = Found {
                record: SolutionRecord {
                    hole,
                    term,
                    path,
                    steps: 0,
                    depth,
                    assignments: BTreeMap::new(),
                    configuration: Arc::new(Configuration::default()),
                    derived: false,
                },
                lineage,
            };
            if let Some(d) = self.replay(&w, &fake) {
                out.push(d);
            }
        }
        self.witnesses.push(w);
        out
    }
}

fn placeholder() -> Parked {
    Parked {
        configuration: Configuration::default(),
        focus: HoleId(u32::MAX),
        depth: 0,
        donors: BTreeSet::new(),
        lineage: None,
    }
}

fn descends(lineage: &Option<Arc<Ancestor>>, id: u64) -> bool {
    Ancestor::chain(lineage).any(|a| a.id == id)
}

/// Runs the search from the initial stuck configuration. Solutions are
/// reported through `on_record` in discovery order.
pub fn run_search(
    spec: &Specification,
    locked: &LockedProgram,
    k0: &Configuration,
    budget: &SearchBudget,
    options: &SearchOptions,
    on_record: &mut dyn FnMut(&SolutionRecord),
) -> SearchReport {
    let mut s = Search {
        spec,
        locked,
        budget,
        options,
        start: Instant::now(),
        next_id: 0,
        visited: HashSet::new(),
        emitted: BTreeMap::new(),
        done: BTreeSet::new(),
        found: Vec::new(),
        parked: Vec::new(),
        witnesses: Vec::new(),
        derived_queue: BTreeMap::new(),
        stats: SearchStats::default(),
        exhausted: None,
        records: Vec::new(),
    };
    let mut frontier: Vec<SearchBranch> = Vec::new();
    if options.heuristics {
        for h in &s.locked.holes {
            if let Some(b) = s.new_branch(k0.clone(), Some(h.id), 0, BTreeMap::new(), None) {
                frontier.push(b);
            }
        }
    } else if !s.locked.holes.is_empty() {
        frontier.extend(s.new_branch(k0.clone(), None, 0, BTreeMap::new(), None));
    }
    let pool = (options.workers > 1)
        .then(|| rayon::ThreadPoolBuilder::new().num_threads(options.workers).build().ok())
        .flatten();

    let mut depth = 0;
    loop {
        frontier.retain(|b| b.focus.is_none_or(|h| !s.done.contains(&h)));
        if s.locked.holes.iter().all(|h| s.done.contains(&h.id)) {
            break;
        }
        let pending_derived = s.derived_queue.keys().any(|d| *d <= budget.max_depth);
        if frontier.is_empty() && !pending_derived {
            break;
        }
        let mut next: Vec<SearchBranch> = Vec::new();
        let mut batch: Vec<Found> = Vec::new();
        let mut stop = false;
        for chunk in frontier.chunks(64) {
            if s.timed_out() {
                s.exhausted = Some(ExhaustReason::Timeout);
                stop = true;
                break;
            }
            if s.stats.branches >= budget.max_branches {
                s.exhausted = Some(ExhaustReason::Branches);
                stop = true;
                break;
            }
            let results: Vec<Processed> = match &pool {
                Some(p) => p.install(|| chunk.par_iter().map(|b| s.process(b)).collect()),
                None => chunk.iter().map(|b| s.process(b)).collect(),
            };
            for (b, r) in chunk.iter().zip(results) {
                s.stats.branches += 1;
                s.stats.depth_trace.push(b.depth);
                s.stats.max_depth_reached = s.stats.max_depth_reached.max(b.depth);
                if r.depth_cut {
                    s.exhausted.get_or_insert(ExhaustReason::Depth);
                }
                let lineage = r.solved.clone();
                if let Some((k, d)) = r.accepted {
                    let holes: Vec<HoleId> = match b.focus {
                        Some(h) => vec![h],
                        None => k.hole_states.keys().copied().collect(),
                    };
                    for h in holes {
                        let record = s.make_record(&k, h, d, false);
                        batch.push(Found { record, lineage: lineage.clone() });
                    }
                }
                if let Some(w) = r.witness {
                    for (d, f) in s.register_witness(w) {
                        s.derived_queue.entry(d).or_default().push(f);
                    }
                }
                if let (Some((donors, _blockers)), Some(h), Some(me)) = (r.park, b.focus, r.solved.as_ref()) {
                    s.stats.parked += 1;
                    let p = Parked {
                        configuration: me.configuration.clone(),
                        focus: h,
                        depth: b.depth,
                        donors,
                        lineage: lineage.clone(),
                    };
                    let prior: Vec<SolutionRecord> = s.records.iter().filter(|r| p.donors.contains(&r.hole)).cloned().collect();
                    for d in prior {
                        if let Some(nb) = s.insert_children(&p, &d) {
                            next.push(nb);
                        }
                    }
                    s.parked.push(p);
                }
                for (c, charged) in r.children {
                    let mut hd = b.hole_depths.clone();
                    for h in charged {
                        *hd.entry(h).or_default() += 1;
                    }
                    if let Some(nb) = s.new_branch(c, b.focus, b.depth + 1, hd, lineage.clone()) {
                        next.push(nb);
                    }
                }
            }
        }
        let ready: Vec<usize> = s.derived_queue.keys().copied().filter(|d| *d <= depth).collect();
        for d in ready {
            batch.extend(s.derived_queue.remove(&d).unwrap());
        }
        next.extend(s.emit(batch, on_record));
        if stop {
            break;
        }
        frontier = next;
        depth += 1;
    }
    if s.derived_queue.keys().any(|d| *d > budget.max_depth) {
        s.exhausted.get_or_insert(ExhaustReason::Depth);
    }
    let status = match s.exhausted {
        Some(r) if !s.locked.holes.iter().all(|h| s.done.contains(&h.id)) => SearchStatus::BudgetExhausted(r),
        _ => SearchStatus::Complete,
    };
    SearchReport { records: s.records, status, stats: s.stats, elapsed: s.start.elapsed() }
}
