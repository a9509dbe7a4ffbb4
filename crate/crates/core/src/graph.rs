//! Scope graphs: labelled directed graphs of scopes carrying data terms, and
//! regular-path queries with shadowing.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use thiserror::Error;

use crate::constraint::{eval_eq, EqConstraint};
use crate::regex::{Label, LabelRegex};
use crate::term::{Substitution, Term, Var};

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ScopeId(pub u32);

impl fmt::Display for ScopeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "$s{}", self.0)
    }
}

impl fmt::Debug for ScopeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "$s{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("unknown scope {0}")]
    UnknownScope(ScopeId),
}

/// Persistent: cloning is O(1) and forks share structure.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct ScopeGraph {
    data: im::Vector<Term>,
    out: im::OrdSet<(ScopeId, Label, ScopeId)>,
    inc: im::OrdSet<(ScopeId, Label, ScopeId)>,
}

impl fmt::Debug for ScopeGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ScopeGraph {{")?;
        for (i, d) in self.data.iter().enumerate() {
            writeln!(f, "  $s{i} ↦ {d}")?;
        }
        for (s, l, t) in &self.out {
            writeln!(f, "  {s} -{l}-> {t}")?;
        }
        write!(f, "}}")
    }
}

impl ScopeGraph {
    pub fn new() -> ScopeGraph {
        ScopeGraph::default()
    }

    pub fn add_scope(&mut self, data: Term) -> ScopeId {
        let id = ScopeId(self.data.len() as u32);
        self.data.push_back(data);
        id
    }

    pub fn add_edge(&mut self, src: ScopeId, label: Label, dst: ScopeId) -> Result<(), GraphError> {
        for s in [src, dst] {
            if !self.contains(s) {
                return Err(GraphError::UnknownScope(s));
            }
        }
        self.inc.insert((dst, label.clone(), src));
        self.out.insert((src, label, dst));
        Ok(())
    }

    pub fn contains(&self, s: ScopeId) -> bool {
        (s.0 as usize) < self.data.len()
    }

    pub fn scope_count(&self) -> usize {
        self.data.len()
    }

    pub fn edge_count(&self) -> usize {
        self.out.len()
    }

    pub fn scopes(&self) -> impl Iterator<Item = ScopeId> {
        (0..self.data.len() as u32).map(ScopeId)
    }

    pub fn data(&self, s: ScopeId) -> Option<&Term> {
        self.data.get(s.0 as usize)
    }

    pub fn edges(&self) -> impl Iterator<Item = &(ScopeId, Label, ScopeId)> {
        self.out.iter()
    }

    pub fn has_edge(&self, src: ScopeId, label: &Label, dst: ScopeId) -> bool {
        self.out.contains(&(src, label.clone(), dst))
    }

    pub fn outgoing(&self, s: ScopeId) -> impl Iterator<Item = (&Label, ScopeId)> {
        self.out
            .range((s, Label::new(""), ScopeId(0))..)
            .take_while(move |e| e.0 == s)
            .map(|e| (&e.1, e.2))
    }

    pub fn incoming(&self, s: ScopeId) -> impl Iterator<Item = (ScopeId, &Label)> {
        self.inc
            .range((s, Label::new(""), ScopeId(0))..)
            .take_while(move |e| e.0 == s)
            .map(|e| (e.2, &e.1))
    }

    /// Applies θ to every data term, sharing untouched entries.
    pub fn apply(&mut self, theta: &Substitution) {
        if theta.terms.is_empty() {
            return;
        }
        for i in 0..self.data.len() {
            let d = &self.data[i];
            if d.is_ground() {
                continue;
            }
            let nd = theta.apply(d);
            if &nd != d {
                self.data.set(i, nd);
            }
        }
    }

    pub fn map_data(&mut self, f: impl Fn(&Term) -> Term) {
        for i in 0..self.data.len() {
            let nd = f(&self.data[i]);
            if nd != self.data[i] {
                self.data.set(i, nd);
            }
        }
    }

    /// Does the data of `s` mention scope `t` or contain it structurally?
    pub fn data_contains(&self, s: ScopeId, t: ScopeId) -> bool {
        self.data(s).is_some_and(|d| d.contains(&Term::Scope(t)))
    }

    /// Scopes whose data contains `needle` as a subterm.
    pub fn scopes_with_data(&self, needle: &Term) -> Vec<ScopeId> {
        self.scopes().filter(|s| self.data(*s).is_some_and(|d| d.contains(needle))).collect()
    }

    /// Every trail (no edge used twice) from `src` whose labels match `regex`
    /// and whose target is accepted, before shadowing.
    pub fn reachable_by(
        &self,
        src: ScopeId,
        regex: &LabelRegex,
        accept: &mut dyn FnMut(ScopeId, &Term) -> bool,
    ) -> Vec<ResolutionPath> {
        let mut out = Vec::new();
        let mut path = ResolutionPath::at(src);
        self.walk(src, regex, &mut path, accept, &mut out);
        out
    }

    fn walk(
        &self,
        cur: ScopeId,
        r: &LabelRegex,
        path: &mut ResolutionPath,
        accept: &mut dyn FnMut(ScopeId, &Term) -> bool,
        out: &mut Vec<ResolutionPath>,
    ) {
        if r.nullable() {
            if let Some(d) = self.data(cur) {
                if accept(cur, d) {
                    out.push(path.clone());
                }
            }
        }
        let edges: Vec<(Label, ScopeId)> = self.outgoing(cur).map(|(l, t)| (l.clone(), t)).collect();
        for (l, t) in edges {
            if path.uses_edge(cur, &l, t) {
                continue;
            }
            let d = r.derivative(&l);
            if d.is_empty_language() {
                continue;
            }
            path.steps.push((l, t));
            self.walk(t, &d, path, accept, out);
            path.steps.pop();
        }
    }

    pub fn resolve_by(
        &self,
        src: ScopeId,
        regex: &LabelRegex,
        accept: &mut dyn FnMut(ScopeId, &Term) -> bool,
        order: &LabelOrder,
    ) -> Vec<ResolutionPath> {
        let all = self.reachable_by(src, regex, accept);
        shadow(all, order)
    }

    /// Visible answers of a query: trails matching `regex` to scopes accepted
    /// by `filter`, minus those shadowed under `order`.
    pub fn resolve(
        &self,
        src: ScopeId,
        regex: &LabelRegex,
        filter: &DataFilter,
        order: &LabelOrder,
    ) -> Vec<ResolutionPath> {
        self.resolve_by(src, regex, &mut |_, d| filter.accepts(self, d), order)
    }

    /// Walks edges backwards from `target` along the reversed regex. Returns
    /// every scope from which a matching trail reaches `target` (with one
    /// witness path each), plus the potential edges that could still open
    /// further trails.
    pub fn resolve_backward(&self, target: ScopeId, regex: &LabelRegex, open: &[PotentialEdge]) -> BackwardResult {
        let inv = regex.invert();
        let mut res = BackwardResult::default();
        let mut seen = BTreeSet::new();
        let mut rev: Vec<(ScopeId, Label, ScopeId)> = Vec::new();
        self.walk_back(target, target, &inv, &mut rev, open, &mut res, &mut seen);
        res
    }

    #[allow(clippy::too_many_arguments)]
    fn walk_back(
        &self,
        target: ScopeId,
        cur: ScopeId,
        r: &LabelRegex,
        rev: &mut Vec<(ScopeId, Label, ScopeId)>,
        open: &[PotentialEdge],
        res: &mut BackwardResult,
        seen: &mut BTreeSet<ScopeId>,
    ) {
        if r.nullable() && seen.insert(cur) {
            let mut p = ResolutionPath::at(cur);
            for (_, l, dst) in rev.iter().rev() {
                p.steps.push((l.clone(), *dst));
            }
            debug_assert_eq!(p.target(), target);
            res.sources.push((cur, p));
        }
        for pe in open {
            if !r.derivative(&pe.label).is_empty_language() {
                res.blockers.insert(pe.clone());
            }
        }
        let edges: Vec<(ScopeId, Label)> = self.incoming(cur).map(|(s, l)| (s, l.clone())).collect();
        for (src, l) in edges {
            if rev.iter().any(|e| e.0 == src && e.1 == l && e.2 == cur) {
                continue;
            }
            let d = r.derivative(&l);
            if d.is_empty_language() {
                continue;
            }
            rev.push((src, l, cur));
            self.walk_back(target, src, &d, rev, open, res, seen);
            rev.pop();
        }
    }

    /// (scope, label) pairs a query from `src` could still extend through if
    /// such an edge were added: every reachable product state contributes
    /// the first set of its residual regex.
    pub fn critical_edges(&self, src: ScopeId, regex: &LabelRegex) -> BTreeSet<(ScopeId, Label)> {
        let mut out = BTreeSet::new();
        let mut seen: HashSet<(ScopeId, LabelRegex)> = HashSet::new();
        let mut stack = vec![(src, regex.clone())];
        while let Some((s, r)) = stack.pop() {
            if !seen.insert((s, r.clone())) {
                continue;
            }
            for l in r.first() {
                out.insert((s, l));
            }
            for (l, t) in self.outgoing(s) {
                let d = r.derivative(l);
                if !d.is_empty_language() {
                    stack.push((t, d));
                }
            }
        }
        out
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph scopes {\n  node [shape=box];\n");
        for s in self.scopes() {
            let d = self.data(s).map(|d| d.to_string()).unwrap_or_default();
            out.push_str(&format!("  s{} [label=\"s{} ↦ {}\"];\n", s.0, s.0, escape(&d)));
        }
        for (s, l, t) in &self.out {
            out.push_str(&format!("  s{} -> s{} [label=\"{}\"];\n", s.0, t.0, escape(l.name())));
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Removes every path shadowed by another: compare at the first position
/// where the label sequences differ, end of path counting as `$`.
pub fn shadow(all: Vec<ResolutionPath>, order: &LabelOrder) -> Vec<ResolutionPath> {
    let words: Vec<Vec<Label>> = all.iter().map(|p| p.labels()).collect();
    all.iter()
        .enumerate()
        .filter(|(i, _)| !words.iter().any(|q| shadows(q, &words[*i], order)))
        .map(|(_, p)| p.clone())
        .collect()
}

/// Is a path labelled `q` strictly preferred over one labelled `p`?
pub fn shadows(q: &[Label], p: &[Label], order: &LabelOrder) -> bool {
    let end = Label::end();
    let n = q.len().max(p.len());
    for i in 0..=n {
        let a = q.get(i).unwrap_or(&end);
        let b = p.get(i).unwrap_or(&end);
        if a != b {
            return order.lt(a, b);
        }
        if a.is_end() {
            return false;
        }
    }
    false
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BackwardResult {
    pub sources: Vec<(ScopeId, ResolutionPath)>,
    pub blockers: BTreeSet<PotentialEdge>,
}

/// An edge that pending constraints may still add. `source: None` means the
/// source scope is not yet known and may be any scope.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PotentialEdge {
    pub source: Option<ScopeId>,
    pub label: Label,
}

impl fmt::Display for PotentialEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.source {
            Some(s) => write!(f, "({s}, {})", self.label),
            None => write!(f, "(?, {})", self.label),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ResolutionPath {
    pub start: ScopeId,
    pub steps: Vec<(Label, ScopeId)>,
}

impl fmt::Debug for ResolutionPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.start)?;
        for (l, s) in &self.steps {
            write!(f, " -{l}-> {s}")?;
        }
        Ok(())
    }
}

impl ResolutionPath {
    pub fn at(s: ScopeId) -> ResolutionPath {
        ResolutionPath { start: s, steps: Vec::new() }
    }

    pub fn target(&self) -> ScopeId {
        self.steps.last().map(|s| s.1).unwrap_or(self.start)
    }

    pub fn labels(&self) -> Vec<Label> {
        self.steps.iter().map(|s| s.0.clone()).collect()
    }

    pub fn scopes(&self) -> Vec<ScopeId> {
        std::iter::once(self.start).chain(self.steps.iter().map(|s| s.1)).collect()
    }

    pub fn uses_edge(&self, src: ScopeId, l: &Label, dst: ScopeId) -> bool {
        let mut cur = self.start;
        for (m, t) in &self.steps {
            if cur == src && m == l && *t == dst {
                return true;
            }
            cur = *t;
        }
        false
    }

    /// `path($s)` / `step(p, #L, $s)`.
    pub fn to_term(&self) -> Term {
        let mut t = Term::app("path", vec![Term::Scope(self.start)]);
        for (l, s) in &self.steps {
            t = Term::app("step", vec![t, Term::Label(l.clone()), Term::Scope(*s)]);
        }
        t
    }

    pub fn from_term(t: &Term) -> Option<ResolutionPath> {
        match t.as_app()? {
            ("path", [Term::Scope(s)]) => Some(ResolutionPath::at(*s)),
            ("step", [p, Term::Label(l), Term::Scope(s)]) => {
                let mut p = ResolutionPath::from_term(p)?;
                p.steps.push((l.clone(), *s));
                Some(p)
            }
            _ => None,
        }
    }
}

/// A strict partial order on labels, stored transitively closed.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelOrder {
    pub name: Option<String>,
    pairs: BTreeSet<(Label, Label)>,
}

impl fmt::Debug for LabelOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.name {
            Some(n) => write!(f, "{n}"),
            None => write!(f, "{:?}", self.pairs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("label order is cyclic at {0}")]
pub struct CyclicOrder(pub Label);

impl LabelOrder {
    pub fn empty() -> LabelOrder {
        LabelOrder::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Result<LabelOrder, CyclicOrder> {
        let mut set: BTreeSet<(Label, Label)> = pairs.into_iter().collect();
        loop {
            let mut add = Vec::new();
            for (a, b) in &set {
                for (c, d) in set.range((b.clone(), Label::new(""))..) {
                    if c != b {
                        break;
                    }
                    if !set.contains(&(a.clone(), d.clone())) {
                        add.push((a.clone(), d.clone()));
                    }
                }
            }
            if add.is_empty() {
                break;
            }
            set.extend(add);
        }
        if let Some((a, _)) = set.iter().find(|(a, b)| a == b) {
            return Err(CyclicOrder(a.clone()));
        }
        Ok(LabelOrder { name: None, pairs: set })
    }

    pub fn named(mut self, name: &str) -> LabelOrder {
        self.name = Some(name.to_string());
        self
    }

    pub fn lt(&self, a: &Label, b: &Label) -> bool {
        self.pairs.contains(&(a.clone(), b.clone()))
    }

    pub fn labels(&self) -> BTreeSet<Label> {
        self.pairs.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect()
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DataFilter {
    pub binder: Var,
    pub body: EqConstraint,
}

impl fmt::Debug for DataFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) => {}", self.binder, self.body)
    }
}

impl DataFilter {
    pub fn accepts(&self, g: &ScopeGraph, data: &Term) -> bool {
        self.eval(g, data).is_ok()
    }

    pub fn eval(&self, g: &ScopeGraph, data: &Term) -> Result<Substitution, crate::constraint::EvalError> {
        let body = self.body.subst(&Substitution::single(self.binder.clone(), data.clone()));
        eval_eq(g, &body)
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut vs = self.body.free_vars();
        vs.remove(&self.binder);
        vs
    }
}

/// Graph isomorphism modulo variable renaming in data terms. Backtracking
/// over candidate bijections, pruned by erased-data signatures and edges.
pub fn isomorphic(a: &ScopeGraph, b: &ScopeGraph) -> bool {
    if a.scope_count() != b.scope_count() || a.edge_count() != b.edge_count() {
        return false;
    }
    fn sig(g: &ScopeGraph, s: ScopeId) -> (String, Vec<String>, Vec<String>) {
        let d = g.data(s).unwrap().map_vars(&mut |_| Some(Term::atom("_")));
        let shape = erase_scopes(&d);
        let mut o: Vec<String> = g.outgoing(s).map(|(l, _)| l.to_string()).collect();
        let mut i: Vec<String> = g.incoming(s).map(|(_, l)| l.to_string()).collect();
        o.sort();
        i.sort();
        (shape, o, i)
    }
    fn erase_scopes(t: &Term) -> String {
        match t {
            Term::Scope(_) => "$".into(),
            Term::App(f, xs) => format!("{f}({})", xs.iter().map(erase_scopes).collect::<Vec<_>>().join(",")),
            other => other.to_string(),
        }
    }
    let n = a.scope_count();
    let sa: Vec<_> = a.scopes().map(|s| sig(a, s)).collect();
    let sb: Vec<_> = b.scopes().map(|s| sig(b, s)).collect();
    let mut map: Vec<Option<ScopeId>> = vec![None; n];
    let mut used = vec![false; n];

    fn consistent(a: &ScopeGraph, b: &ScopeGraph, map: &[Option<ScopeId>], s: ScopeId) -> bool {
        let ms = map[s.0 as usize].unwrap();
        for (l, t) in a.outgoing(s) {
            if let Some(mt) = map[t.0 as usize] {
                if !b.has_edge(ms, l, mt) {
                    return false;
                }
            }
        }
        for (t, l) in a.incoming(s) {
            if let Some(mt) = map[t.0 as usize] {
                if !b.has_edge(mt, l, ms) {
                    return false;
                }
            }
        }
        true
    }

    fn data_match(a: &ScopeGraph, b: &ScopeGraph, map: &[Option<ScopeId>]) -> bool {
        let mut fwd: BTreeMap<Var, Var> = BTreeMap::new();
        let mut bwd: BTreeMap<Var, Var> = BTreeMap::new();
        fn go(
            x: &Term,
            y: &Term,
            map: &[Option<ScopeId>],
            fwd: &mut BTreeMap<Var, Var>,
            bwd: &mut BTreeMap<Var, Var>,
        ) -> bool {
            match (x, y) {
                (Term::Var(v), Term::Var(w)) => {
                    *fwd.entry(v.clone()).or_insert_with(|| w.clone()) == *w
                        && *bwd.entry(w.clone()).or_insert_with(|| v.clone()) == *v
                }
                (Term::Scope(s), Term::Scope(t)) => map[s.0 as usize] == Some(*t),
                (Term::App(f, xs), Term::App(g, ys)) => {
                    f == g && xs.len() == ys.len() && xs.iter().zip(ys.iter()).all(|(p, q)| go(p, q, map, fwd, bwd))
                }
                _ => x == y,
            }
        }
        a.scopes().all(|s| {
            let t = map[s.0 as usize].unwrap();
            go(a.data(s).unwrap(), b.data(t).unwrap(), map, &mut fwd, &mut bwd)
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn search(
        i: usize,
        a: &ScopeGraph,
        b: &ScopeGraph,
        sa: &[(String, Vec<String>, Vec<String>)],
        sb: &[(String, Vec<String>, Vec<String>)],
        map: &mut Vec<Option<ScopeId>>,
        used: &mut Vec<bool>,
    ) -> bool {
        if i == map.len() {
            return data_match(a, b, map);
        }
        for j in 0..map.len() {
            if used[j] || sa[i] != sb[j] {
                continue;
            }
            map[i] = Some(ScopeId(j as u32));
            used[j] = true;
            if consistent(a, b, map, ScopeId(i as u32)) && search(i + 1, a, b, sa, sb, map, used) {
                return true;
            }
            map[i] = None;
            used[j] = false;
        }
        false
    }
    search(0, a, b, &sa, &sb, &mut map, &mut used)
}
