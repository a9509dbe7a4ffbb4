//! Brute-force query resolution: enumerate every trail (no edge used twice),
//! keep those whose word the backtracking matcher accepts and whose target
//! carries the wanted tag, then drop the ones another such trail shadows.

use rand::seq::SliceRandom;
use rand::Rng;
use refsynth_core::graph::ScopeId;
use refsynth_core::{DataFilter, EqConstraint, Label, LabelOrder, ScopeGraph, Term, Var};

use super::rx::{self, Rx, LABELS};

const TAGS: [&str; 3] = ["x", "y", "z"];
/// Index of the end-of-path pseudo label in the order matrix.
const END: usize = LABELS.len();

#[derive(Debug, Clone)]
pub struct Case {
    pub scopes: usize,
    /// Tag index per scope.
    pub tags: Vec<usize>,
    /// Distinct (source, label index, target) triples.
    pub edges: Vec<(usize, usize, usize)>,
    pub source: usize,
    pub regex: Rx,
    pub want: usize,
    /// Generating pairs of the order over label indices (END = `$`).
    pub order: Vec<(usize, usize)>,
}

pub fn random_case<R: Rng>(rng: &mut R, max_scopes: usize, max_edges: usize) -> Case {
    let scopes = rng.gen_range(1..=max_scopes);
    let tags = (0..scopes).map(|_| rng.gen_range(0..TAGS.len())).collect();
    let mut edges = Vec::new();
    for _ in 0..rng.gen_range(0..=max_edges) {
        let e = (rng.gen_range(0..scopes), rng.gen_range(0..LABELS.len()), rng.gen_range(0..scopes));
        if !edges.contains(&e) {
            edges.push(e);
        }
    }
    // Any subset of the pairs consistent with a random ranking is acyclic.
    let mut rank: Vec<usize> = (0..=END).collect();
    rank.shuffle(rng);
    let mut order = Vec::new();
    for a in 0..=END {
        for b in 0..=END {
            let include_end = a != END && b != END || rng.gen_bool(0.3);
            if rank[a] < rank[b] && include_end && rng.gen_bool(0.7) {
                order.push((a, b));
            }
        }
    }
    Case {
        scopes,
        tags,
        edges,
        source: rng.gen_range(0..scopes),
        regex: rx::random(rng, 3),
        want: rng.gen_range(0..TAGS.len()),
        order,
    }
}

fn label_name(i: usize) -> &'static str {
    if i == END {
        "$"
    } else {
        LABELS[i]
    }
}

/// Warshall closure of the generating pairs.
fn closure(pairs: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let n = END + 1;
    let mut lt = vec![vec![false; n]; n];
    for (a, b) in pairs {
        lt[*a][*b] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if lt[i][k] && lt[k][j] {
                    lt[i][j] = true;
                }
            }
        }
    }
    lt
}

/// A trail as its source plus (label index, target) steps.
pub type Trail = (usize, Vec<(usize, usize)>);

fn trails(c: &Case) -> Vec<Trail> {
    fn go(c: &Case, cur: usize, used: &mut Vec<bool>, steps: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        out.push(steps.clone());
        for (i, (s, l, t)) in c.edges.iter().enumerate() {
            if *s == cur && !used[i] {
                used[i] = true;
                steps.push((*l, *t));
                go(c, *t, used, steps, out);
                steps.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(c, c.source, &mut vec![false; c.edges.len()], &mut Vec::new(), &mut out);
    out.into_iter().map(|s| (c.source, s)).collect()
}

fn word(t: &Trail) -> Vec<usize> {
    t.1.iter().map(|(l, _)| *l).collect()
}

fn target(t: &Trail) -> usize {
    t.1.last().map(|s| s.1).unwrap_or(t.0)
}

/// `q` strictly preferred to `p`: first differing position, end as `$`.
fn preferred(lt: &[Vec<bool>], q: &[usize], p: &[usize]) -> bool {
    let mut i = 0;
    loop {
        let a = q.get(i).copied().unwrap_or(END);
        let b = p.get(i).copied().unwrap_or(END);
        if a != b {
            return lt[a][b];
        }
        if a == END {
            return false;
        }
        i += 1;
    }
}

pub fn expected(c: &Case) -> Vec<Trail> {
    let lt = closure(&c.order);
    let reach: Vec<Trail> = trails(c)
        .into_iter()
        .filter(|t| {
            let w: Vec<&str> = word(t).iter().map(|l| LABELS[*l]).collect();
            c.tags[target(t)] == c.want && rx::oracle(&c.regex, &w)
        })
        .collect();
    let mut vis: Vec<Trail> =
        reach.iter().filter(|p| !reach.iter().any(|q| preferred(&lt, &word(q), &word(p)))).cloned().collect();
    vis.sort();
    vis
}

pub struct Built {
    pub graph: ScopeGraph,
    pub ids: Vec<ScopeId>,
    pub order: LabelOrder,
    pub filter: DataFilter,
}

pub fn build(c: &Case) -> Built {
    let mut graph = ScopeGraph::new();
    let ids: Vec<ScopeId> = c.tags.iter().map(|t| graph.add_scope(Term::atom(TAGS[*t]))).collect();
    for (s, l, t) in &c.edges {
        graph.add_edge(ids[*s], Label::new(LABELS[*l]), ids[*t]).unwrap();
    }
    let order =
        LabelOrder::from_pairs(c.order.iter().map(|(a, b)| (Label::new(label_name(*a)), Label::new(label_name(*b))))).unwrap();
    let d = Var::new("d");
    let filter = DataFilter { binder: d.clone(), body: EqConstraint::Eq(Term::Var(d), Term::atom(TAGS[c.want])) };
    Built { graph, ids, order, filter }
}

pub fn actual(c: &Case) -> Vec<Trail> {
    let b = build(c);
    let idx = |s: ScopeId| b.ids.iter().position(|x| *x == s).unwrap();
    let label = |l: &Label| LABELS.iter().position(|x| *x == l.name()).unwrap();
    let mut out: Vec<Trail> = b
        .graph
        .resolve(b.ids[c.source], &rx::build(&c.regex), &b.filter, &b.order)
        .into_iter()
        .map(|p| (idx(p.start), p.steps.iter().map(|(l, s)| (label(l), idx(*s))).collect()))
        .collect();
    out.sort();
    out
}

/// `Err` describes the first disagreement.
pub fn check(c: &Case) -> Result<(), String> {
    let (want, got) = (expected(c), actual(c));
    if want == got {
        Ok(())
    } else {
        Err(format!("{c:?}\n  oracle {want:?}\n  resolve {got:?}"))
    }
}
