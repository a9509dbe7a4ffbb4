use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use refsynth_core::graph::{isomorphic, PotentialEdge};
use refsynth_core::solver::{
    guard, potential_edges, solve_exhaustively, solve_traced, solve_with, step, HoleId, SolveStatus, StepOutcome,
    DEFAULT_FUEL,
};
use refsynth_core::term::{match_term, mgu, SetTerm};
use refsynth_core::{Configuration, Constraint, EqConstraint, Label, ScopeGraph, ScopeId, Specification, Term, Var};

const LM: &str = include_str!("../../lm/specs/lm.spec");

fn lm() -> Specification {
    Specification::parse(LM).unwrap()
}

fn t(s: &str) -> Term {
    Term::parse(s).unwrap()
}

fn list(items: &[String]) -> String {
    items.iter().rev().fold("nil".to_string(), |acc, d| format!("cons({d}, {acc})"))
}

fn var(x: &str, e: &str) -> String {
    format!("var({x}, did({x}, 1), {e})")
}

fn module(a: &str, imports: &[&str], members: &[String]) -> String {
    let imps: Vec<String> = imports.iter().map(|r| format!("import({r})")).collect();
    format!("mod({a}, did({a}, 1), {}, {})", list(&imps), list(members))
}

fn program(members: &[String]) -> Constraint {
    Constraint::pred("programOk", vec![t(&format!("prog({})", list(members)))])
}

fn solve(goal: Constraint) -> refsynth_core::solver::SolveResult {
    solve_exhaustively(&lm(), &Configuration::new(goal), DEFAULT_FUEL)
}

fn l(s: &str) -> Label {
    Label::new(s)
}

#[test]
fn number_literal_is_an_integer() {
    // Read the inferred type back through scope data.
    let g = Constraint::exists(
        &[Var::new("T"), Var::new("r")],
        Constraint::conjs([
            Constraint::pred("typeOfExpr", vec![Term::Scope(ScopeId(0)), t("num(3)"), Term::var("T")]),
            Constraint::NewScope(Term::var("r"), t("ty(?T)")),
        ]),
    );
    let mut k = Configuration::new(g);
    k.graph.add_scope(t("global()"));
    let r = solve_exhaustively(&lm(), &k, DEFAULT_FUEL);
    assert_eq!(r.status, SolveStatus::Success);
    assert_eq!(r.configuration.graph.data(ScopeId(1)), Some(&t("ty(int())")));
}

#[test]
fn singleton_of_two_fails() {
    let g = Constraint::exists(&[Var::new("x")], Constraint::Single(Term::var("x"), SetTerm::Lit(vec![t("a"), t("b")])));
    let r = solve(g);
    assert!(matches!(r.status, SolveStatus::Failure(_)), "{:?}", r.status);
}

#[test]
fn open_initializer_leaves_one_typing_goal() {
    let mut goal = program(&[module("A", &[], &[var("x", "?E"), var("y", "num(1)")])]);
    goal = Constraint::exists(&[Var::new("E")], goal);
    let r = solve(goal);
    assert_eq!(r.status, SolveStatus::Stuck);
    let k = &r.configuration;
    assert_eq!(k.constraints.len(), 1, "{k:?}");
    let p = k.constraint(0).as_pred().expect("a predicate");
    assert_eq!(&*p.symbol, "typeOfExpr");
    assert!(p.args[1].as_var().is_some());
    // The module scope, not the global one.
    let sa = p.args[0].as_scope().unwrap();
    assert_eq!(k.graph.data(sa).unwrap().to_string(), t("mod(A, did(A, 1))").to_string());
    assert_eq!(k.graph.scope_count(), 4);
    let mut labels: Vec<String> = k.graph.edges().map(|(_, l, _)| l.name().to_string()).collect();
    labels.sort();
    assert_eq!(labels, ["LEX", "MOD", "VAR", "VAR"]);
}

#[test]
fn ground_module_builds_its_graph() {
    let r = solve(program(&[module("A", &[], &[var("x", "num(1)")])]));
    assert_eq!(r.status, SolveStatus::Success);
    let mut want = ScopeGraph::new();
    let s0 = want.add_scope(t("global()"));
    let sa = want.add_scope(t("mod(A, did(A, 1))"));
    let sx = want.add_scope(t("decl(x, int(), did(x, 1))"));
    want.add_edge(s0, l("MOD"), sa).unwrap();
    want.add_edge(sa, l("LEX"), s0).unwrap();
    want.add_edge(sa, l("VAR"), sx).unwrap();
    assert!(isomorphic(&r.configuration.graph, &want), "{:?}", r.configuration.graph);
}

#[test]
fn dangling_reference_fails() {
    let r = solve(program(&[var("x", "num(1)"), var("y", "ref(z)")]));
    assert!(matches!(r.status, SolveStatus::Failure(_)), "{:?}", r.status);
    let r = solve(program(&[var("x", "num(1)"), var("y", "ref(x)")]));
    assert_eq!(r.status, SolveStatus::Success);
}

#[test]
fn hole_in_reference_is_stuck() {
    let g = Constraint::exists(&[Var::new("h")], program(&[var("x", "num(1)"), var("y", "?h")]));
    assert_eq!(solve(g).status, SolveStatus::Stuck);
}

#[test]
fn potential_edges_of_pending_constraints() {
    let spec = lm();
    let mut k = Configuration::new(Constraint::NewEdge(Term::Scope(ScopeId(1)), l("IMP"), Term::var("x")));
    k.push(Constraint::pred("importOk", vec![Term::Scope(ScopeId(4)), t("import(?r)")]));
    let got = potential_edges(&spec, &k, None);
    let want: BTreeSet<PotentialEdge> = [
        PotentialEdge { source: Some(ScopeId(1)), label: l("IMP") },
        PotentialEdge { source: Some(ScopeId(4)), label: l("IMP") },
    ]
    .into_iter()
    .collect();
    assert_eq!(got, want);
    let only_import = potential_edges(&spec, &k, Some(0));
    assert_eq!(only_import.len(), 1);
    let typing = Configuration::new(Constraint::pred("typeOfExpr", vec![Term::Scope(ScopeId(0)), t("?e"), t("?T")]));
    assert!(potential_edges(&spec, &typing, None).is_empty());
}

/// Two sibling modules, the second importing an unknown module with a
/// variable reference pending in it. Returns the stuck state.
fn import_pending() -> Configuration {
    let goal = Constraint::exists(
        &[Var::new("r"), Var::new("e")],
        program(&[
            module("A", &[], &[var("x", "num(1)")]),
            module("B", &["?r"], &[var("y", "ref(x)"), var("z", "?e")]),
        ]),
    );
    let r = solve(goal);
    assert_eq!(r.status, SolveStatus::Stuck);
    r.configuration
}

#[test]
fn pending_import_blocks_variable_query() {
    let spec = lm();
    let k = import_pending();
    let queries: Vec<usize> = (0..k.constraints.len()).filter(|i| k.constraint(*i).as_query().is_some()).collect();
    assert!(!queries.is_empty(), "{k:?}");
    for i in &queries {
        let q = k.constraint(*i).as_query().unwrap();
        // Module lookups never look through IMP; the variable query does.
        let through_import = q.regex.to_string().contains("IMP");
        assert_eq!(guard(&spec, &k, *i), !through_import, "{}", k.constraint(*i));
    }
    assert!(queries.iter().any(|i| !guard(&spec, &k, *i)));
}

#[test]
fn open_predicate_with_several_rules_waits() {
    let spec = lm();
    let open = Configuration::new(Constraint::pred("typeOfExpr", vec![Term::Scope(ScopeId(0)), t("?e"), t("?T")]));
    assert!(matches!(step(&spec, &open), StepOutcome::Stuck));
    let known = Configuration::new(Constraint::pred("typeOfExpr", vec![Term::Scope(ScopeId(0)), t("num(1)"), t("?T")]));
    match step(&spec, &known) {
        StepOutcome::Progressed(_, info) => assert_eq!(info.rule, "Op-Pred"),
        other => panic!("{other:?}"),
    }
    let none = Configuration::new(Constraint::pred("typeOfExpr", vec![Term::Scope(ScopeId(0)), t("nope"), t("?T")]));
    assert!(matches!(step(&spec, &none), StepOutcome::Failed(_)));
}

#[test]
fn joining_two_holes_is_incoherent() {
    let mut k = Configuration::new(Constraint::eq(Term::var("h0"), t("f(?h1)")));
    k.holes.insert(Var::new("h0"), HoleId(0));
    k.holes.insert(Var::new("h1"), HoleId(1));
    assert!(matches!(step(&lm(), &k), StepOutcome::Failed(_)));
    let th = mgu(&Term::var("h0"), &t("f(?h1)")).unwrap();
    let err = k.clone().apply(&th).unwrap_err();
    assert_eq!((err.a, err.b), (HoleId(0), HoleId(1)));

    // Binding a hole variable to a term over fresh variables hands them over.
    let mut ok = Configuration::new(Constraint::Emp);
    ok.holes.insert(Var::new("h0"), HoleId(0));
    ok.apply(&mgu(&Term::var("h0"), &t("ref(?n)")).unwrap()).unwrap();
    assert_eq!(ok.hole_of(&Var::new("n")), Some(HoleId(0)));
    assert_eq!(ok.hole_of(&Var::new("h0")), None);
}

/// Lock-free programs of a few shapes, some ill-typed.
fn corpus() -> Vec<Constraint> {
    vec![
        program(&[]),
        program(&[var("x", "num(1)")]),
        program(&[var("x", "num(1)"), var("y", "add(ref(x), num(2))")]),
        program(&[var("y", "ref(x)"), var("x", "num(1)")]),
        program(&[var("y", "ref(q)")]),
        program(&[module("A", &[], &[var("x", "num(1)")]), var("y", "qref(mref(A), x)")]),
        program(&[module("A", &[], &[var("x", "num(1)")]), module("B", &["mref(A)"], &[var("y", "ref(x)")])]),
        program(&[
            module("A", &[], &[module("C", &[], &[var("w", "num(3)")])]),
            var("v", "qref(mqref(mref(A), C), w)"),
        ]),
        program(&[module("A", &[], &[]), module("B", &["mref(Z)"], &[])]),
        program(&[var("x", "num(1)"), module("A", &[], &[var("x", "num(2)"), var("y", "ref(x)")])]),
        Constraint::exists(&[Var::new("h")], program(&[var("x", "num(1)"), var("y", "?h")])),
        Constraint::exists(
            &[Var::new("r")],
            program(&[module("A", &[], &[var("x", "num(1)")]), module("B", &["?r"], &[var("y", "ref(x)")])]),
        ),
    ]
}

fn same_status(a: &SolveStatus, b: &SolveStatus) -> bool {
    std::mem::discriminant(a) == std::mem::discriminant(b)
}

#[test]
fn corpus_statuses() {
    let want = ["S", "S", "S", "S", "F", "S", "S", "S", "F", "S", "T", "T"];
    for (g, w) in corpus().into_iter().zip(want) {
        let r = solve(g.clone());
        let got = match r.status {
            SolveStatus::Success => "S",
            SolveStatus::Failure(_) => "F",
            SolveStatus::Stuck => "T",
            SolveStatus::FuelExhausted => "E",
        };
        assert_eq!(got, w, "{g}");
    }
}

#[test]
fn steps_only_grow_the_graph() {
    let spec = lm();
    for g in corpus() {
        let mut prev = ScopeGraph::new();
        solve_traced(&spec, &Configuration::new(g), DEFAULT_FUEL, &mut |info, k| {
            let next = &k.graph;
            assert!(next.scope_count() >= prev.scope_count());
            for (s, lab, d) in prev.edges() {
                assert!(next.has_edge(*s, lab, *d), "{} lost an edge", info.rule);
            }
            for s in prev.scopes() {
                // Data may only become more instantiated.
                assert!(match_term(prev.data(s).unwrap(), next.data(s).unwrap()).is_some(), "{} changed data", info.rule);
            }
            prev = next.clone();
        });
    }
}

#[test]
fn eliminated_variables_disappear() {
    let spec = lm();
    for g in corpus() {
        solve_traced(&spec, &Configuration::new(g), DEFAULT_FUEL, &mut |info, k| {
            if let Constraint::Eq(EqConstraint::Eq(a, b)) = &*info.constraint {
                let fv = k.free_vars();
                let gone = |th: refsynth_core::Substitution| th.domain().all(|v| !fv.contains(v));
                let ok = mgu(a, b).map(gone).unwrap_or(false) || mgu(b, a).map(gone).unwrap_or(false);
                assert!(ok, "{} survives in {k:?}", info.constraint);
            }
        });
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn rewrite_order_does_not_matter(seed in any::<u64>(), which in 0usize..12) {
        let spec = lm();
        let g = corpus().swap_remove(which);
        let k = Configuration::new(g);
        let base = solve_exhaustively(&spec, &k, DEFAULT_FUEL);
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let other = solve_with(&spec, &k, DEFAULT_FUEL, &mut |n| rng.gen_range(0..n));
        prop_assert!(same_status(&base.status, &other.status), "{:?} vs {:?}", base.status, other.status);
        if !matches!(base.status, SolveStatus::Failure(_)) {
            prop_assert!(isomorphic(&base.configuration.graph, &other.configuration.graph));
            prop_assert_eq!(base.configuration.constraints.len(), other.configuration.constraints.len());
        }
    }
}
