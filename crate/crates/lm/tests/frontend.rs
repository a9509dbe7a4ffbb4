use std::fs;

use proptest::prelude::*;
use refsynth_core::graph::isomorphic;
use refsynth_core::solver::{solve_exhaustively, SolveStatus, DEFAULT_FUEL};
use refsynth_core::{Configuration, Label, ScopeGraph, Term};
use refsynth_lm::{
    corpus_dir, gen_constraint, lm_spec, parse_lm, pretty_program, recmod_spec, DeclKey, LmDecl, LmError, LmExpr,
    LmProgram, LmRef,
};

fn corpus() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "lm"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn status(src: &str) -> SolveStatus {
    let p = parse_lm(src).unwrap();
    let lp = gen_constraint(&p);
    solve_exhaustively(&lm_spec(), &Configuration::new(lp.goal), DEFAULT_FUEL).status
}

#[test]
fn corpus_parses_and_prints_back() {
    let files = corpus();
    assert!(files.len() >= 25, "{} programs", files.len());
    for (name, src) in &files {
        let p = parse_lm(src).unwrap_or_else(|e| panic!("{name}: {e}"));
        let text = pretty_program(&p);
        let back = parse_lm(&text).unwrap_or_else(|e| panic!("{name} reprinted: {e}\n{text}"));
        assert_eq!(back, p, "{name}");
        assert_eq!(back.lock_count(), p.lock_count());
        assert_eq!(pretty_program(&back), text, "{name}: printing is not stable");
    }
}

#[test]
fn every_corpus_program_has_a_lock() {
    for (name, src) in corpus() {
        assert!(parse_lm(&src).unwrap().lock_count() >= 1, "{name}");
    }
}

#[test]
fn locked_reference_example() {
    let p = parse_lm("mod A {\n  var x = [[y#1]]\n  var y = 1\n}").unwrap();
    assert_eq!(p.lock_count(), 1);
    let LmDecl::Mod { members, .. } = &p.decls[0] else { panic!() };
    assert_eq!(
        members[0],
        LmDecl::Var { name: "x".into(), expr: LmExpr::Ref(LmRef::Locked(DeclKey { name: "y".into(), ordinal: 1 })) }
    );
}

#[test]
fn shadowing_example_declarations() {
    let src = fs::read_to_string(corpus_dir().join("fig4a.lm")).unwrap();
    let p = parse_lm(&src).unwrap();
    assert_eq!(p.decls.len(), 3);
    assert_eq!(p.preorder().len(), 5);
    let keys: Vec<String> = p.decl_keys().iter().map(|k| k.to_string()).collect();
    assert_eq!(keys, ["x#1", "A#1", "x#2", "B#1", "y#1"]);
}

#[test]
fn lock_must_name_a_declaration() {
    assert!(matches!(
        parse_lm("var x = [[q#1]]"),
        Err(LmError::UnknownLockTarget { ref key, available: 0, line: 1, col: 9 }) if key.name == "q"
    ));
    assert!(matches!(parse_lm("var x = 1 var y = [[x#2]]"), Err(LmError::UnknownLockTarget { available: 1, .. })));
}

#[test]
fn well_typed_programs_solve() {
    for src in [
        "",
        "var x = 1",
        "var x = 1 var y = x + 2",
        "var y = x var x = 1",
        "mod A { var x = 1 } var y = A.x",
        "mod A { var x = 1 } mod B { import A::* var y = x }",
        "mod A { mod C { var w = 3 } } var v = A.C.w",
        "mod A { mod C { var w = 3 } } mod B { import A.C::* var u = w }",
        "var x = 42 mod A { var x = 0 } mod B { import A::* var y = x }",
        "mod x { var x = 1 } var y = x.x",
    ] {
        assert_eq!(status(src), SolveStatus::Success, "{src}");
    }
}

#[test]
fn dangling_names_fail() {
    for src in [
        "var y = q",
        "mod A { var x = 1 } var y = A.q",
        "mod A { } mod B { import Z::* }",
        "mod A { var v = 1 } mod B { import A::* } mod C { import B::* var t = v }",
        "var y = A.x",
        "mod A { var x = 1 } var y = x",
    ] {
        assert!(matches!(status(src), SolveStatus::Failure(_)), "{src}");
    }
}

#[test]
fn open_initializer_graph() {
    // Solving with the initializer left open stops at the module's graph.
    let p = parse_lm("mod A { var x = [[y#1]] var y = 1 }").unwrap();
    let lp = gen_constraint(&p);
    let r = solve_exhaustively(&lm_spec(), &Configuration::new(lp.goal), DEFAULT_FUEL);
    assert_eq!(r.status, SolveStatus::Stuck);
    let k = r.configuration;
    assert_eq!(k.constraints.len(), 1);
    let goal = k.constraint(0).as_pred().unwrap();
    assert_eq!(&*goal.symbol, "typeOfExpr");

    let t = |s: &str| Term::parse(s).unwrap();
    let mut want = ScopeGraph::new();
    let s0 = want.add_scope(t("global()"));
    let sa = want.add_scope(t("mod(A, did(A, 1))"));
    let sx = want.add_scope(t("decl(x, ?T, did(x, 1))"));
    let sy = want.add_scope(t("decl(y, int(), did(y, 1))"));
    for (a, l, b) in [(s0, "MOD", sa), (sa, "LEX", s0), (sa, "VAR", sx), (sa, "VAR", sy)] {
        want.add_edge(a, Label::new(l), b).unwrap();
    }
    assert!(isomorphic(&k.graph, &want), "{:?}", k.graph);
}

#[test]
fn empty_program_has_only_the_global_scope() {
    let lp = gen_constraint(&parse_lm("").unwrap());
    let r = solve_exhaustively(&lm_spec(), &Configuration::new(lp.goal), DEFAULT_FUEL);
    assert_eq!(r.status, SolveStatus::Success);
    assert_eq!(r.configuration.graph.scope_count(), 1);
    assert_eq!(r.configuration.graph.edge_count(), 0);
}

#[test]
fn recursive_import_rules_accept_self_import() {
    let p = parse_lm("mod A { import A::* var x = 1 var y = A.A.x }").unwrap();
    let r = solve_exhaustively(&recmod_spec(), &Configuration::new(gen_constraint(&p).goal), DEFAULT_FUEL);
    assert_eq!(r.status, SolveStatus::Success);
}

const NAMES: [&str; 4] = ["x", "y", "A", "B"];

fn name() -> impl Strategy<Value = String> {
    proptest::sample::select(&NAMES[..]).prop_map(str::to_string)
}

fn path() -> impl Strategy<Value = Vec<String>> {
    proptest::collection::vec(name(), 1..3)
}

fn expr() -> impl Strategy<Value = LmExpr> {
    let leaf = prop_oneof![(0i64..100).prop_map(LmExpr::Num), path().prop_map(|p| LmExpr::Ref(LmRef::Path(p)))];
    leaf.prop_recursive(2, 6, 2, |inner| {
        (inner.clone(), inner).prop_map(|(a, b)| LmExpr::Add(Box::new(a), Box::new(b)))
    })
}

fn decls() -> impl Strategy<Value = Vec<LmDecl>> {
    let var = (name(), expr()).prop_map(|(name, expr)| LmDecl::Var { name, expr });
    let leaf = proptest::collection::vec(var, 0..3);
    leaf.prop_recursive(2, 10, 3, |inner| {
        let module = (name(), proptest::collection::vec(path(), 0..2), inner.clone())
            .prop_map(|(name, is, members)| LmDecl::Mod { name, imports: is.into_iter().map(LmRef::Path).collect(), members });
        proptest::collection::vec(prop_oneof![module, (name(), expr()).prop_map(|(name, expr)| LmDecl::Var { name, expr })], 0..3)
    })
}

/// Turns single-name references to declared names into locks, as chosen
/// by `pick`.
fn lock_some(p: &LmProgram, pick: &mut dyn FnMut() -> bool) -> LmProgram {
    fn r(x: &LmRef, p: &LmProgram, pick: &mut dyn FnMut() -> bool) -> LmRef {
        match x {
            LmRef::Path(ns) if ns.len() == 1 && p.count_named(&ns[0]) > 0 && pick() => {
                LmRef::Locked(DeclKey { name: ns[0].clone(), ordinal: p.count_named(&ns[0]) })
            }
            other => other.clone(),
        }
    }
    fn e(x: &LmExpr, p: &LmProgram, pick: &mut dyn FnMut() -> bool) -> LmExpr {
        match x {
            LmExpr::Ref(x) => LmExpr::Ref(r(x, p, pick)),
            LmExpr::Add(a, b) => {
                let a = e(a, p, pick);
                LmExpr::Add(Box::new(a), Box::new(e(b, p, pick)))
            }
            n => n.clone(),
        }
    }
    fn ds(xs: &[LmDecl], p: &LmProgram, pick: &mut dyn FnMut() -> bool) -> Vec<LmDecl> {
        xs.iter()
            .map(|d| match d {
                LmDecl::Var { name, expr } => LmDecl::Var { name: name.clone(), expr: e(expr, p, pick) },
                LmDecl::Mod { name, imports, members } => LmDecl::Mod {
                    name: name.clone(),
                    imports: imports.iter().map(|i| r(i, p, pick)).collect(),
                    members: ds(members, p, pick),
                },
            })
            .collect()
    }
    LmProgram { decls: ds(&p.decls, p, pick), locks: Vec::new() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn printing_then_parsing_is_identity(ds in decls(), bits in proptest::collection::vec(any::<bool>(), 16)) {
        let plain = LmProgram { decls: ds, locks: Vec::new() };
        let mut it = bits.into_iter().cycle();
        let p = lock_some(&plain, &mut || it.next().unwrap());
        let text = pretty_program(&p);
        let back = parse_lm(&text);
        prop_assert!(back.is_ok(), "{:?}\n{}", back, text);
        let back = back.unwrap();
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(back.locks.len(), p.lock_count());
        let lp = gen_constraint(&back);
        prop_assert_eq!(lp.holes.len(), p.lock_count());
    }
}
