//! Direct LM name resolution over the AST, written without scope graphs or
//! constraints, plus a brute-force enumerator of references.

use std::collections::{BTreeMap, BTreeSet};

use refsynth_lm::{DeclKey, LmDecl, LmExpr, LmProgram, LmRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Qualified module steps look only at the module's own members.
    Plain,
    /// Qualified module steps may also climb lexically.
    RecMod,
}

#[derive(Debug, Default)]
struct Scope {
    parent: Option<usize>,
    mods: Vec<(String, usize, DeclKey)>,
    vars: Vec<(String, DeclKey)>,
    imports: Vec<LmRef>,
}

/// A use site: a reference, where it occurs, and whether it names a module.
#[derive(Debug, Clone)]
pub struct Use {
    pub scope: usize,
    pub reference: LmRef,
    pub module: bool,
}

pub struct World {
    scopes: Vec<Scope>,
    pub uses: Vec<Use>,
    variant: Variant,
}

impl World {
    pub fn new(p: &LmProgram, variant: Variant) -> World {
        let mut w = World { scopes: vec![Scope::default()], uses: Vec::new(), variant };
        let mut counts = BTreeMap::new();
        w.build(&p.decls, 0, &mut counts);
        w
    }

    fn key(counts: &mut BTreeMap<String, usize>, name: &str) -> DeclKey {
        let n = counts.entry(name.to_string()).or_insert(0);
        *n += 1;
        DeclKey { name: name.to_string(), ordinal: *n }
    }

    fn build(&mut self, ds: &[LmDecl], s: usize, counts: &mut BTreeMap<String, usize>) {
        for d in ds {
            match d {
                LmDecl::Var { name, expr } => {
                    let k = Self::key(counts, name);
                    self.scopes[s].vars.push((name.clone(), k));
                    self.expr_uses(expr, s);
                }
                LmDecl::Mod { name, imports, members } => {
                    let k = Self::key(counts, name);
                    let m = self.scopes.len();
                    self.scopes.push(Scope { parent: Some(s), imports: imports.clone(), ..Scope::default() });
                    self.scopes[s].mods.push((name.clone(), m, k));
                    for i in imports {
                        self.uses.push(Use { scope: m, reference: i.clone(), module: true });
                    }
                    self.build(members, m, counts);
                }
            }
        }
    }

    fn expr_uses(&mut self, e: &LmExpr, s: usize) {
        match e {
            LmExpr::Num(_) => {}
            LmExpr::Add(a, b) => {
                self.expr_uses(a, s);
                self.expr_uses(b, s);
            }
            LmExpr::Ref(r) => self.uses.push(Use { scope: s, reference: r.clone(), module: false }),
        }
    }

    /// Nearest enclosing scope (starting at `s`) declaring module `a`.
    fn lexical_modules(&self, mut s: usize, a: &str) -> Vec<(usize, DeclKey)> {
        loop {
            let found: Vec<_> =
                self.scopes[s].mods.iter().filter(|(n, _, _)| n == a).map(|(_, m, k)| (*m, k.clone())).collect();
            if !found.is_empty() {
                return found;
            }
            match self.scopes[s].parent {
                Some(p) => s = p,
                None => return Vec::new(),
            }
        }
    }

    fn unique<T: Clone>(xs: Vec<T>) -> Option<T> {
        (xs.len() == 1).then(|| xs[0].clone())
    }

    /// The module a (possibly qualified) module path denotes from `s`.
    pub fn module(&self, s: usize, names: &[String]) -> Option<(usize, DeclKey)> {
        let (last, init) = names.split_last()?;
        if init.is_empty() {
            return Self::unique(self.lexical_modules(s, last));
        }
        let (m, _) = self.module(s, init)?;
        match self.variant {
            Variant::Plain => Self::unique(
                self.scopes[m].mods.iter().filter(|(n, _, _)| n == last).map(|(_, m, k)| (*m, k.clone())).collect(),
            ),
            Variant::RecMod => Self::unique(self.lexical_modules(m, last)),
        }
    }

    fn local_vars(&self, s: usize, x: &str) -> Vec<DeclKey> {
        self.scopes[s].vars.iter().filter(|(n, _)| n == x).map(|(_, k)| k.clone()).collect()
    }

    /// Scopes module `m` imports, each import resolving uniquely.
    fn imported(&self, m: usize) -> Option<Vec<usize>> {
        self.scopes[m]
            .imports
            .iter()
            .map(|r| match r {
                LmRef::Path(ns) => self.module(m, ns).map(|(t, _)| t),
                LmRef::Locked(_) => None,
            })
            .collect()
    }

    /// Local declarations win over imported ones, which win over those of
    /// enclosing scopes.
    pub fn variable(&self, s: usize, names: &[String]) -> Option<DeclKey> {
        let (last, init) = names.split_last()?;
        if !init.is_empty() {
            let (m, _) = self.module(s, init)?;
            return Self::unique(self.local_vars(m, last));
        }
        let mut t = s;
        loop {
            let local = self.local_vars(t, last);
            if !local.is_empty() {
                return Self::unique(local);
            }
            let via: Vec<DeclKey> = self.imported(t)?.into_iter().flat_map(|i| self.local_vars(i, last)).collect();
            if !via.is_empty() {
                return Self::unique(via);
            }
            t = self.scopes[t].parent?;
        }
    }

    pub fn resolve(&self, u: &Use) -> Option<DeclKey> {
        let LmRef::Path(ns) = &u.reference else { return None };
        if u.module {
            self.module(u.scope, ns).map(|(_, k)| k)
        } else {
            self.variable(u.scope, ns)
        }
    }

    pub fn type_checks(&self) -> bool {
        self.uses.iter().all(|u| self.resolve(u).is_some())
    }

    pub fn var_names(&self) -> BTreeSet<String> {
        self.scopes.iter().flat_map(|s| s.vars.iter().map(|(n, _)| n.clone())).collect()
    }

    pub fn mod_names(&self) -> BTreeSet<String> {
        self.scopes.iter().flat_map(|s| s.mods.iter().map(|(n, _, _)| n.clone())).collect()
    }
}

pub fn type_checks(p: &LmProgram, variant: Variant) -> bool {
    p.lock_count() == 0 && World::new(p, variant).type_checks()
}

/// Every syntactic reference with at most `max_qualifiers` qualifiers,
/// ending in a variable name unless `module`.
pub fn candidates(w: &World, module: bool, max_qualifiers: usize) -> Vec<Vec<String>> {
    let mods: Vec<String> = w.mod_names().into_iter().collect();
    let leaves: Vec<String> = if module { mods.clone() } else { w.var_names().into_iter().collect() };
    let mut prefixes: Vec<Vec<String>> = vec![Vec::new()];
    let mut out = Vec::new();
    for depth in 0..=max_qualifiers {
        for p in &prefixes {
            for l in &leaves {
                let mut r = p.clone();
                r.push(l.clone());
                out.push(r);
            }
        }
        if depth < max_qualifiers {
            prefixes = prefixes
                .iter()
                .flat_map(|p| {
                    mods.iter().map(move |m| {
                        let mut q = p.clone();
                        q.push(m.clone());
                        q
                    })
                })
                .collect();
        }
    }
    out
}

/// For each lock (source order), the references that appear in some joint
/// filling of all locks with references of bounded depth such that the
/// program type-checks and every filled lock resolves to its target.
pub fn brute_force(p: &LmProgram, variant: Variant, max_qualifiers: usize) -> Vec<BTreeSet<String>> {
    let keys: Vec<DeclKey> = p.locks.iter().map(|l| l.key.clone()).collect();
    let mut module_pos = Vec::new();
    p.visit_refs(&mut |r, m| {
        if matches!(r, LmRef::Locked(_)) {
            module_pos.push(m)
        }
    });
    let w0 = World::new(&p.map_locks(&mut |_, _| LmRef::path(&["_"])), variant);
    let cands: Vec<Vec<Vec<String>>> = module_pos.iter().map(|m| candidates(&w0, *m, max_qualifiers)).collect();
    let mut out = vec![BTreeSet::new(); keys.len()];
    let mut choice = vec![0usize; keys.len()];
    if keys.is_empty() {
        return out;
    }
    // Plain product over all locks; the corpus keeps it small.
    loop {
        let filled = p.map_locks(&mut |i, _| LmRef::Path(cands[i][choice[i]].clone()));
        let w = World::new(&filled, variant);
        if w.type_checks() {
            let lock_uses = lock_uses(p, &w);
            let ok = lock_uses.iter().zip(&keys).all(|(u, k)| w.resolve(u).as_ref() == Some(k));
            if ok {
                for (i, c) in choice.iter().enumerate() {
                    out[i].insert(cands[i][*c].join("."));
                }
            }
        }
        let mut i = 0;
        loop {
            if i == keys.len() {
                return out;
            }
            choice[i] += 1;
            if choice[i] < cands[i].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// The uses of `w` that were locks in `p`, in lock order.
pub fn lock_uses(p: &LmProgram, w: &World) -> Vec<Use> {
    let mut is_lock = Vec::new();
    p.visit_refs(&mut |r, _| is_lock.push(matches!(r, LmRef::Locked(_))));
    // World::build visits imports before members and expressions left to
    // right, the same order as visit_refs.
    w.uses.iter().zip(is_lock).filter(|(_, l)| *l).map(|(u, _)| u.clone()).collect()
}
