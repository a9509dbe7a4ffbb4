use std::fmt;

/// The `ordinal`-th declaration (variable or module) named `name`, counting
/// in pre-order from 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DeclKey {
    pub name: String,
    pub ordinal: usize,
}

impl fmt::Display for DeclKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.name, self.ordinal)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LmRef {
    Path(Vec<String>),
    Locked(DeclKey),
}

impl LmRef {
    pub fn path(names: &[&str]) -> LmRef {
        LmRef::Path(names.iter().map(|s| s.to_string()).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LmExpr {
    Num(i64),
    Add(Box<LmExpr>, Box<LmExpr>),
    Ref(LmRef),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LmDecl {
    Var { name: String, expr: LmExpr },
    Mod { name: String, imports: Vec<LmRef>, members: Vec<LmDecl> },
}

impl LmDecl {
    pub fn name(&self) -> &str {
        match self {
            LmDecl::Var { name, .. } | LmDecl::Mod { name, .. } => name,
        }
    }
}

/// Where a lock sits in the source, in order of appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LockSite {
    pub key: DeclKey,
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, Default)]
pub struct LmProgram {
    pub decls: Vec<LmDecl>,
    pub locks: Vec<LockSite>,
}

/// Source positions are not part of a program's identity.
impl PartialEq for LmProgram {
    fn eq(&self, other: &Self) -> bool {
        self.decls == other.decls
    }
}

impl Eq for LmProgram {}

impl LmProgram {
    /// Declarations in pre-order.
    pub fn preorder(&self) -> Vec<&LmDecl> {
        fn walk<'a>(ds: &'a [LmDecl], out: &mut Vec<&'a LmDecl>) {
            for d in ds {
                out.push(d);
                if let LmDecl::Mod { members, .. } = d {
                    walk(members, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.decls, &mut out);
        out
    }

    /// Pre-order key of every declaration, parallel to `preorder`.
    pub fn decl_keys(&self) -> Vec<DeclKey> {
        let mut counts = std::collections::BTreeMap::<&str, usize>::new();
        self.preorder()
            .into_iter()
            .map(|d| {
                let n = counts.entry(d.name()).or_default();
                *n += 1;
                DeclKey { name: d.name().to_string(), ordinal: *n }
            })
            .collect()
    }

    pub fn count_named(&self, name: &str) -> usize {
        self.preorder().iter().filter(|d| d.name() == name).count()
    }

    pub fn lock_count(&self) -> usize {
        let mut n = 0;
        self.visit_refs(&mut |r, _| {
            if matches!(r, LmRef::Locked(_)) {
                n += 1
            }
        });
        n
    }

    /// Every reference in source order; the flag marks import positions.
    pub fn visit_refs(&self, f: &mut dyn FnMut(&LmRef, bool)) {
        fn expr(e: &LmExpr, f: &mut dyn FnMut(&LmRef, bool)) {
            match e {
                LmExpr::Num(_) => {}
                LmExpr::Add(a, b) => {
                    expr(a, f);
                    expr(b, f);
                }
                LmExpr::Ref(r) => f(r, false),
            }
        }
        fn decls(ds: &[LmDecl], f: &mut dyn FnMut(&LmRef, bool)) {
            for d in ds {
                match d {
                    LmDecl::Var { expr: e, .. } => expr(e, f),
                    LmDecl::Mod { imports, members, .. } => {
                        for i in imports {
                            f(i, true);
                        }
                        decls(members, f);
                    }
                }
            }
        }
        decls(&self.decls, f)
    }

    /// Rebuilds the program with the n-th lock (source order) replaced.
    pub fn map_locks(&self, f: &mut dyn FnMut(usize, &DeclKey) -> LmRef) -> LmProgram {
        fn r(x: &LmRef, n: &mut usize, f: &mut dyn FnMut(usize, &DeclKey) -> LmRef) -> LmRef {
            match x {
                LmRef::Locked(k) => {
                    let out = f(*n, k);
                    *n += 1;
                    out
                }
                p => p.clone(),
            }
        }
        fn expr(e: &LmExpr, n: &mut usize, f: &mut dyn FnMut(usize, &DeclKey) -> LmRef) -> LmExpr {
            match e {
                LmExpr::Num(v) => LmExpr::Num(*v),
                LmExpr::Add(a, b) => {
                    let a = expr(a, n, f);
                    LmExpr::Add(Box::new(a), Box::new(expr(b, n, f)))
                }
                LmExpr::Ref(x) => LmExpr::Ref(r(x, n, f)),
            }
        }
        fn decls(ds: &[LmDecl], n: &mut usize, f: &mut dyn FnMut(usize, &DeclKey) -> LmRef) -> Vec<LmDecl> {
            ds.iter()
                .map(|d| match d {
                    LmDecl::Var { name, expr: e } => LmDecl::Var { name: name.clone(), expr: expr(e, n, f) },
                    LmDecl::Mod { name, imports, members } => LmDecl::Mod {
                        name: name.clone(),
                        imports: imports.iter().map(|i| r(i, n, f)).collect(),
                        members: decls(members, n, f),
                    },
                })
                .collect()
        }
        let mut n = 0;
        let mut kept = Vec::new();
        let ds = decls(&self.decls, &mut n, &mut |i, k| {
            let out = f(i, k);
            if matches!(out, LmRef::Locked(_)) {
                kept.push(i);
            }
            out
        });
        let locks = kept.into_iter().filter_map(|i| self.locks.get(i).cloned()).collect();
        LmProgram { decls: ds, locks }
    }
}
