//! α-canonical renderings of configurations, for deduplication and for
//! recognising repeated search states.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::solver::Configuration;
use crate::term::is_ident_byte;

/// Canonical text plus the original variable names in order of first
/// occurrence (index i was printed as `?#i`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonKey {
    pub text: String,
    pub vars: Vec<String>,
}

/// Renames `?name` occurrences to `?#0`, `?#1`, ... by first occurrence.
fn rename(src: &str, names: &mut BTreeMap<String, usize>, order: &mut Vec<String>, out: &mut String) {
    let b = src.as_bytes();
    let mut i = 0;
    while i < b.len() {
        if b[i] == b'?' && i + 1 < b.len() && is_ident_byte(b[i + 1]) {
            let start = i + 1;
            let mut j = start;
            while j < b.len() && is_ident_byte(b[j]) {
                j += 1;
            }
            let name = &src[start..j];
            let n = *names.entry(name.to_string()).or_insert_with(|| {
                order.push(name.to_string());
                order.len() - 1
            });
            let _ = write!(out, "?#{n}");
            i = j;
        } else {
            let c = src[i..].chars().next().unwrap();
            out.push(c);
            i += c.len_utf8();
        }
    }
}

fn erase(src: &str) -> String {
    let mut names = BTreeMap::new();
    let mut order = Vec::new();
    let mut out = String::new();
    rename(src, &mut names, &mut order, &mut out);
    let mut e = String::with_capacity(out.len());
    let b = out.as_bytes();
    let mut i = 0;
    while i < b.len() {
        if b[i] == b'?' && b.get(i + 1) == Some(&b'#') {
            e.push('?');
            i += 2;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
        } else {
            let c = out[i..].chars().next().unwrap();
            e.push(c);
            i += c.len_utf8();
        }
    }
    e
}

pub struct CanonOptions {
    pub hole_terms: bool,
    pub hole_paths: bool,
}

/// Constraints are treated as a multiset: sorted by their variable-erased
/// rendering before numbering variables.
pub fn canonical(k: &Configuration, opts: &CanonOptions) -> CanonKey {
    let mut items: Vec<(String, String)> =
        k.constraints.iter().map(|p| {
            let s = p.constraint.to_string();
            (erase(&s), s)
        }).collect();
    items.sort();
    let mut names = BTreeMap::new();
    let mut order = Vec::new();
    let mut out = String::new();
    for (h, st) in &k.hole_states {
        let _ = write!(out, "{h}:");
        if opts.hole_paths {
            let _ = write!(out, "{:?}", st.path);
        } else {
            let _ = write!(out, "{:?}", st.path.first());
        }
        if opts.hole_terms {
            out.push(' ');
            rename(&st.term.to_string(), &mut names, &mut order, &mut out);
        }
        out.push('\n');
    }
    for (_, s) in &items {
        rename(s, &mut names, &mut order, &mut out);
        out.push('\n');
    }
    out.push_str("--\n");
    for s in k.graph.scopes() {
        rename(&k.graph.data(s).unwrap().to_string(), &mut names, &mut order, &mut out);
        out.push('\n');
    }
    for (s, l, t) in k.graph.edges() {
        let _ = writeln!(out, "{s} {l} {t}");
    }
    out.push_str("--\n");
    for v in &order {
        if let Some(h) = k.holes.get(&crate::term::Var::new(v)) {
            let _ = writeln!(out, "{}:{h}", names[v]);
        }
    }
    CanonKey { text: out, vars: order }
}

pub fn state_key(k: &Configuration) -> CanonKey {
    canonical(k, &CanonOptions { hole_terms: true, hole_paths: true })
}

/// Ignores hole terms and paths except each hole's current head scope.
pub fn constraint_key(k: &Configuration) -> CanonKey {
    canonical(k, &CanonOptions { hole_terms: false, hole_paths: false })
}
