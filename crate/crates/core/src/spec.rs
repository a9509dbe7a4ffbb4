//! Specifications: labels, label orders, predicates and rules, loaded from a
//! small textual format.
//!
//! ```text
//! labels P I;
//! order ord: I < P;
//! init ok;
//! pred ok/1;
//! rule Ok: ok(?x) <- exists ?s. new ?s -> d(?x);
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::constraint::{Constraint, EqConstraint, Pred, Query, Rule};
use crate::graph::{DataFilter, LabelOrder};
use crate::regex::{Label, RegexParser};
use crate::solver::{footprints, Footprint};
use crate::term::{mgu_seq, SetTerm, SetVar, Sym, Term, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("{line}:{col}: {msg}")]
    ParseError { line: usize, col: usize, msg: String },
    #[error("arity mismatch for {pred}: declared {declared}, used with {found}")]
    ArityMismatch { pred: String, declared: usize, found: usize },
    #[error("rules {0} and {1} have overlapping heads")]
    OverlappingRules(String, String),
    #[error("unbound variable {var} in rule {rule}")]
    UnboundVariable { rule: String, var: String },
    #[error("unknown label {0}")]
    UnknownLabel(String),
    #[error("unknown predicate {0}")]
    UnknownPredicate(String),
    #[error("unknown order {0}")]
    UnknownOrder(String),
    #[error("invalid specification: {0}")]
    Invalid(String),
}

#[derive(Clone)]
pub struct Specification {
    pub labels: BTreeSet<Label>,
    pub orders: BTreeMap<String, LabelOrder>,
    pub predicates: BTreeMap<Sym, usize>,
    pub rules: Vec<Arc<Rule>>,
    pub init: Sym,
    by_symbol: BTreeMap<Sym, Vec<Arc<Rule>>>,
    footprints: BTreeMap<Sym, Footprint>,
}

impl fmt::Debug for Specification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Specification")
            .field("labels", &self.labels)
            .field("init", &self.init)
            .field("rules", &self.rules.iter().map(|r| r.name.clone()).collect::<Vec<_>>())
            .finish()
    }
}

impl Specification {
    pub fn parse(src: &str) -> Result<Specification, SpecError> {
        Parser::new(src)?.spec()
    }

    pub fn rules_for<'a>(&'a self, sym: &str) -> impl Iterator<Item = &'a Arc<Rule>> {
        self.by_symbol.get(sym).into_iter().flatten()
    }

    pub fn rule(&self, name: &str) -> Option<&Arc<Rule>> {
        self.rules.iter().find(|r| r.name == name)
    }

    pub fn footprint(&self, sym: &str) -> Option<&Footprint> {
        self.footprints.get(sym)
    }

    pub fn order(&self, name: &str) -> Option<&LabelOrder> {
        self.orders.get(name)
    }

    fn finish(mut self) -> Result<Specification, SpecError> {
        for r in &self.rules {
            self.by_symbol.entry(r.head.symbol.clone()).or_default().push(r.clone());
        }
        match self.predicates.get(&self.init) {
            None => return Err(SpecError::UnknownPredicate(self.init.to_string())),
            Some(1) => {}
            Some(n) => {
                return Err(SpecError::ArityMismatch { pred: self.init.to_string(), declared: *n, found: 1 })
            }
        }
        for rs in self.by_symbol.values() {
            for (i, a) in rs.iter().enumerate() {
                for b in &rs[i + 1..] {
                    if a.head == b.head && a.body == b.body {
                        continue;
                    }
                    let (ha, _) = a.freshen();
                    let (hb, _) = b.freshen();
                    if mgu_seq(&ha.args, &hb.args).is_ok() {
                        return Err(SpecError::OverlappingRules(a.name.clone(), b.name.clone()));
                    }
                }
            }
        }
        self.footprints = footprints(&self);
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    LabelLit(String),
    Sym(&'static str),
}

impl Tok {
    fn text(&self) -> String {
        match self {
            Tok::Ident(s) => s.clone(),
            Tok::Var(s) => format!("?{s}"),
            Tok::LabelLit(s) => format!("#{s}"),
            Tok::Sym(s) => s.to_string(),
        }
    }
}

const SYMS: &[&str] =
    &["-[", "]->", "->", "<-", "=>", "(", ")", ",", ";", ":", ".", "*", "=", "<", "{", "}", "|", "?", "/", "_"];

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    labels: BTreeSet<Label>,
    orders: BTreeMap<String, LabelOrder>,
    preds: BTreeMap<Sym, usize>,
    wild: usize,
    rule_name: String,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize, usize)>, SpecError> {
    let cs: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let ident = |c: char| c.is_alphanumeric() || c == '_' || c == '\'';
    while i < cs.len() {
        let c = cs[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && cs.get(i + 1) == Some(&'/') {
            while i < cs.len() && cs[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (l0, c0) = (line, col);
        let word = |i: &mut usize| {
            let start = *i;
            while *i < cs.len() && (ident(cs[*i]) || (cs[*i] == '-' && cs.get(*i + 1).is_some_and(|c| c.is_alphanumeric()))) {
                *i += 1;
            }
            cs[start..*i].iter().collect::<String>()
        };
        if (c == '?' || c == '#') && cs.get(i + 1).is_some_and(|c| c.is_alphanumeric() || *c == '_') {
            i += 1;
            let w = word(&mut i);
            col += 1 + w.chars().count();
            out.push((if c == '?' { Tok::Var(w) } else { Tok::LabelLit(w) }, l0, c0));
            continue;
        }
        if c == '$' {
            i += 1;
            col += 1;
            out.push((Tok::Ident("$".into()), l0, c0));
            continue;
        }
        if c == '~' && cs.get(i + 1) == Some(&'0') {
            i += 2;
            col += 2;
            out.push((Tok::Ident("~0".into()), l0, c0));
            continue;
        }
        if c == '_' && !cs.get(i + 1).is_some_and(|c| ident(*c)) {
            i += 1;
            col += 1;
            out.push((Tok::Sym("_"), l0, c0));
            continue;
        }
        if ident(c) {
            let w = word(&mut i);
            col += w.chars().count();
            out.push((Tok::Ident(w), l0, c0));
            continue;
        }
        let rest: String = cs[i..cs.len().min(i + 3)].iter().collect();
        match SYMS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                i += s.len();
                col += s.len();
                out.push((Tok::Sym(s), l0, c0));
            }
            None => return Err(SpecError::ParseError { line, col, msg: format!("unexpected character `{c}`") }),
        }
    }
    Ok(out)
}

/// Set variables are only recognised in set positions, so track which
/// `?names` were introduced by `as`.
type Scope = Vec<String>;

impl Parser {
    fn new(src: &str) -> Result<Parser, SpecError> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
            labels: BTreeSet::new(),
            orders: BTreeMap::new(),
            preds: BTreeMap::new(),
            wild: 0,
            rule_name: String::new(),
        })
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, SpecError> {
        let (line, col) = self
            .toks
            .get(self.pos)
            .or(self.toks.last())
            .map(|t| (t.1, t.2))
            .unwrap_or((1, 1));
        Err(SpecError::ParseError { line, col, msg: msg.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|t| &t.0)
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn is_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(x)) if x == s)
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), SpecError> {
        if self.is_sym(s) {
            self.pos += 1;
            Ok(())
        } else {
            let found = self.peek().map(|t| t.text()).unwrap_or_else(|| "end of input".into());
            self.err(format!("expected `{s}`, found `{found}`"))
        }
    }

    fn expect_kw(&mut self, s: &str) -> Result<(), SpecError> {
        if self.is_kw(s) {
            self.pos += 1;
            Ok(())
        } else {
            let found = self.peek().map(|t| t.text()).unwrap_or_else(|| "end of input".into());
            self.err(format!("expected `{s}`, found `{found}`"))
        }
    }

    fn ident(&mut self) -> Result<String, SpecError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            other => {
                let found = other.map(|t| t.text()).unwrap_or_else(|| "end of input".into());
                self.err(format!("expected identifier, found `{found}`"))
            }
        }
    }

    fn var(&mut self) -> Result<String, SpecError> {
        match self.peek() {
            Some(Tok::Var(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            other => {
                let found = other.map(|t| t.text()).unwrap_or_else(|| "end of input".into());
                self.err(format!("expected variable, found `{found}`"))
            }
        }
    }

    fn label(&mut self) -> Result<Label, SpecError> {
        let name = self.ident()?;
        let l = Label::new(&name);
        if !self.labels.contains(&l) {
            return Err(SpecError::UnknownLabel(name));
        }
        Ok(l)
    }

    fn spec(mut self) -> Result<Specification, SpecError> {
        let mut rules = Vec::new();
        let mut init = None;
        let mut names = BTreeSet::new();
        while self.peek().is_some() {
            let kw = self.ident()?;
            match kw.as_str() {
                "labels" => {
                    while !self.is_sym(";") {
                        let l = self.ident()?;
                        if l == "$" {
                            return self.err("`$` is reserved");
                        }
                        self.labels.insert(Label::new(&l));
                    }
                    self.pos += 1;
                }
                "order" => {
                    let name = self.ident()?;
                    self.expect_sym(":")?;
                    let mut pairs = Vec::new();
                    loop {
                        let a = self.order_label()?;
                        self.expect_sym("<")?;
                        let b = self.order_label()?;
                        pairs.push((a, b));
                        if self.is_sym(",") {
                            self.pos += 1;
                        } else {
                            break;
                        }
                    }
                    self.expect_sym(";")?;
                    let ord = LabelOrder::from_pairs(pairs).map_err(|e| SpecError::Invalid(e.to_string()))?;
                    self.orders.insert(name.clone(), ord.named(&name));
                }
                "init" => {
                    init = Some(self.ident()?);
                    self.expect_sym(";")?;
                }
                "pred" => {
                    loop {
                        let name = self.ident()?;
                        self.expect_sym("/")?;
                        let n = self.ident()?;
                        let n: usize = match n.parse() {
                            Ok(n) => n,
                            Err(_) => return self.err("arity expected"),
                        };
                        self.preds.insert(Arc::from(name.as_str()), n);
                        if self.is_sym(",") {
                            self.pos += 1;
                        } else {
                            break;
                        }
                    }
                    self.expect_sym(";")?;
                }
                "rule" => {
                    let r = self.rule()?;
                    if !names.insert(r.name.clone()) {
                        return Err(SpecError::Invalid(format!("duplicate rule name {}", r.name)));
                    }
                    rules.push(Arc::new(r));
                }
                other => {
                    self.pos -= 1;
                    return self.err(format!("unexpected `{other}`"));
                }
            }
        }
        let init = match init {
            Some(i) => i,
            None => return Err(SpecError::Invalid("missing `init` declaration".into())),
        };
        Specification {
            labels: self.labels,
            orders: self.orders,
            predicates: self.preds,
            rules,
            init: Arc::from(init.as_str()),
            by_symbol: BTreeMap::new(),
            footprints: BTreeMap::new(),
        }
        .finish()
    }

    fn order_label(&mut self) -> Result<Label, SpecError> {
        if self.is_kw("$") {
            self.pos += 1;
            return Ok(Label::end());
        }
        self.label()
    }

    fn rule(&mut self) -> Result<Rule, SpecError> {
        let name = self.ident()?;
        self.rule_name = name.clone();
        self.expect_sym(":")?;
        let mut head_wild = Vec::new();
        let head_t = self.term_with(&mut Some(&mut head_wild))?;
        let head = match head_t {
            Term::App(f, args) if self.preds.contains_key(&f) => Pred { symbol: f, args: args.to_vec() },
            other => return self.err(format!("rule head `{other}` is not a declared predicate")),
        };
        self.check_arity(&head)?;
        self.expect_sym("<-")?;
        let body = self.constraint(&mut Vec::new())?;
        self.expect_sym(";")?;
        let rule = Rule { name, head, body };
        check_closed(&rule)?;
        Ok(rule)
    }

    fn check_arity(&self, p: &Pred) -> Result<(), SpecError> {
        let declared = self.preds[&p.symbol];
        if declared != p.args.len() {
            return Err(SpecError::ArityMismatch { pred: p.symbol.to_string(), declared, found: p.args.len() });
        }
        Ok(())
    }

    fn fresh_wild(&mut self) -> Var {
        self.wild += 1;
        Var::new(&format!("_{}", self.wild))
    }

    /// `C := A ('*' A)*` with binder forms extending as far right as possible.
    fn constraint(&mut self, sets: &mut Scope) -> Result<Constraint, SpecError> {
        let first = self.atom_constraint(sets)?;
        if self.is_sym("*") {
            self.pos += 1;
            let rest = self.constraint(sets)?;
            Ok(Constraint::conj(first, rest))
        } else {
            Ok(first)
        }
    }

    fn atom_constraint(&mut self, sets: &mut Scope) -> Result<Constraint, SpecError> {
        if self.is_sym("(") {
            self.pos += 1;
            let c = self.constraint(sets)?;
            self.expect_sym(")")?;
            return Ok(c);
        }
        if self.is_kw("emp") {
            self.pos += 1;
            return Ok(Constraint::Emp);
        }
        if self.is_kw("false") {
            self.pos += 1;
            return Ok(Constraint::False);
        }
        if self.is_kw("exists") {
            self.pos += 1;
            let mut vs = vec![Var::new(&self.var()?)];
            while matches!(self.peek(), Some(Tok::Var(_))) {
                vs.push(Var::new(&self.var()?));
            }
            self.expect_sym(".")?;
            let body = self.constraint(sets)?;
            return Ok(Constraint::exists(&vs, body));
        }
        if self.is_kw("forall") {
            self.pos += 1;
            let x = Var::new(&self.var()?);
            self.expect_kw("in")?;
            let (s, wild) = self.set_term(sets)?;
            self.expect_sym(".")?;
            let body = self.constraint(sets)?;
            return Ok(Constraint::exists(&wild, Constraint::Forall(x, s, Arc::new(body))));
        }
        if self.is_kw("query") {
            self.pos += 1;
            return self.query(sets);
        }
        let mut wild = Vec::new();
        let c = if self.is_kw("new") {
            self.pos += 1;
            let s = self.term_with(&mut Some(&mut wild))?;
            if s.as_var().is_none() {
                return self.err("`new` expects a variable");
            }
            self.expect_sym("->")?;
            let d = self.term_with(&mut Some(&mut wild))?;
            Constraint::NewScope(s, d)
        } else if self.is_kw("single") && matches!(self.peek_at(1), Some(Tok::Sym("("))) {
            self.pos += 2;
            let t = self.term_with(&mut Some(&mut wild))?;
            self.expect_sym(",")?;
            let (s, w) = self.set_term(sets)?;
            wild.extend(w);
            self.expect_sym(")")?;
            Constraint::Single(t, s)
        } else {
            let t = self.term_with(&mut Some(&mut wild))?;
            if self.is_sym("=") {
                self.pos += 1;
                let u = self.term_with(&mut Some(&mut wild))?;
                Constraint::eq(t, u)
            } else if self.is_sym("-[") {
                self.pos += 1;
                let l = self.label()?;
                self.expect_sym("]->")?;
                let u = self.term_with(&mut Some(&mut wild))?;
                Constraint::NewEdge(t, l, u)
            } else {
                match t {
                    Term::App(f, args) if &*f == "dataOf" && args.len() == 2 => {
                        Constraint::Eq(EqConstraint::DataOf(args[0].clone(), args[1].clone()))
                    }
                    Term::App(f, args) if self.preds.contains_key(&f) => {
                        let p = Pred { symbol: f, args: args.to_vec() };
                        self.check_arity(&p)?;
                        Constraint::Pred(p)
                    }
                    Term::App(f, _) => return Err(SpecError::UnknownPredicate(f.to_string())),
                    other => return self.err(format!("expected constraint, found term `{other}`")),
                }
            }
        };
        Ok(Constraint::exists(&wild, c))
    }

    fn query(&mut self, sets: &mut Scope) -> Result<Constraint, SpecError> {
        let mut wild = Vec::new();
        let source = self.term_with(&mut Some(&mut wild))?;
        self.expect_kw("regex")?;
        let start = self.pos;
        let mut end = start;
        while let Some(t) = self.toks.get(end) {
            match &t.0 {
                Tok::Ident(s) if s == "order" || s == "filter" => break,
                _ => end += 1,
            }
        }
        let texts: Vec<String> = self.toks[start..end].iter().map(|t| t.0.text()).collect();
        let mut rp = RegexParser { toks: &texts, pos: 0 };
        let regex = match rp.alt() {
            Ok(r) if rp.pos == texts.len() => r,
            Ok(_) => {
                self.pos = start + rp.pos;
                return self.err("unexpected token in regex");
            }
            Err(e) => {
                self.pos = start + rp.pos.min(texts.len());
                return self.err(e.to_string());
            }
        };
        for l in regex.labels() {
            if !self.labels.contains(&l) {
                return Err(SpecError::UnknownLabel(l.to_string()));
            }
        }
        self.pos = end;
        let order = if self.is_kw("order") {
            self.pos += 1;
            let name = self.ident()?;
            match self.orders.get(&name) {
                Some(o) => o.clone(),
                None => return Err(SpecError::UnknownOrder(name)),
            }
        } else {
            LabelOrder::empty()
        };
        self.expect_kw("filter")?;
        self.expect_sym("(")?;
        let binder = Var::new(&self.var()?);
        self.expect_sym(")")?;
        self.expect_sym("=>")?;
        let body = self.eq_constraint()?;
        self.expect_kw("as")?;
        let result = self.var()?;
        self.expect_sym(".")?;
        sets.push(result.clone());
        let cont = self.constraint(sets);
        sets.pop();
        let q = Query {
            source,
            regex,
            filter: DataFilter { binder, body },
            order,
            result: SetVar::new(&result),
            cont: cont?,
        };
        Ok(Constraint::exists(&wild, Constraint::Query(Arc::new(q))))
    }

    fn eq_constraint(&mut self) -> Result<EqConstraint, SpecError> {
        let first = self.eq_atom()?;
        if self.is_sym("*") {
            self.pos += 1;
            let rest = self.eq_constraint()?;
            Ok(EqConstraint::Conj(Box::new(first), Box::new(rest)))
        } else {
            Ok(first)
        }
    }

    fn eq_atom(&mut self) -> Result<EqConstraint, SpecError> {
        if self.is_sym("(") {
            self.pos += 1;
            let e = self.eq_constraint()?;
            self.expect_sym(")")?;
            return Ok(e);
        }
        if self.is_kw("exists") {
            self.pos += 1;
            let mut vs = vec![Var::new(&self.var()?)];
            while matches!(self.peek(), Some(Tok::Var(_))) {
                vs.push(Var::new(&self.var()?));
            }
            self.expect_sym(".")?;
            let body = self.eq_constraint()?;
            return Ok(vs.into_iter().rev().fold(body, |acc, v| EqConstraint::Exists(v, Box::new(acc))));
        }
        let mut wild = Vec::new();
        let t = self.term_with(&mut Some(&mut wild))?;
        let e = if self.is_sym("=") {
            self.pos += 1;
            let u = self.term_with(&mut Some(&mut wild))?;
            EqConstraint::Eq(t, u)
        } else {
            match t {
                Term::App(f, args) if &*f == "dataOf" && args.len() == 2 => {
                    EqConstraint::DataOf(args[0].clone(), args[1].clone())
                }
                _ => return self.err("expected equality or dataOf in filter"),
            }
        };
        Ok(wild.into_iter().rev().fold(e, |acc, v| EqConstraint::Exists(v, Box::new(acc))))
    }

    fn set_term(&mut self, sets: &Scope) -> Result<(SetTerm, Vec<Var>), SpecError> {
        if self.is_sym("{") {
            self.pos += 1;
            let mut wild = Vec::new();
            let mut items = Vec::new();
            if !self.is_sym("}") {
                loop {
                    items.push(self.term_with(&mut Some(&mut wild))?);
                    if self.is_sym(",") {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
            }
            self.expect_sym("}")?;
            return Ok((SetTerm::Lit(items), wild));
        }
        let v = self.var()?;
        if !sets.contains(&v) {
            return Err(SpecError::UnboundVariable { rule: self.rule_name.clone(), var: format!("?{v}") });
        }
        Ok((SetTerm::Var(SetVar::new(&v)), Vec::new()))
    }

    /// Terms: `?x`, `_`, `#L`, `f`, `f(t, ...)`, `42`.
    fn term_with(&mut self, wild: &mut Option<&mut Vec<Var>>) -> Result<Term, SpecError> {
        match self.peek().cloned() {
            Some(Tok::Var(v)) => {
                self.pos += 1;
                Ok(Term::var(&v))
            }
            Some(Tok::Sym("_")) => {
                self.pos += 1;
                let v = self.fresh_wild();
                match wild {
                    Some(w) => w.push(v.clone()),
                    None => return self.err("wildcard not allowed here"),
                }
                Ok(Term::Var(v))
            }
            Some(Tok::LabelLit(l)) => {
                self.pos += 1;
                if !self.labels.contains(&Label::new(&l)) {
                    return Err(SpecError::UnknownLabel(l));
                }
                Ok(Term::Label(Label::new(&l)))
            }
            Some(Tok::Ident(f)) if f != "$" && f != "~0" => {
                self.pos += 1;
                let mut args = Vec::new();
                if self.is_sym("(") {
                    self.pos += 1;
                    if !self.is_sym(")") {
                        loop {
                            args.push(self.term_with(wild)?);
                            if self.is_sym(",") {
                                self.pos += 1;
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect_sym(")")?;
                }
                Ok(Term::app(&f, args))
            }
            other => {
                let found = other.map(|t| t.text()).unwrap_or_else(|| "end of input".into());
                self.err(format!("expected term, found `{found}`"))
            }
        }
    }
}

/// Every variable occurrence must be bound by the head or a binder.
fn check_closed(rule: &Rule) -> Result<(), SpecError> {
    let mut bound: BTreeSet<Var> = BTreeSet::new();
    for a in &rule.head.args {
        a.collect_vars(&mut bound);
    }
    let fv = rule.body.free_vars();
    if let Some(v) = fv.iter().find(|v| !bound.contains(v)) {
        return Err(SpecError::UnboundVariable { rule: rule.name.clone(), var: v.to_string() });
    }
    Ok(())
}
