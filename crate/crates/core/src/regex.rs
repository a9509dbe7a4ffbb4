//! Regular expressions over edge labels, matched by Brzozowski derivatives.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(pub Arc<str>);

impl Label {
    pub fn new(name: &str) -> Label {
        Label(Arc::from(name))
    }

    /// The pseudo-label standing for "end of path" in label orders.
    pub fn end() -> Label {
        Label::new("$")
    }

    pub fn is_end(&self) -> bool {
        &*self.0 == "$"
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Built only through the smart constructors, which keep expressions in a
/// normal form (flattened, sorted, deduplicated alternatives; right-nested
/// concatenation) so the set of derivatives stays finite.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LabelRegex {
    Empty,
    Epsilon,
    Sym(Label),
    Concat(Arc<LabelRegex>, Arc<LabelRegex>),
    Alt(Arc<[LabelRegex]>),
    Star(Arc<LabelRegex>),
    Opt(Arc<LabelRegex>),
}

use LabelRegex as R;

impl LabelRegex {
    pub fn sym(l: &str) -> R {
        R::Sym(Label::new(l))
    }

    pub fn concat(a: R, b: R) -> R {
        match (a, b) {
            (R::Empty, _) | (_, R::Empty) => R::Empty,
            (R::Epsilon, r) | (r, R::Epsilon) => r,
            (R::Concat(x, y), b) => R::concat((*x).clone(), R::concat((*y).clone(), b)),
            (a, b) => R::Concat(Arc::new(a), Arc::new(b)),
        }
    }

    pub fn seq(items: impl IntoIterator<Item = R>) -> R {
        let items: Vec<R> = items.into_iter().collect();
        items.into_iter().rev().fold(R::Epsilon, |acc, r| R::concat(r, acc))
    }

    pub fn alt(a: R, b: R) -> R {
        R::alts([a, b])
    }

    pub fn alts(items: impl IntoIterator<Item = R>) -> R {
        let mut set = BTreeSet::new();
        for r in items {
            match r {
                R::Empty => {}
                R::Alt(xs) => set.extend(xs.iter().cloned()),
                r => {
                    set.insert(r);
                }
            }
        }
        match set.len() {
            0 => R::Empty,
            1 => set.into_iter().next().unwrap(),
            _ => R::Alt(set.into_iter().collect::<Vec<_>>().into()),
        }
    }

    pub fn star(r: R) -> R {
        match r {
            R::Empty | R::Epsilon => R::Epsilon,
            R::Star(_) => r,
            R::Opt(inner) => R::Star(inner),
            r => R::Star(Arc::new(r)),
        }
    }

    pub fn opt(r: R) -> R {
        match r {
            R::Empty | R::Epsilon => R::Epsilon,
            R::Star(_) | R::Opt(_) => r,
            r if r.nullable() => r,
            r => R::Opt(Arc::new(r)),
        }
    }

    pub fn nullable(&self) -> bool {
        match self {
            R::Empty | R::Sym(_) => false,
            R::Epsilon | R::Star(_) | R::Opt(_) => true,
            R::Concat(a, b) => a.nullable() && b.nullable(),
            R::Alt(xs) => xs.iter().any(R::nullable),
        }
    }

    pub fn derivative(&self, l: &Label) -> R {
        match self {
            R::Empty | R::Epsilon => R::Empty,
            R::Sym(m) => {
                if m == l {
                    R::Epsilon
                } else {
                    R::Empty
                }
            }
            R::Concat(a, b) => {
                let left = R::concat(a.derivative(l), (**b).clone());
                if a.nullable() {
                    R::alt(left, b.derivative(l))
                } else {
                    left
                }
            }
            R::Alt(xs) => R::alts(xs.iter().map(|x| x.derivative(l))),
            R::Star(a) => R::concat(a.derivative(l), self.clone()),
            R::Opt(a) => a.derivative(l),
        }
    }

    /// Labels that can begin a non-empty word of the language.
    pub fn first(&self) -> BTreeSet<Label> {
        let mut out = BTreeSet::new();
        self.first_into(&mut out);
        out
    }

    fn first_into(&self, out: &mut BTreeSet<Label>) {
        match self {
            R::Empty | R::Epsilon => {}
            R::Sym(l) => {
                out.insert(l.clone());
            }
            R::Concat(a, b) => {
                a.first_into(out);
                if a.nullable() {
                    b.first_into(out);
                }
            }
            R::Alt(xs) => xs.iter().for_each(|x| x.first_into(out)),
            R::Star(a) | R::Opt(a) => a.first_into(out),
        }
    }

    pub fn is_empty_language(&self) -> bool {
        match self {
            R::Empty => true,
            R::Epsilon | R::Sym(_) | R::Star(_) | R::Opt(_) => false,
            R::Concat(a, b) => a.is_empty_language() || b.is_empty_language(),
            R::Alt(xs) => xs.iter().all(R::is_empty_language),
        }
    }

    /// The regex of reversed words.
    pub fn invert(&self) -> R {
        match self {
            R::Empty | R::Epsilon | R::Sym(_) => self.clone(),
            R::Concat(a, b) => R::concat(b.invert(), a.invert()),
            R::Alt(xs) => R::alts(xs.iter().map(R::invert)),
            R::Star(a) => R::star(a.invert()),
            R::Opt(a) => R::opt(a.invert()),
        }
    }

    pub fn matches(&self, word: &[Label]) -> bool {
        let mut r = self.clone();
        for l in word {
            r = r.derivative(l);
            if matches!(r, R::Empty) {
                return false;
            }
        }
        r.nullable()
    }

    pub fn labels(&self) -> BTreeSet<Label> {
        let mut out = BTreeSet::new();
        self.labels_into(&mut out);
        out
    }

    fn labels_into(&self, out: &mut BTreeSet<Label>) {
        match self {
            R::Sym(l) => {
                out.insert(l.clone());
            }
            R::Concat(a, b) => {
                a.labels_into(out);
                b.labels_into(out);
            }
            R::Alt(xs) => xs.iter().for_each(|x| x.labels_into(out)),
            R::Star(a) | R::Opt(a) => a.labels_into(out),
            _ => {}
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            R::Alt(_) => 0,
            R::Concat(..) => 1,
            R::Star(_) | R::Opt(_) => 2,
            _ => 3,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "(")?;
            self.fmt_prec(f, 0)?;
            return write!(f, ")");
        }
        match self {
            R::Empty => write!(f, "~0"),
            R::Epsilon => write!(f, "e"),
            R::Sym(l) => write!(f, "{l}"),
            R::Concat(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, " ")?;
                b.fmt_prec(f, 1)
            }
            R::Alt(xs) => {
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " | ")?;
                    }
                    x.fmt_prec(f, 1)?;
                }
                Ok(())
            }
            R::Star(a) => {
                a.fmt_prec(f, 3)?;
                write!(f, "*")
            }
            R::Opt(a) => {
                a.fmt_prec(f, 3)?;
                write!(f, "?")
            }
        }
    }

    pub fn parse(src: &str) -> Result<R, RegexParseError> {
        let toks = tokenize(src)?;
        let mut p = RegexParser { toks: &toks, pos: 0 };
        let r = p.alt()?;
        if p.pos != toks.len() {
            return Err(RegexParseError(format!("unexpected `{}`", toks[p.pos])));
        }
        Ok(r)
    }
}

impl fmt::Display for LabelRegex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl fmt::Debug for LabelRegex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("regex syntax error: {0}")]
pub struct RegexParseError(pub String);

fn tokenize(src: &str) -> Result<Vec<String>, RegexParseError> {
    let mut out = Vec::new();
    let cs: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if "()|*?".contains(c) {
            out.push(c.to_string());
            i += 1;
        } else if c == '~' && cs.get(i + 1) == Some(&'0') {
            out.push("~0".into());
            i += 2;
        } else if c.is_alphanumeric() || c == '_' {
            let start = i;
            while i < cs.len() && (cs[i].is_alphanumeric() || cs[i] == '_') {
                i += 1;
            }
            out.push(cs[start..i].iter().collect());
        } else {
            return Err(RegexParseError(format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

/// Recursive descent over a token slice; also used by the specification
/// loader, which stops at the first token that cannot continue a regex.
pub(crate) struct RegexParser<'a, T: AsRef<str>> {
    pub toks: &'a [T],
    pub pos: usize,
}

impl<T: AsRef<str>> RegexParser<'_, T> {
    fn peek(&self) -> Option<&str> {
        self.toks.get(self.pos).map(|t| t.as_ref())
    }

    fn starts_atom(tok: &str) -> bool {
        tok == "(" || tok == "~0" || tok == "e" || tok.chars().next().is_some_and(|c| c.is_ascii_uppercase())
    }

    pub fn alt(&mut self) -> Result<R, RegexParseError> {
        let mut items = vec![self.concat()?];
        while self.peek() == Some("|") {
            self.pos += 1;
            items.push(self.concat()?);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { R::alts(items) })
    }

    fn concat(&mut self) -> Result<R, RegexParseError> {
        let mut items = Vec::new();
        while let Some(tok) = self.peek() {
            if !Self::starts_atom(tok) {
                break;
            }
            items.push(self.postfix()?);
        }
        if items.is_empty() {
            return Err(RegexParseError(match self.peek() {
                Some(t) => format!("expected regex, found `{t}`"),
                None => "expected regex".into(),
            }));
        }
        Ok(R::seq(items))
    }

    fn postfix(&mut self) -> Result<R, RegexParseError> {
        let mut r = self.atom()?;
        loop {
            match self.peek() {
                Some("*") => r = R::star(r),
                Some("?") => r = R::opt(r),
                _ => break,
            }
            self.pos += 1;
        }
        Ok(r)
    }

    fn atom(&mut self) -> Result<R, RegexParseError> {
        let tok = self.peek().ok_or_else(|| RegexParseError("expected regex".into()))?.to_string();
        self.pos += 1;
        match tok.as_str() {
            "(" => {
                let r = self.alt()?;
                if self.peek() != Some(")") {
                    return Err(RegexParseError("expected `)`".into()));
                }
                self.pos += 1;
                Ok(r)
            }
            "~0" => Ok(R::Empty),
            "e" => Ok(R::Epsilon),
            l => Ok(R::sym(l)),
        }
    }
}
