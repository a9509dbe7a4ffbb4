use thiserror::Error;

use crate::ast::{DeclKey, LmDecl, LmExpr, LmProgram, LmRef, LockSite};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LmError {
    #[error("{line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: no declaration {key} (only {available} named {})", key.name)]
    UnknownLockTarget { key: DeclKey, available: usize, line: usize, col: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMS: [&str; 13] = ["[[", "]]", "::", "{", "}", "=", "+", ".", "*", "#", "(", ")", ";"];

fn lex(src: &str) -> Result<Vec<Spanned>, LmError> {
    let mut out = Vec::new();
    let (mut line, mut col) = (1, 1);
    let b = src.as_bytes();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        if c == b'\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if src[i..].starts_with("//") {
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let (l0, c0) = (line, col);
        if c.is_ascii_alphabetic() {
            let s = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            col += i - s;
            out.push(Spanned { tok: Tok::Ident(src[s..i].to_string()), line: l0, col: c0 });
            continue;
        }
        if c.is_ascii_digit() {
            let s = i;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            col += i - s;
            let n = src[s..i]
                .parse()
                .map_err(|_| LmError::Parse { line: l0, col: c0, msg: "integer literal too large".into() })?;
            out.push(Spanned { tok: Tok::Int(n), line: l0, col: c0 });
            continue;
        }
        match SYMS.iter().find(|s| src[i..].starts_with(**s)) {
            Some(s) => {
                i += s.len();
                col += s.len();
                out.push(Spanned { tok: Tok::Sym(s), line: l0, col: c0 });
            }
            None => {
                let ch = src[i..].chars().next().unwrap();
                return Err(LmError::Parse { line, col, msg: format!("unexpected character {ch:?}") });
            }
        }
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    locks: Vec<LockSite>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, LmError> {
        let (line, col) = self.here();
        Err(LmError::Parse { line, col, msg: msg.into() })
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if t != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Tok::Sym(x) if *x == s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), LmError> {
        if self.eat(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`, found {}", describe(self.peek())))
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == kw)
    }

    fn ident(&mut self) -> Result<String, LmError> {
        match self.peek().clone() {
            Tok::Ident(x) if !is_keyword(&x) => {
                self.pos += 1;
                Ok(x)
            }
            t => self.err(format!("expected identifier, found {}", describe(&t))),
        }
    }

    fn decls(&mut self, top: bool) -> Result<Vec<LmDecl>, LmError> {
        let mut out = Vec::new();
        loop {
            while self.eat(";") {}
            if self.is_kw("var") {
                self.pos += 1;
                let name = self.ident()?;
                self.expect("=")?;
                let expr = self.expr()?;
                out.push(LmDecl::Var { name, expr });
            } else if self.is_kw("mod") {
                self.pos += 1;
                let name = self.ident()?;
                self.expect("{")?;
                let mut imports = Vec::new();
                loop {
                    while self.eat(";") {}
                    if !self.is_kw("import") {
                        break;
                    }
                    self.pos += 1;
                    imports.push(self.reference()?);
                    self.expect("::")?;
                    self.expect("*")?;
                }
                let members = self.decls(false)?;
                self.expect("}")?;
                out.push(LmDecl::Mod { name, imports, members });
            } else if self.is_kw("import") {
                return self.err("imports must precede the declarations of a module");
            } else {
                let done = if top { *self.peek() == Tok::Eof } else { matches!(self.peek(), Tok::Sym("}")) };
                if done {
                    return Ok(out);
                }
                return self.err(format!("expected declaration, found {}", describe(self.peek())));
            }
        }
    }

    fn expr(&mut self) -> Result<LmExpr, LmError> {
        let mut e = self.atom()?;
        while self.eat("+") {
            let r = self.atom()?;
            e = LmExpr::Add(Box::new(e), Box::new(r));
        }
        Ok(e)
    }

    fn atom(&mut self) -> Result<LmExpr, LmError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.pos += 1;
                Ok(LmExpr::Num(n))
            }
            Tok::Sym("(") => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            _ => Ok(LmExpr::Ref(self.reference()?)),
        }
    }

    fn reference(&mut self) -> Result<LmRef, LmError> {
        let (line, col) = self.here();
        if self.eat("[[") {
            let name = self.ident()?;
            self.expect("#")?;
            let ordinal = match self.next() {
                Tok::Int(n) if n >= 1 => n as usize,
                _ => {
                    self.pos -= 1;
                    return self.err("expected a positive ordinal");
                }
            };
            self.expect("]]")?;
            let key = DeclKey { name, ordinal };
            self.locks.push(LockSite { key: key.clone(), line, col });
            return Ok(LmRef::Locked(key));
        }
        let mut names = vec![self.ident()?];
        while self.eat(".") {
            names.push(self.ident()?);
        }
        Ok(LmRef::Path(names))
    }
}

fn is_keyword(s: &str) -> bool {
    matches!(s, "var" | "mod" | "import")
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(x) => format!("`{x}`"),
        Tok::Int(n) => format!("`{n}`"),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::Eof => "end of input".into(),
    }
}

/// Parses an LM program. Locks are written `[[name#k]]` and must name an
/// existing declaration.
pub fn parse_lm(src: &str) -> Result<LmProgram, LmError> {
    let mut p = Parser { toks: lex(src)?, pos: 0, locks: Vec::new() };
    let decls = p.decls(true)?;
    let prog = LmProgram { decls, locks: p.locks };
    for site in &prog.locks {
        let available = prog.count_named(&site.key.name);
        if site.key.ordinal > available {
            return Err(LmError::UnknownLockTarget { key: site.key.clone(), available, line: site.line, col: site.col });
        }
    }
    Ok(prog)
}

/// Accepts a lone reference, e.g. from the command line.
pub fn parse_ref(src: &str) -> Result<LmRef, LmError> {
    let mut p = Parser { toks: lex(src)?, pos: 0, locks: Vec::new() };
    let r = p.reference()?;
    if *p.peek() != Tok::Eof {
        return p.err("trailing input after reference");
    }
    Ok(r)
}
