//! Textual predicate grammar.
//!
//! ```text
//! pred   := conj ("or" conj)*
//! conj   := unary ("and" unary)*
//! unary  := "not" unary
//!         | ("forall" | "exists") "(" IDENT ")" unary
//!         | "true" | "false"
//!         | "(" pred ")"
//!         | expr REL expr
//! expr   := term (("+" | "-") term)*
//! term   := factor ("*" factor)*          -- at most one non-constant factor
//! factor := "-" factor | INT | IDENT | "(" expr ")"
//! REL    := "<=" | ">=" | "=" | "==" | "<" | ">" | "!="
//! IDENT  := [A-Za-z_][A-Za-z0-9_.]* | '"' any-but-quote '"'
//! ```
//!
//! Quantifiers range over the naturals and bind a single parameter.
//! Strict relations and `!=` are rewritten into `<=`/`>=` over the integers.

use super::{Atom, FormulaError, LinearExpr, Predicate, Rel, Result, Var};
use crate::petri::Net;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(i128),
    Ident(String),
    Quoted(String),
    Sym(&'static str),
}

const SYMBOLS: [&str; 13] = ["<=", ">=", "==", "!=", "<", ">", "=", "+", "-", "*", "(", ")", "."];

fn lex(text: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    'outer: while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let v = text[start..i]
                .parse()
                .map_err(|_| FormulaError::Syntax { pos: start, msg: "integer literal out of range".into() })?;
            out.push((start, Tok::Int(v)));
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || matches!(bytes[i], b'_' | b'.')) {
                i += 1;
            }
            out.push((start, Tok::Ident(text[start..i].to_string())));
            continue;
        }
        if c == b'"' {
            let start = i;
            let end = text[i + 1..]
                .find('"')
                .ok_or(FormulaError::Syntax { pos: start, msg: "unterminated quoted name".into() })?;
            out.push((start, Tok::Quoted(text[i + 1..i + 1 + end].to_string())));
            i += end + 2;
            continue;
        }
        for s in SYMBOLS {
            if text[i..].starts_with(s) {
                out.push((i, Tok::Sym(s)));
                i += s.len();
                continue 'outer;
            }
        }
        return Err(FormulaError::Syntax { pos: i, msg: format!("unexpected character `{}`", c as char) });
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    resolve: &'a dyn Fn(&str) -> Option<usize>,
    bound: Option<String>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(FormulaError::Syntax { pos: self.offset(), msg: msg.into() })
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(x)) if *x == s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(w)) if w == kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.error(format!("expected `{s}`"))
        }
    }

    fn pred(&mut self) -> Result<Predicate> {
        let mut parts = vec![self.conj()?];
        while self.eat_kw("or") {
            parts.push(self.conj()?);
        }
        Ok(Predicate::or(parts))
    }

    fn conj(&mut self) -> Result<Predicate> {
        let mut parts = vec![self.unary()?];
        while self.eat_kw("and") {
            parts.push(self.unary()?);
        }
        Ok(Predicate::and(parts))
    }

    fn unary(&mut self) -> Result<Predicate> {
        if self.eat_kw("not") {
            return Ok(Predicate::not(self.unary()?));
        }
        if self.eat_kw("true") {
            return Ok(Predicate::True);
        }
        if self.eat_kw("false") {
            return Ok(Predicate::False);
        }
        for (kw, universal) in [("forall", true), ("exists", false)] {
            if self.eat_kw(kw) {
                if self.bound.is_some() {
                    return Err(FormulaError::NestedQuantifier);
                }
                self.expect_sym("(")?;
                let name = match self.peek() {
                    Some(Tok::Ident(n)) => n.clone(),
                    _ => return self.error("expected parameter name"),
                };
                self.pos += 1;
                self.expect_sym(")")?;
                self.eat_sym(".");
                self.bound = Some(name);
                let body = self.unary();
                self.bound = None;
                let body = Box::new(body?);
                return Ok(if universal { Predicate::Forall(body) } else { Predicate::Exists(body) });
            }
        }
        if self.peek() == Some(&Tok::Sym("(")) {
            let save = self.pos;
            self.pos += 1;
            if let Ok(p) = self.pred() {
                if self.eat_sym(")") && !self.at_expr_continuation() {
                    return Ok(p);
                }
            }
            self.pos = save;
        }
        self.atom()
    }

    fn at_expr_continuation(&self) -> bool {
        matches!(self.peek(), Some(Tok::Sym("+" | "-" | "*" | "<=" | ">=" | "==" | "!=" | "<" | ">" | "=")))
    }

    fn atom(&mut self) -> Result<Predicate> {
        let lhs = self.expr()?;
        let rel = match self.peek() {
            Some(Tok::Sym(s @ ("<=" | ">=" | "==" | "!=" | "<" | ">" | "="))) => *s,
            _ => return self.error("expected a relation"),
        };
        self.pos += 1;
        let rhs = self.expr()?;
        let one = LinearExpr::constant(1);
        Ok(match rel {
            "<=" => Atom::compare(lhs, Rel::Le, rhs),
            ">=" => Atom::compare(lhs, Rel::Ge, rhs),
            "=" | "==" => Atom::compare(lhs, Rel::Eq, rhs),
            "<" => Atom::compare(lhs, Rel::Le, rhs.minus(&one)),
            ">" => Atom::compare(lhs, Rel::Ge, rhs.plus(&one)),
            _ => Predicate::or([
                Atom::compare(lhs.clone(), Rel::Le, rhs.clone().minus(&one)),
                Atom::compare(lhs, Rel::Ge, rhs.plus(&one)),
            ]),
        })
    }

    fn expr(&mut self) -> Result<LinearExpr> {
        let mut acc = self.term()?;
        loop {
            if self.eat_sym("+") {
                acc = acc.plus(&self.term()?);
            } else if self.eat_sym("-") {
                acc = acc.minus(&self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<LinearExpr> {
        let mut acc = self.factor()?;
        loop {
            let at = self.offset();
            if !self.eat_sym("*") {
                return Ok(acc);
            }
            let rhs = self.factor()?;
            acc = if rhs.is_constant() {
                acc.scaled(rhs.constant_term())
            } else if acc.is_constant() {
                rhs.scaled(acc.constant_term())
            } else {
                return Err(FormulaError::NonLinear(at));
            };
        }
    }

    fn factor(&mut self) -> Result<LinearExpr> {
        if self.eat_sym("-") {
            return Ok(self.factor()?.scaled(-1));
        }
        if self.eat_sym("(") {
            let e = self.expr()?;
            self.expect_sym(")")?;
            return Ok(e);
        }
        match self.peek().cloned() {
            Some(Tok::Int(v)) => {
                self.pos += 1;
                Ok(LinearExpr::constant(v))
            }
            Some(Tok::Quoted(name)) => {
                self.pos += 1;
                match (self.resolve)(&name) {
                    Some(i) => Ok(LinearExpr::var(Var::Place(i))),
                    None => Err(FormulaError::UnknownPlace(name)),
                }
            }
            Some(Tok::Ident(name)) => {
                if matches!(name.as_str(), "and" | "or" | "not" | "true" | "false" | "forall" | "exists") {
                    return self.error(format!("unexpected keyword `{name}`"));
                }
                self.pos += 1;
                if self.bound.as_deref() == Some(name.as_str()) {
                    return Ok(LinearExpr::var(Var::Param));
                }
                match (self.resolve)(&name) {
                    Some(i) => Ok(LinearExpr::var(Var::Place(i))),
                    None => Err(FormulaError::UnknownPlace(name)),
                }
            }
            _ => self.error("expected an expression"),
        }
    }
}

/// Parses `text` with identifiers resolved to place indices by `resolve`.
pub fn parse_predicate_with(text: &str, resolve: &dyn Fn(&str) -> Option<usize>) -> Result<Predicate> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, end: text.len(), resolve, bound: None };
    let pred = p.pred()?;
    if p.pos != p.toks.len() {
        return p.error("trailing input");
    }
    Ok(pred)
}

/// Parses `text` against the places of `net`.
pub fn parse_predicate(text: &str, net: &Net) -> Result<Predicate> {
    parse_predicate_with(text, &|name| net.place_id(name))
}
