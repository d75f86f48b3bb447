//! Reader for the functional logic programs pl2flc emits, and for query
//! expressions over them.
//!
//! Layout: a declaration starts in the first column; `where` bindings are
//! aligned on the column of the first binding (or separated by `;`).

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;

use crate::ast::FreshNames;
use crate::flc::{ArithOp, Binding, CmpOp, DataDecl, Expr, FlcProgram, Pattern, Rule, LIST_CONS};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for ReadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for ReadError {}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Lower(String),
    Upper(String),
    Num(BigInt),
    Op(String),
    Punct(char),
    Wild,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
    first_on_line: bool,
}

const KEYWORDS: &[&str] = &["if", "then", "else", "let", "in", "where", "data"];

fn lex(src: &str) -> Result<Vec<Token>, ReadError> {
    let mut out = Vec::new();
    for (ln, line) in src.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        let mut first = true;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            let err = |m: String| ReadError { line: ln + 1, col, message: m };
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c == '-' && chars.get(i + 1) == Some(&'-') {
                break;
            }
            let tok = if c.is_ascii_digit() {
                let s: String = chars[i..].iter().take_while(|c| c.is_ascii_digit()).collect();
                i += s.len();
                Tok::Num(s.parse().unwrap())
            } else if c.is_alphabetic() || c == '_' {
                let s: String = chars[i..].iter().take_while(|c| c.is_alphanumeric() || **c == '_' || **c == '\'').collect();
                i += s.len();
                if s == "_" {
                    Tok::Wild
                } else if c.is_uppercase() {
                    Tok::Upper(s)
                } else {
                    Tok::Lower(s)
                }
            } else if c == '`' {
                let s: String = chars[i + 1..].iter().take_while(|c| c.is_alphanumeric()).collect();
                if chars.get(i + 1 + s.len()) != Some(&'`') {
                    return Err(err("unterminated backquoted operator".into()));
                }
                i += s.len() + 2;
                Tok::Op(s)
            } else if "()[],;{}".contains(c) {
                i += 1;
                Tok::Punct(c)
            } else {
                let s: String = chars[i..].iter().take_while(|c| "=:&><|+-*/".contains(**c)).collect();
                if s.is_empty() {
                    return Err(err(format!("unexpected character `{c}`")));
                }
                i += s.len();
                Tok::Op(s)
            };
            out.push(Token { tok, line: ln + 1, col, first_on_line: first });
            first = false;
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    /// A token starting a line at or left of this column ends the construct.
    limit: usize,
    functions: &'a [(String, usize)],
    in_pattern: bool,
    fresh: FreshNames,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Tok> {
        let t = self.toks.get(self.pos)?;
        if t.first_on_line && t.col <= self.limit {
            return None;
        }
        Some(&t.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&'a Tok> {
        let t = self.toks.get(self.pos + k)?;
        if t.first_on_line && t.col <= self.limit {
            return None;
        }
        Some(&t.tok)
    }

    fn error(&self, message: impl Into<String>) -> ReadError {
        let (line, col) = match self.toks.get(self.pos).or(self.toks.last()) {
            Some(t) => (t.line, t.col),
            None => (1, 1),
        };
        ReadError { line, col, message: message.into() }
    }

    fn bump(&mut self) -> &'a Tok {
        let t = &self.toks[self.pos].tok;
        self.pos += 1;
        t
    }

    fn is_op(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Op(o)) if o == s)
    }

    fn is_punct(&self, c: char) -> bool {
        self.peek() == Some(&Tok::Punct(c))
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Some(Tok::Lower(s)) if s == k)
    }

    fn expect_op(&mut self, s: &str) -> Result<(), ReadError> {
        if self.is_op(s) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected `{s}`")))
        }
    }

    fn expect_punct(&mut self, c: char) -> Result<(), ReadError> {
        if self.is_punct(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected `{c}`")))
        }
    }

    fn expect_kw(&mut self, k: &str) -> Result<(), ReadError> {
        if self.is_kw(k) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected `{k}`")))
        }
    }

    fn arity(&self, f: &str) -> Option<usize> {
        self.functions.iter().find(|(g, _)| g == f).map(|(_, n)| *n)
    }

    fn expr(&mut self) -> Result<Expr, ReadError> {
        if self.is_kw("if") {
            self.pos += 1;
            let c = self.expr()?;
            self.expect_kw("then")?;
            let t = self.expr()?;
            self.expect_kw("else")?;
            let e = self.expr()?;
            return Ok(Expr::ite(c, t, e));
        }
        if self.is_kw("let") {
            self.pos += 1;
            let mut bs = Vec::new();
            if self.is_punct('{') {
                self.pos += 1;
                loop {
                    bs.push(self.binding()?);
                    if self.is_punct(';') {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                self.expect_punct('}')?;
            } else {
                bs.push(self.binding()?);
            }
            self.expect_kw("in")?;
            let body = self.expr()?;
            return Ok(Expr::Let(bs, Box::new(body)));
        }
        let c = self.conj()?;
        if self.is_op("&>") {
            self.pos += 1;
            return Ok(Expr::guard(c, self.expr()?));
        }
        Ok(c)
    }

    fn conj(&mut self) -> Result<Expr, ReadError> {
        let a = self.relation()?;
        if self.is_op("&&") {
            self.pos += 1;
            return Ok(Expr::conj(a, self.conj()?));
        }
        Ok(a)
    }

    fn relation(&mut self) -> Result<Expr, ReadError> {
        let a = self.cons()?;
        let op = match self.peek() {
            Some(Tok::Op(o)) => o.as_str(),
            _ => return Ok(a),
        };
        let cmp = match op {
            "=:=" => None,
            "==" => Some(CmpOp::Eq),
            "/=" => Some(CmpOp::Ne),
            "<" => Some(CmpOp::Lt),
            "<=" => Some(CmpOp::Le),
            ">" => Some(CmpOp::Gt),
            ">=" => Some(CmpOp::Ge),
            _ => return Ok(a),
        };
        self.pos += 1;
        let b = self.cons()?;
        Ok(match cmp {
            None => Expr::unify(a, b),
            Some(c) => Expr::cmp(c, a, b),
        })
    }

    fn cons(&mut self) -> Result<Expr, ReadError> {
        let a = self.additive()?;
        if self.is_op(":") {
            self.pos += 1;
            let b = self.cons()?;
            return Ok(Expr::Cons(LIST_CONS.into(), vec![a, b]));
        }
        Ok(a)
    }

    fn additive(&mut self) -> Result<Expr, ReadError> {
        let mut a = if self.is_op("-") && matches!(self.peek_at(1), Some(Tok::Num(_))) {
            self.pos += 1;
            let Tok::Num(n) = self.bump() else { unreachable!() };
            Expr::Num(-n.clone())
        } else {
            self.multiplicative()?
        };
        loop {
            let op = if self.is_op("+") {
                ArithOp::Add
            } else if self.is_op("-") {
                ArithOp::Sub
            } else {
                return Ok(a);
            };
            self.pos += 1;
            a = Expr::arith(op, a, self.multiplicative()?);
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, ReadError> {
        let mut a = self.application()?;
        loop {
            let op = if self.is_op("*") {
                ArithOp::Mul
            } else if self.is_op("quot") || self.is_op("div") {
                ArithOp::Quot
            } else if self.is_op("mod") {
                ArithOp::Mod
            } else {
                return Ok(a);
            };
            self.pos += 1;
            a = Expr::arith(op, a, self.application()?);
        }
    }

    fn starts_atom(&self) -> bool {
        match self.peek() {
            Some(Tok::Lower(s)) => !KEYWORDS.contains(&s.as_str()),
            Some(Tok::Upper(_) | Tok::Num(_) | Tok::Wild) => true,
            Some(Tok::Punct(c)) => *c == '(' || *c == '[',
            _ => false,
        }
    }

    fn application(&mut self) -> Result<Expr, ReadError> {
        match self.peek() {
            Some(Tok::Upper(c)) if c != "True" && c != "False" => {
                let c = c.clone();
                self.pos += 1;
                let mut args = Vec::new();
                while self.starts_atom() {
                    args.push(self.atom()?);
                }
                Ok(Expr::Cons(c, args))
            }
            Some(Tok::Lower(f)) if !self.in_pattern && self.arity(f).is_some() => {
                let f = f.clone();
                let n = self.arity(&f).unwrap();
                self.pos += 1;
                let mut args = Vec::new();
                while self.starts_atom() {
                    args.push(self.atom()?);
                }
                if args.len() != n {
                    return Err(self.error(format!("`{f}` expects {n} arguments, found {}", args.len())));
                }
                Ok(Expr::Apply(f, args))
            }
            _ => {
                let a = self.atom()?;
                if self.starts_atom() {
                    return Err(self.error(format!("`{a}` cannot be applied")));
                }
                Ok(a)
            }
        }
    }

    fn atom(&mut self) -> Result<Expr, ReadError> {
        let Some(t) = self.peek() else { return Err(self.error("unexpected end of input")) };
        match t {
            Tok::Wild => {
                self.pos += 1;
                Ok(Expr::Var(self.fresh.fresh()))
            }
            Tok::Num(n) => {
                self.pos += 1;
                Ok(Expr::Num(n.clone()))
            }
            Tok::Upper(c) => {
                self.pos += 1;
                Ok(match c.as_str() {
                    "True" => Expr::True,
                    "False" => Expr::False,
                    _ => Expr::Cons(c.clone(), Vec::new()),
                })
            }
            Tok::Lower(s) if KEYWORDS.contains(&s.as_str()) => Err(self.error(format!("unexpected keyword `{s}`"))),
            Tok::Lower(s) => {
                self.pos += 1;
                if !self.in_pattern && self.arity(s) == Some(0) {
                    Ok(Expr::Apply(s.clone(), Vec::new()))
                } else if !self.in_pattern && self.arity(s).is_some() {
                    Err(self.error(format!("partial application of `{s}` is not supported")))
                } else {
                    Ok(Expr::Var(s.clone()))
                }
            }
            Tok::Punct('(') => {
                self.pos += 1;
                let saved = self.limit;
                self.limit = 0;
                let mut items = vec![self.expr()?];
                while self.is_punct(',') {
                    self.pos += 1;
                    items.push(self.expr()?);
                }
                self.limit = saved;
                self.expect_punct(')')?;
                Ok(Expr::tuple_or_single(items))
            }
            Tok::Punct('[') => {
                self.pos += 1;
                let mut items = Vec::new();
                if !self.is_punct(']') {
                    items.push(self.expr()?);
                    while self.is_punct(',') {
                        self.pos += 1;
                        items.push(self.expr()?);
                    }
                }
                self.expect_punct(']')?;
                Ok(Expr::list(items, Expr::nil()))
            }
            other => Err(self.error(format!("unexpected token {other:?}"))),
        }
    }

    fn pattern_with(&mut self, f: impl FnOnce(&mut Self) -> Result<Expr, ReadError>) -> Result<Pattern, ReadError> {
        let saved = self.in_pattern;
        self.in_pattern = true;
        let e = f(self);
        self.in_pattern = saved;
        let e = e?;
        to_pattern(&e).ok_or_else(|| self.error(format!("`{e}` is not a pattern")))
    }

    fn binding(&mut self) -> Result<Binding, ReadError> {
        let p = self.pattern_with(|s| s.cons())?;
        self.expect_op("=")?;
        Ok((p, self.expr()?))
    }

    /// Parses a rule; the function name token is taken without the layout check.
    fn rule(&mut self) -> Result<Rule, ReadError> {
        let Tok::Lower(fname) = self.bump().clone() else { return Err(self.error("expected a function name")) };
        let mut params = Vec::new();
        while self.starts_atom() {
            params.push(self.pattern_with(|s| s.atom())?);
        }
        let guard = if self.is_op("|") {
            self.pos += 1;
            Some(self.expr()?)
        } else {
            None
        };
        self.expect_op("=")?;
        let rhs = self.expr()?;
        let locals = self.where_block()?;
        Ok(Rule { fname, params, guard, locals, rhs })
    }

    fn where_block(&mut self) -> Result<Vec<Binding>, ReadError> {
        let mut locals = Vec::new();
        if !self.is_kw("where") {
            return Ok(locals);
        }
        self.pos += 1;
        let col = match self.toks.get(self.pos) {
            Some(t) => t.col,
            None => return Err(self.error("empty where block")),
        };
        let saved = self.limit;
        loop {
            self.limit = col - 1;
            let p = self.pattern_with(|s| s.cons())?;
            self.limit = col;
            self.expect_op("=")?;
            locals.push((p, self.expr()?));
            if self.is_punct(';') {
                self.pos += 1;
                continue;
            }
            match self.toks.get(self.pos) {
                Some(t) if t.first_on_line && t.col == col => continue,
                _ => break,
            }
        }
        self.limit = saved;
        Ok(locals)
    }

    /// Parses a data declaration after the `data` keyword.
    fn data(&mut self) -> Result<DataDecl, ReadError> {
        let typename = match self.peek() {
            Some(Tok::Upper(t)) => t.clone(),
            _ => return Err(self.error("expected a type name")),
        };
        self.pos += 1;
        self.expect_op("=")?;
        let mut constructors = Vec::new();
        loop {
            let c = match self.peek() {
                Some(Tok::Upper(c)) => c.clone(),
                _ => return Err(self.error("expected a constructor")),
            };
            self.pos += 1;
            let mut n = 0;
            while matches!(self.peek(), Some(Tok::Upper(_) | Tok::Lower(_))) {
                self.pos += 1;
                n += 1;
            }
            constructors.push((c, n));
            if self.is_op("|") {
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok(DataDecl { typename, constructors })
    }
}

fn to_pattern(e: &Expr) -> Option<Pattern> {
    Some(match e {
        Expr::Var(v) => Pattern::Var(v.clone()),
        Expr::Num(n) => Pattern::Num(n.clone()),
        Expr::True => Pattern::Cons("True".into(), Vec::new()),
        Expr::False => Pattern::Cons("False".into(), Vec::new()),
        Expr::Cons(c, args) => Pattern::Cons(c.clone(), args.iter().map(to_pattern).collect::<Option<_>>()?),
        Expr::Tuple(es) => Pattern::Tuple(es.iter().map(to_pattern).collect::<Option<_>>()?),
        _ => return None,
    })
}

/// Function names with arity, taken from the first-column identifiers.
fn scan_functions(toks: &[Token]) -> Result<Vec<(String, usize)>, ReadError> {
    let mut out: Vec<(String, usize)> = Vec::new();
    for (i, t) in toks.iter().enumerate() {
        if !(t.first_on_line && t.col == 1) {
            continue;
        }
        let Tok::Lower(f) = &t.tok else { continue };
        if f == "data" {
            continue;
        }
        let mut p = Parser { toks, pos: i + 1, limit: 1, functions: &[], in_pattern: true, fresh: FreshNames::new() };
        let mut n = 0;
        while p.starts_atom() {
            p.atom()?;
            n += 1;
        }
        match out.iter().find(|(g, _)| g == f) {
            Some((_, m)) if *m != n => {
                return Err(ReadError { line: t.line, col: 1, message: format!("`{f}` defined with {m} and {n} arguments") })
            }
            Some(_) => {}
            None => out.push((f.clone(), n)),
        }
    }
    Ok(out)
}

const FRESH_BASE: usize = 1_000_000;

pub fn read_program(src: &str) -> Result<FlcProgram, ReadError> {
    let toks = lex(src)?;
    let functions = scan_functions(&toks)?;
    let mut p = Parser { toks: &toks, pos: 0, limit: 1, functions: &functions, in_pattern: false, fresh: FreshNames::starting_at(FRESH_BASE) };
    let mut prog = FlcProgram::default();
    let mut declared = false;
    while p.pos < toks.len() {
        let t = &toks[p.pos];
        if !(t.first_on_line && t.col == 1) {
            return Err(p.error("unexpected token; declarations start in the first column"));
        }
        if matches!(&t.tok, Tok::Lower(s) if s == "data") {
            if declared {
                return Err(p.error("more than one data declaration"));
            }
            p.pos += 1;
            prog.datadecl = p.data()?;
            declared = true;
        } else {
            prog.rules.push(p.rule()?);
        }
    }
    Ok(prog)
}

/// Parses a query over `p`; lowercase names that `p` does not define are
/// free variables, `_` is an anonymous one.
pub fn read_query(src: &str, p: &FlcProgram) -> Result<Expr, ReadError> {
    let toks = lex(src)?;
    let functions = p.functions();
    let mut parser = Parser { toks: &toks, pos: 0, limit: 0, functions: &functions, in_pattern: false, fresh: FreshNames::starting_at(FRESH_BASE) };
    let e = parser.expr()?;
    if parser.pos < toks.len() {
        return Err(parser.error("unexpected input after the query"));
    }
    Ok(e)
}

/// Named free variables of a query, in order of first occurrence.
pub fn query_vars(e: &Expr) -> Vec<String> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    fn go(e: &Expr, bound: &BTreeSet<String>, out: &mut Vec<String>, seen: &mut BTreeSet<String>) {
        match e {
            Expr::Var(v) => {
                if !bound.contains(v) && !crate::ast::is_fresh_name(v) && seen.insert(v.clone()) {
                    out.push(v.clone());
                }
            }
            Expr::Let(bs, body) => {
                let mut inner = bound.clone();
                for (p, _) in bs {
                    inner.extend(p.vars());
                }
                for (_, x) in bs {
                    go(x, &inner, out, seen);
                }
                go(body, &inner, out, seen);
            }
            other => other.children().into_iter().for_each(|c| go(c, bound, out, seen)),
        }
    }
    go(e, &BTreeSet::new(), &mut out, &mut seen);
    out
}
