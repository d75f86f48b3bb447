//! Reader for the supported Prolog subset.
//!
//! Standard syntax with a fixed operator table. Lists are desugared to
//! `'.'/2` and `[]`, every `_` becomes a distinct fresh variable, and
//! `(C -> T ; E)` becomes a [`Subgoal::IfThenElse`].

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use thiserror::Error;

use crate::ast::{
    Clause, Directive, FreshNames, Goal, Literal, LogicProgram, Subgoal, Term, FRESH_PREFIX,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceSpan {
    pub file: PathBuf,
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file.display(), self.line, self.column)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{span}: {message}")]
pub struct ParseError {
    pub span: SourceSpan,
    pub message: String,
}

pub(crate) fn is_symbol_char(c: char) -> bool {
    "+-*/\\^<>=~:.?@#&$".contains(c)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Atom(String),
    /// Quoted atoms never act as operators.
    QAtom(String),
    Var(String),
    Int(BigInt),
    Punct(char),
    End,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
    /// Whitespace or a comment precedes the token.
    layout: bool,
}

struct Lexer<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
    file: &'a Path,
}

impl<'a> Lexer<'a> {
    fn new(src: &str, file: &'a Path) -> Self {
        Lexer { chars: src.chars().collect(), pos: 0, line: 1, col: 1, file }
    }

    fn err(&self, line: usize, col: usize, msg: impl Into<String>) -> ParseError {
        ParseError {
            span: SourceSpan { file: self.file.to_path_buf(), line, column: col },
            message: msg.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, k: usize) -> Option<char> {
        self.chars.get(self.pos + k).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_layout(&mut self) -> Result<bool, ParseError> {
        let mut skipped = false;
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                    skipped = true;
                }
                Some('%') => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                    skipped = true;
                }
                Some('/') if self.peek_at(1) == Some('*') => {
                    let (l, c) = (self.line, self.col);
                    self.bump();
                    self.bump();
                    loop {
                        match self.bump() {
                            None => return Err(self.err(l, c, "unterminated block comment")),
                            Some('*') if self.peek() == Some('/') => {
                                self.bump();
                                break;
                            }
                            _ => {}
                        }
                    }
                    skipped = true;
                }
                _ => return Ok(skipped),
            }
        }
    }

    fn tokens(mut self) -> Result<Vec<Token>, ParseError> {
        let mut out = Vec::new();
        loop {
            let layout = self.skip_layout()? || self.pos == 0;
            let (line, col) = (self.line, self.col);
            let Some(c) = self.peek() else {
                out.push(Token { tok: Tok::Eof, line, col, layout });
                return Ok(out);
            };
            let tok = if c.is_ascii_digit() {
                self.number(line, col)?
            } else if c == '_' || c.is_uppercase() {
                Tok::Var(self.word())
            } else if c.is_alphabetic() {
                Tok::Atom(self.word())
            } else if c == '\'' {
                Tok::QAtom(self.quoted(line, col)?)
            } else if c == '"' {
                return Err(self.err(line, col, "string literals are not supported"));
            } else if "()[]{},|".contains(c) {
                self.bump();
                Tok::Punct(c)
            } else if c == '!' || c == ';' {
                self.bump();
                Tok::Atom(c.to_string())
            } else if c == '.'
                && self.peek_at(1).map_or(true, |n| n.is_whitespace() || n == '%')
            {
                self.bump();
                Tok::End
            } else if is_symbol_char(c) {
                let mut s = String::new();
                while let Some(c) = self.peek().filter(|c| is_symbol_char(*c)) {
                    s.push(c);
                    self.bump();
                }
                Tok::Atom(s)
            } else {
                return Err(self.err(line, col, format!("unexpected character `{c}`")));
            };
            out.push(Token { tok, line, col, layout });
        }
    }

    fn word(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek().filter(|c| c.is_alphanumeric() || *c == '_') {
            s.push(c);
            self.bump();
        }
        s
    }

    fn number(&mut self, line: usize, col: usize) -> Result<Tok, ParseError> {
        let mut s = String::new();
        while let Some(c) = self.peek().filter(|c| c.is_ascii_digit() || *c == '_') {
            if c != '_' {
                s.push(c);
            }
            self.bump();
        }
        if self.peek() == Some('.') && self.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
            return Err(self.err(line, col, "floating-point numbers are not supported"));
        }
        if self.peek() == Some('\'') || matches!(self.peek(), Some('e' | 'E')) && s == "0" {
            return Err(self.err(line, col, "character codes and special number syntax are not supported"));
        }
        Ok(Tok::Int(s.parse().expect("digits")))
    }

    fn quoted(&mut self, line: usize, col: usize) -> Result<String, ParseError> {
        self.bump();
        let mut s = String::new();
        loop {
            match self.bump() {
                None => return Err(self.err(line, col, "unterminated quoted atom")),
                Some('\'') if self.peek() == Some('\'') => {
                    self.bump();
                    s.push('\'');
                }
                Some('\'') => return Ok(s),
                Some('\\') => match self.bump() {
                    Some('n') => s.push('\n'),
                    Some('t') => s.push('\t'),
                    Some('\\') => s.push('\\'),
                    Some('\'') => s.push('\''),
                    Some('\n') => {}
                    _ => return Err(self.err(line, col, "unsupported escape sequence in quoted atom")),
                },
                Some(c) => s.push(c),
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Assoc {
    Xfx,
    Xfy,
    Yfx,
}

fn infix_op(name: &str) -> Option<(u32, Assoc)> {
    use Assoc::*;
    Some(match name {
        ":-" | "-->" => (1200, Xfx),
        ";" => (1100, Xfy),
        "->" => (1050, Xfy),
        "," => (1000, Xfy),
        "=" | "\\=" | "==" | "\\==" | "is" | "=:=" | "=\\=" | "<" | ">" | "=<" | ">=" | "=.." | "@<"
        | "@>" | "@=<" | "@>=" => (700, Xfx),
        "+" | "-" | "/\\" | "\\/" | "xor" => (500, Yfx),
        "*" | "/" | "//" | "mod" | "rem" | "div" | "<<" | ">>" => (400, Yfx),
        "**" => (200, Xfx),
        ":" | "^" => (200, Xfy),
        _ => return None,
    })
}

/// Prefix operators: priority and whether the argument may have the same priority (fy).
fn prefix_op(name: &str) -> Option<(u32, bool)> {
    Some(match name {
        ":-" | "?-" => (1200, false),
        "function" => (1150, false),
        "\\+" => (900, true),
        "-" | "+" | "\\" => (200, true),
        _ => return None,
    })
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    file: &'a Path,
    fresh: &'a mut FreshNames,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if !matches!(t.tok, Tok::Eof) {
            self.pos += 1;
        }
        t
    }

    fn err_at(&self, t: &Token, msg: impl Into<String>) -> ParseError {
        ParseError {
            span: SourceSpan { file: self.file.to_path_buf(), line: t.line, column: t.col },
            message: msg.into(),
        }
    }

    fn expect_punct(&mut self, c: char) -> Result<(), ParseError> {
        let t = self.next();
        if t.tok == Tok::Punct(c) {
            Ok(())
        } else {
            Err(self.err_at(&t, format!("expected `{c}`, found {}", describe(&t.tok))))
        }
    }

    fn at_term_start(&self) -> bool {
        match &self.peek().tok {
            Tok::Atom(a) => infix_op(a).is_none() || prefix_op(a).is_some(),
            Tok::QAtom(_) | Tok::Var(_) | Tok::Int(_) => true,
            Tok::Punct(c) => matches!(c, '(' | '[' | '{'),
            Tok::End | Tok::Eof => false,
        }
    }

    fn parse(&mut self, max: u32) -> Result<(Term, u32), ParseError> {
        let (mut left, mut left_prec) = self.primary(max)?;
        loop {
            let t = self.peek().clone();
            let name = match &t.tok {
                Tok::Atom(a) => a.clone(),
                Tok::Punct(',') => ",".to_string(),
                _ => break,
            };
            let Some((p, assoc)) = infix_op(&name) else { break };
            if p > max {
                break;
            }
            let left_max = if assoc == Assoc::Yfx { p } else { p - 1 };
            if left_prec > left_max {
                break;
            }
            self.next();
            let right_max = if assoc == Assoc::Xfy { p } else { p - 1 };
            let (right, _) = self.parse(right_max)?;
            left = Term::Comp(name, vec![left, right]);
            left_prec = p;
        }
        Ok((left, left_prec))
    }

    fn primary(&mut self, max: u32) -> Result<(Term, u32), ParseError> {
        let t = self.next();
        match t.tok.clone() {
            Tok::Int(n) => Ok((Term::Num(n), 0)),
            Tok::Var(v) => {
                if v == "_" {
                    Ok((Term::Var(self.fresh.fresh()), 0))
                } else if v.starts_with(FRESH_PREFIX) {
                    Err(self.err_at(&t, format!("variable name `{v}` uses the reserved prefix `{FRESH_PREFIX}`")))
                } else {
                    Ok((Term::Var(v), 0))
                }
            }
            Tok::Punct('(') => {
                let (inner, _) = self.parse(1200)?;
                self.expect_punct(')')?;
                Ok((inner, 0))
            }
            Tok::Punct('[') => {
                if self.peek().tok == Tok::Punct(']') {
                    self.next();
                    return self.after_name(Term::nil().functor().unwrap().0.to_string(), false, max);
                }
                let mut items = vec![self.parse(999)?.0];
                while self.peek().tok == Tok::Punct(',') {
                    self.next();
                    items.push(self.parse(999)?.0);
                }
                let tail = if self.peek().tok == Tok::Punct('|') {
                    self.next();
                    self.parse(999)?.0
                } else {
                    Term::nil()
                };
                self.expect_punct(']')?;
                let list = items.into_iter().rev().fold(tail, |acc, h| Term::cons(h, acc));
                Ok((list, 0))
            }
            Tok::Punct('{') => Err(self.err_at(&t, "curly-brace terms are not supported")),
            Tok::Atom(name) => {
                if name == "-" && !self.peek().layout {
                    if let Tok::Int(n) = &self.peek().tok {
                        let n = -n.clone();
                        self.next();
                        return Ok((Term::Num(n), 0));
                    }
                }
                self.after_name(name, true, max)
            }
            Tok::QAtom(name) => self.after_name(name, false, max),
            other => Err(self.err_at(&t, format!("unexpected {}", describe(&other)))),
        }
    }

    fn after_name(&mut self, name: String, may_be_op: bool, max: u32) -> Result<(Term, u32), ParseError> {
        if self.peek().tok == Tok::Punct('(') && !self.peek().layout {
            self.next();
            let mut args = vec![self.parse(999)?.0];
            while self.peek().tok == Tok::Punct(',') {
                self.next();
                args.push(self.parse(999)?.0);
            }
            self.expect_punct(')')?;
            return Ok((Term::Comp(name, args), 0));
        }
        if may_be_op {
            if let Some((p, fy)) = prefix_op(&name) {
                if self.at_term_start() && p <= max {
                    let arg_max = if fy { p } else { p - 1 };
                    let (arg, _) = self.parse(arg_max)?;
                    return Ok((Term::Comp(name, vec![arg]), p));
                }
            }
        }
        Ok((Term::atom(name), 0))
    }

    fn clause_term(&mut self) -> Result<Option<(Term, Token)>, ParseError> {
        let start = self.peek().clone();
        if start.tok == Tok::Eof {
            return Ok(None);
        }
        let (t, _) = self.parse(1200)?;
        let end = self.next();
        if end.tok != Tok::End {
            return Err(self.err_at(&end, format!("expected end of clause `.`, found {}", describe(&end.tok))));
        }
        Ok(Some((t, start)))
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Atom(a) | Tok::QAtom(a) => format!("`{a}`"),
        Tok::Var(v) => format!("variable `{v}`"),
        Tok::Int(n) => format!("number `{n}`"),
        Tok::Punct(c) => format!("`{c}`"),
        Tok::End => "end of clause".to_string(),
        Tok::Eof => "end of input".to_string(),
    }
}

const UNSUPPORTED_CONTROL: &[(&str, usize, &str)] = &[
    ("!", 0, "cut"),
    ("\\+", 1, "negation as failure"),
    ("not", 1, "negation as failure"),
    ("findall", 3, "findall/3"),
    ("bagof", 3, "bagof/3"),
    ("setof", 3, "setof/3"),
    ("forall", 2, "forall/2"),
    ("assert", 1, "assert/1"),
    ("asserta", 1, "asserta/1"),
    ("assertz", 1, "assertz/1"),
    ("retract", 1, "retract/1"),
    ("call", 1, "call/N"),
];

fn to_goal(t: &Term, at: &dyn Fn(String) -> ParseError) -> Result<Goal, ParseError> {
    let mut items = Vec::new();
    push_goal(t, &mut items, at)?;
    Ok(Goal::new(items))
}

fn push_goal(t: &Term, out: &mut Vec<Subgoal>, at: &dyn Fn(String) -> ParseError) -> Result<(), ParseError> {
    match t {
        Term::Var(v) => Err(at(format!("variable `{v}` used as a goal (meta-calls are not supported)"))),
        Term::Num(n) => Err(at(format!("number `{n}` used as a goal"))),
        Term::Comp(f, args) => {
            match (f.as_str(), args.len()) {
                (",", 2) => {
                    push_goal(&args[0], out, at)?;
                    push_goal(&args[1], out, at)
                }
                ("true", 0) => Ok(()),
                (";", 2) => match &args[0] {
                    Term::Comp(arrow, ct) if arrow == "->" && ct.len() == 2 => {
                        out.push(Subgoal::IfThenElse {
                            cond: to_goal(&ct[0], at)?,
                            then: to_goal(&ct[1], at)?,
                            els: to_goal(&args[1], at)?,
                        });
                        Ok(())
                    }
                    _ => Err(at("disjunction without if-then-else is not supported".to_string())),
                },
                ("->", 2) => Err(at("if-then without an else branch is not supported".to_string())),
                (":-", _) | ("-->", 2) => Err(at(format!("unexpected `{f}` inside a clause body"))),
                (name, n) => {
                    if name.starts_with("call") && n >= 1 {
                        return Err(at("call/N is not supported".to_string()));
                    }
                    if let Some((_, _, what)) = UNSUPPORTED_CONTROL.iter().find(|(p, a, _)| *p == name && *a == n) {
                        return Err(at(format!("{what} is not supported")));
                    }
                    out.push(Subgoal::Lit(Literal::new(f.clone(), args.clone())));
                    Ok(())
                }
            }
        }
    }
}

fn to_head(t: &Term, at: &dyn Fn(String) -> ParseError) -> Result<Literal, ParseError> {
    match t {
        Term::Comp(f, args) if !matches!(f.as_str(), "," | ";" | "->") => Ok(Literal::new(f.clone(), args.clone())),
        Term::Comp(f, _) => Err(at(format!("control construct `{f}` cannot be a clause head"))),
        _ => Err(at(format!("`{t}` cannot be a clause head"))),
    }
}

fn small_int(t: &Term) -> Option<usize> {
    match t {
        Term::Num(n) => usize::try_from(n).ok(),
        _ => None,
    }
}

fn to_directive(spec: &Term, at: &dyn Fn(String) -> ParseError) -> Result<Directive, ParseError> {
    let bad = || at("malformed function directive, expected `:- function p/n` optionally followed by `: k` or `: [k1,...]`".to_string());
    // `p/n: s` reads as `/(p, :(n, s))` with the standard table; accept `:(/(p,n), s)` too.
    let (name_t, arity_t, positions_t) = match spec {
        Term::Comp(slash, a) if slash == "/" && a.len() == 2 => match &a[1] {
            Term::Comp(colon, b) if colon == ":" && b.len() == 2 => (&a[0], &b[0], Some(&b[1])),
            other => (&a[0], other, None),
        },
        Term::Comp(colon, b) if colon == ":" && b.len() == 2 => match &b[0] {
            Term::Comp(slash, a) if slash == "/" && a.len() == 2 => (&a[0], &a[1], Some(&b[1])),
            _ => return Err(bad()),
        },
        _ => return Err(bad()),
    };
    let pred = match name_t {
        Term::Comp(n, args) if args.is_empty() => n.clone(),
        _ => return Err(bad()),
    };
    let arity = small_int(arity_t).ok_or_else(bad)?;
    let respos: BTreeSet<usize> = match positions_t {
        None => BTreeSet::from([arity]),
        Some(t) => {
            if let Some(k) = small_int(t) {
                BTreeSet::from([k])
            } else if let Some((items, tail)) = t.list_parts() {
                if tail.functor() != Some(("[]", 0)) {
                    return Err(bad());
                }
                items.iter().map(|i| small_int(i).ok_or_else(bad)).collect::<Result<_, _>>()?
            } else if t.functor() == Some(("[]", 0)) {
                BTreeSet::new()
            } else {
                return Err(bad());
            }
        }
    };
    if let Some(p) = respos.iter().find(|p| **p == 0 || **p > arity) {
        return Err(at(format!("result position {p} is outside 1..{arity} for {pred}/{arity}")));
    }
    Ok(Directive { pred, arity, respos })
}

fn lex<'a>(src: &str, file: &'a Path) -> Result<Vec<Token>, ParseError> {
    Lexer::new(src, file).tokens()
}

/// Parses a whole program. Spans refer to `file`.
pub fn parse_program_named(src: &str, file: &Path) -> Result<LogicProgram, ParseError> {
    let toks = lex(src, file)?;
    let mut fresh = FreshNames::new();
    let mut p = Parser { toks, pos: 0, file, fresh: &mut fresh };
    let mut prog = LogicProgram::default();
    while let Some((t, start)) = p.clause_term()? {
        let err = |m: String| p.err_at(&start, m);
        match &t {
            Term::Comp(op, args) if op == ":-" && args.len() == 1 => match &args[0] {
                Term::Comp(f, spec) if f == "function" && spec.len() == 1 => {
                    prog.directives.push(to_directive(&spec[0], &err)?);
                }
                other => return Err(err(format!("unsupported directive `{other}`"))),
            },
            Term::Comp(op, args) if op == ":-" && args.len() == 2 => {
                let head = to_head(&args[0], &err)?;
                let body = to_goal(&args[1], &err)?;
                prog.clauses.push(Clause::rule(head, body));
            }
            Term::Comp(op, _) if op == "-->" => return Err(err("DCG rules are not supported".to_string())),
            Term::Comp(op, _) if op == "?-" => return Err(err("queries are not allowed in programs".to_string())),
            _ => prog.clauses.push(Clause::fact(to_head(&t, &err)?)),
        }
    }
    Ok(prog)
}

pub fn parse_program(src: &str) -> Result<LogicProgram, ParseError> {
    parse_program_named(src, Path::new("<input>"))
}

/// Reads a program from disk.
pub fn parse_program_file(path: &Path) -> Result<LogicProgram, ParseError> {
    let src = std::fs::read_to_string(path).map_err(|e| ParseError {
        span: SourceSpan { file: path.to_path_buf(), line: 1, column: 1 },
        message: format!("cannot read file: {e}"),
    })?;
    parse_program_named(&src, path)
}

/// Parses a single `:- function ...` directive.
pub fn parse_directive(src: &str) -> Result<Directive, ParseError> {
    let prog = parse_program(src)?;
    match (prog.directives.as_slice(), prog.clauses.is_empty()) {
        ([d], true) => Ok(d.clone()),
        _ => Err(ParseError {
            span: SourceSpan { file: PathBuf::from("<input>"), line: 1, column: 1 },
            message: "expected exactly one function directive".to_string(),
        }),
    }
}

/// Parses a goal (a conjunction of literals); a trailing `.` is optional.
pub fn parse_goal(src: &str) -> Result<Goal, ParseError> {
    let file = Path::new("<goal>");
    let mut toks = lex(src, file)?;
    let eof = toks.pop().expect("eof token");
    if !toks.last().is_some_and(|t| t.tok == Tok::End) {
        toks.push(Token { tok: Tok::End, line: eof.line, col: eof.col, layout: true });
    }
    toks.push(eof);
    let mut fresh = FreshNames::starting_at(1_000_000);
    let mut p = Parser { toks, pos: 0, file, fresh: &mut fresh };
    let Some((t, start)) = p.clause_term()? else {
        return Err(p.err_at(&start_token(&p), "empty goal"));
    };
    if p.peek().tok != Tok::Eof {
        return Err(p.err_at(&p.peek().clone(), "unexpected input after goal"));
    }
    let err = |m: String| p.err_at(&start, m);
    to_goal(&t, &err)
}

fn start_token(p: &Parser<'_>) -> Token {
    p.toks[0].clone()
}
