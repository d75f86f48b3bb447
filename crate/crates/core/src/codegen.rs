//! Identifier mangling and rendering of functional logic programs as
//! Curry-style source text.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Signed;

use crate::ast::is_fresh_name;
use crate::flc::{Expr, FlcProgram, Pattern, Rule, LIST_CONS, LIST_NIL};

pub const PROLOGUE: &str = "-- Functional logic program generated by pl2flc.";

const KEYWORDS: &[&str] = &[
    "as", "case", "class", "data", "default", "deriving", "do", "else", "external", "fcase", "free",
    "hiding", "if", "import", "in", "infix", "infixl", "infixr", "instance", "let", "module", "newtype",
    "of", "qualified", "then", "type", "where",
];

/// Names the emitted code uses as builtin operators.
const RESERVED_FUNCTIONS: &[&str] = &["div", "mod", "quot", "rem"];
const RESERVED_CONSTRUCTORS: &[&str] = &["True", "False"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Kind {
    Constructor,
    Function,
    Variable,
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if is_ident_char(c) { c } else { '_' }).collect()
}

fn recase(name: &str, upper: bool) -> String {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if upper => c.to_ascii_uppercase().to_string() + chars.as_str(),
        Some(c) => c.to_ascii_lowercase().to_string() + chars.as_str(),
        None => String::new(),
    }
}

/// Base target name and whether it is unusable as is.
fn base_name(name: &str, kind: Kind) -> (String, bool) {
    let upper = kind == Kind::Constructor;
    let clean = sanitize(name.trim_start_matches('_'));
    let starts_ok = clean.chars().next().is_some_and(|c| c.is_ascii_alphabetic());
    let base = if starts_ok {
        recase(&clean, upper)
    } else if upper {
        format!("C{clean}")
    } else {
        format!("f{clean}")
    };
    let changed = clean != name.trim_start_matches('_') || !starts_ok;
    let reserved = match kind {
        Kind::Constructor => RESERVED_CONSTRUCTORS.contains(&base.as_str()),
        Kind::Function => KEYWORDS.contains(&base.as_str()) || RESERVED_FUNCTIONS.contains(&base.as_str()),
        Kind::Variable => KEYWORDS.contains(&base.as_str()),
    };
    (base, changed || reserved)
}

/// Injective map from source symbols to target identifiers. The first
/// symbol (in registration order) to claim a base name keeps it.
#[derive(Debug, Clone, Default)]
pub struct ManglingTable {
    map: BTreeMap<(String, usize, Kind), String>,
    taken: BTreeMap<Kind, BTreeSet<String>>,
    reverse: BTreeMap<(Kind, String), (String, usize)>,
}

impl ManglingTable {
    pub fn new() -> ManglingTable {
        ManglingTable::default()
    }

    fn taken_for(&self, kind: Kind) -> BTreeSet<String> {
        let mut out = self.taken.get(&kind).cloned().unwrap_or_default();
        // functions and variables share one namespace
        if kind == Kind::Variable {
            out.extend(self.taken.get(&Kind::Function).cloned().unwrap_or_default());
        }
        out
    }

    pub fn mangle(&mut self, name: &str, arity: usize, kind: Kind) -> String {
        let key = (name.to_string(), arity, kind);
        if let Some(t) = self.map.get(&key) {
            return t.clone();
        }
        let (base, bad) = base_name(name, kind);
        let taken = self.taken_for(kind);
        let target = if !bad && !taken.contains(&base) {
            base
        } else {
            (1..)
                .map(|n| format!("{base}_k{arity}_{n}"))
                .find(|c| !taken.contains(c))
                .expect("unbounded suffixes")
        };
        self.map.insert(key, target.clone());
        self.taken.entry(kind).or_default().insert(target.clone());
        self.reverse.insert((kind, target.clone()), (name.to_string(), arity));
        target
    }

    pub fn lookup(&self, name: &str, arity: usize, kind: Kind) -> Option<&str> {
        self.map.get(&(name.to_string(), arity, kind)).map(String::as_str)
    }

    /// Source symbol of a target identifier.
    pub fn source_of(&self, target: &str, kind: Kind) -> Option<(&str, usize)> {
        self.reverse.get(&(kind, target.to_string())).map(|(n, a)| (n.as_str(), *a))
    }

    pub fn functions(&self) -> BTreeSet<String> {
        self.taken.get(&Kind::Function).cloned().unwrap_or_default()
    }

    /// A scope for the variables of one clause.
    pub fn var_scope(&self) -> VarScope {
        VarScope { functions: self.functions(), map: BTreeMap::new(), taken: BTreeSet::new() }
    }
}

/// Variable names of one clause. Generated names pass through unchanged.
#[derive(Debug, Clone)]
pub struct VarScope {
    functions: BTreeSet<String>,
    map: BTreeMap<String, String>,
    taken: BTreeSet<String>,
}

impl VarScope {
    pub fn mangle(&mut self, name: &str) -> String {
        if is_fresh_name(name) {
            return name.to_string();
        }
        if let Some(t) = self.map.get(name) {
            return t.clone();
        }
        let (base, bad) = base_name(name, Kind::Variable);
        let clash = |c: &String| self.taken.contains(c) || self.functions.contains(c);
        let target = if !bad && !clash(&base) {
            base
        } else {
            (1..).map(|n| format!("{base}_k0_{n}")).find(|c| !clash(c)).expect("unbounded suffixes")
        };
        self.map.insert(name.to_string(), target.clone());
        self.taken.insert(target.clone());
        target
    }

    /// Source names by target name.
    pub fn reverse(&self) -> BTreeMap<String, String> {
        self.map.iter().map(|(s, t)| (t.clone(), s.clone())).collect()
    }
}

pub fn emit_data_decl(p: &FlcProgram) -> String {
    let census = if p.datadecl.constructors.is_empty() { p.census() } else { p.datadecl.constructors.clone() };
    if census.is_empty() {
        return format!("data {} = Unit", p.datadecl.typename);
    }
    let alts: Vec<String> = census
        .iter()
        .map(|(c, n)| {
            let mut s = c.clone();
            for _ in 0..*n {
                s.push_str(" Term");
            }
            s
        })
        .collect();
    format!("data {} = {}", p.datadecl.typename, alts.join(" | "))
}

#[derive(Debug, Clone)]
pub struct EmitOptions {
    pub prologue: bool,
    pub data_decl: bool,
}

impl Default for EmitOptions {
    fn default() -> Self {
        EmitOptions { prologue: true, data_decl: true }
    }
}

pub fn emit_program(p: &FlcProgram, opts: &EmitOptions) -> String {
    let mut out = String::new();
    if opts.prologue {
        out.push_str(PROLOGUE);
        out.push_str("\n\n");
    }
    if opts.data_decl {
        out.push_str(&emit_data_decl(p));
        out.push('\n');
    }
    let mut prev: Option<(&str, usize)> = None;
    for r in &p.rules {
        let key = (r.fname.as_str(), r.arity());
        if prev != Some(key) && !out.is_empty() {
            out.push('\n');
        }
        prev = Some(key);
        out.push_str(&render_rule(r));
        out.push('\n');
    }
    out
}

/// Renders generated variables: `_` when they occur once in the whole rule,
/// otherwise `u1`, `u2`, ... avoiding the rule's other names.
struct FreshRender {
    names: BTreeMap<String, String>,
}

impl FreshRender {
    fn for_rule(r: &Rule) -> FreshRender {
        let mut occ: Vec<String> = Vec::new();
        for p in &r.params {
            p.collect_vars(&mut occ);
        }
        let mut all = Vec::new();
        collect_rule_vars(r, &mut all);
        occ.extend(all);
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        let mut order: Vec<&str> = Vec::new();
        for v in &occ {
            let c = counts.entry(v.as_str()).or_insert(0);
            if *c == 0 {
                order.push(v.as_str());
            }
            *c += 1;
        }
        let plain: BTreeSet<&str> = order.iter().copied().filter(|v| !is_fresh_name(v)).collect();
        let mut names = BTreeMap::new();
        let mut k = 0;
        for v in order {
            if !is_fresh_name(v) {
                continue;
            }
            if counts[v] == 1 {
                names.insert(v.to_string(), "_".to_string());
            } else {
                let name = loop {
                    k += 1;
                    let cand = format!("u{k}");
                    if !plain.contains(cand.as_str()) {
                        break cand;
                    }
                };
                names.insert(v.to_string(), name);
            }
        }
        FreshRender { names }
    }

    fn none() -> FreshRender {
        FreshRender { names: BTreeMap::new() }
    }

    fn var<'a>(&'a self, v: &'a str) -> &'a str {
        self.names.get(v).map(String::as_str).unwrap_or(v)
    }
}

fn collect_rule_vars(r: &Rule, out: &mut Vec<String>) {
    fn expr(e: &Expr, out: &mut Vec<String>) {
        match e {
            Expr::Var(v) => out.push(v.clone()),
            Expr::Let(bs, body) => {
                for (p, rhs) in bs {
                    p.collect_vars(out);
                    expr(rhs, out);
                }
                expr(body, out);
            }
            other => other.children().into_iter().for_each(|c| expr(c, out)),
        }
    }
    if let Some(g) = &r.guard {
        expr(g, out);
    }
    for (p, e) in &r.locals {
        p.collect_vars(out);
        expr(e, out);
    }
    expr(&r.rhs, out);
}

pub fn render_rule(r: &Rule) -> String {
    let fr = FreshRender::for_rule(r);
    let mut s = r.fname.clone();
    for p in &r.params {
        s.push(' ');
        s.push_str(&pattern(p, true, &fr));
    }
    if let Some(g) = &r.guard {
        s.push_str(" | ");
        s.push_str(&expr(g, 0, &fr));
    }
    s.push_str(" = ");
    s.push_str(&expr(&r.rhs, 0, &fr));
    for (i, (p, e)) in r.locals.iter().enumerate() {
        let b = format!("{} = {}", pattern(p, false, &fr), expr(e, 0, &fr));
        if i == 0 {
            s.push_str("\n    where ");
        } else {
            s.push_str("\n          ");
        }
        s.push_str(&b);
    }
    s
}

pub fn render_expr(e: &Expr) -> String {
    expr(e, 0, &FreshRender::none())
}

pub fn render_pattern(p: &Pattern) -> String {
    pattern(p, false, &FreshRender::none())
}

fn num_text(n: &num_bigint::BigInt, atomic: bool) -> String {
    if atomic && n.is_negative() {
        format!("({n})")
    } else {
        n.to_string()
    }
}

fn pattern(p: &Pattern, atomic: bool, fr: &FreshRender) -> String {
    match p {
        Pattern::Var(v) => fr.var(v).to_string(),
        Pattern::Num(n) => num_text(n, atomic),
        Pattern::Tuple(ps) => {
            let items: Vec<String> = ps.iter().map(|q| pattern(q, false, fr)).collect();
            format!("({})", items.join(", "))
        }
        Pattern::Cons(c, ps) if c == LIST_CONS && ps.len() == 2 => {
            let (items, tail) = pattern_list(p);
            if let Pattern::Cons(t, ts) = tail {
                if t == LIST_NIL && ts.is_empty() {
                    let items: Vec<String> = items.iter().map(|q| pattern(q, false, fr)).collect();
                    return format!("[{}]", items.join(","));
                }
            }
            let mut parts: Vec<String> = items.iter().map(|q| pattern(q, true, fr)).collect();
            parts.push(pattern(tail, true, fr));
            let tight = items.iter().chain(std::iter::once(&tail)).all(|q| pattern_is_atomic(q));
            let body = parts.join(if tight { ":" } else { " : " });
            if atomic {
                format!("({body})")
            } else {
                body
            }
        }
        Pattern::Cons(c, ps) if ps.is_empty() => c.clone(),
        Pattern::Cons(c, ps) => {
            let mut s = c.clone();
            for q in ps {
                s.push(' ');
                s.push_str(&pattern(q, true, fr));
            }
            if atomic {
                format!("({s})")
            } else {
                s
            }
        }
    }
}

fn pattern_list(p: &Pattern) -> (Vec<&Pattern>, &Pattern) {
    let mut items = Vec::new();
    let mut cur = p;
    while let Pattern::Cons(c, ps) = cur {
        if c == LIST_CONS && ps.len() == 2 {
            items.push(&ps[0]);
            cur = &ps[1];
        } else {
            break;
        }
    }
    (items, cur)
}

fn pattern_is_atomic(p: &Pattern) -> bool {
    match p {
        Pattern::Var(_) | Pattern::Tuple(_) => true,
        Pattern::Num(n) => !n.is_negative(),
        Pattern::Cons(c, ps) => ps.is_empty() || (c == LIST_CONS && is_proper_pattern_list(p)),
    }
}

fn is_proper_pattern_list(p: &Pattern) -> bool {
    let (_, tail) = pattern_list(p);
    matches!(tail, Pattern::Cons(t, ts) if t == LIST_NIL && ts.is_empty())
}

fn expr_list(e: &Expr) -> (Vec<&Expr>, &Expr) {
    let mut items = Vec::new();
    let mut cur = e;
    while let Expr::Cons(c, args) = cur {
        if c == LIST_CONS && args.len() == 2 {
            items.push(&args[0]);
            cur = &args[1];
        } else {
            break;
        }
    }
    (items, cur)
}

fn is_nil(e: &Expr) -> bool {
    matches!(e, Expr::Cons(c, a) if c == LIST_NIL && a.is_empty())
}

fn expr_is_atomic(e: &Expr) -> bool {
    match e {
        Expr::Var(_) | Expr::Tuple(_) | Expr::True | Expr::False => true,
        Expr::Num(n) => !n.is_negative(),
        Expr::Cons(c, a) => a.is_empty() || (c == LIST_CONS && is_nil(expr_list(e).1)),
        Expr::Apply(_, a) => a.is_empty(),
        _ => false,
    }
}

fn paren(s: String, yes: bool) -> String {
    if yes {
        format!("({s})")
    } else {
        s
    }
}

fn binop(l: &Expr, op: &str, r: &Expr, prec: u8, assoc: Assoc, ctx: u8, fr: &FreshRender) -> String {
    let (lp, rp) = match assoc {
        Assoc::Left => (prec, prec + 1),
        Assoc::Right => (prec + 1, prec),
        Assoc::None => (prec + 1, prec + 1),
    };
    let s = format!("{} {} {}", expr(l, lp, fr), op, expr(r, rp, fr));
    paren(s, ctx > prec)
}

#[derive(Clone, Copy)]
enum Assoc {
    Left,
    Right,
    None,
}

/// `ctx` is the binding strength the context demands: 0 for a top-level
/// position, 11 for an application argument.
fn expr(e: &Expr, ctx: u8, fr: &FreshRender) -> String {
    match e {
        Expr::Var(v) => fr.var(v).to_string(),
        Expr::Num(n) => num_text(n, ctx > 0),
        Expr::True => "True".into(),
        Expr::False => "False".into(),
        Expr::Tuple(es) => {
            let items: Vec<String> = es.iter().map(|x| expr(x, 0, fr)).collect();
            format!("({})", items.join(", "))
        }
        Expr::Cons(c, args) if c == LIST_CONS && args.len() == 2 => {
            let (items, tail) = expr_list(e);
            if is_nil(tail) {
                let items: Vec<String> = items.iter().map(|x| expr(x, 0, fr)).collect();
                return format!("[{}]", items.join(","));
            }
            let tight = items.iter().chain(std::iter::once(&tail)).all(|x| expr_is_atomic(x));
            if tight {
                let mut parts: Vec<String> = items.iter().map(|x| expr(x, 11, fr)).collect();
                parts.push(expr(tail, 11, fr));
                return paren(parts.join(":"), ctx > 5);
            }
            let mut parts: Vec<String> = items.iter().map(|x| expr(x, 6, fr)).collect();
            parts.push(expr(tail, 5, fr));
            paren(parts.join(" : "), ctx > 5)
        }
        Expr::Cons(c, args) | Expr::Apply(c, args) => {
            if args.is_empty() {
                return c.clone();
            }
            let mut s = c.clone();
            for a in args {
                s.push(' ');
                s.push_str(&expr(a, 11, fr));
            }
            paren(s, ctx > 10)
        }
        Expr::Guard(c, b) => binop(c, "&>", b, 0, Assoc::Right, ctx, fr),
        Expr::Conj(a, b) => binop(a, "&&", b, 3, Assoc::Right, ctx, fr),
        Expr::Unify(a, b) => binop(a, "=:=", b, 4, Assoc::None, ctx, fr),
        Expr::Cmp(op, a, b) => binop(a, op.symbol(), b, 4, Assoc::None, ctx, fr),
        Expr::Arith(op, a, b) => binop(a, op.symbol(), b, op.precedence(), Assoc::Left, ctx, fr),
        Expr::If(c, t, f) => {
            let s = format!("if {} then {} else {}", expr(c, 0, fr), expr(t, 0, fr), expr(f, 0, fr));
            paren(s, ctx > 0)
        }
        Expr::Let(bs, body) => {
            let items: Vec<String> =
                bs.iter().map(|(p, x)| format!("{} = {}", pattern(p, false, fr), expr(x, 0, fr))).collect();
            let s = if items.len() == 1 {
                format!("let {} in {}", items[0], expr(body, 0, fr))
            } else {
                format!("let {{ {} }} in {}", items.join("; "), expr(body, 0, fr))
            };
            paren(s, ctx > 0)
        }
    }
}
