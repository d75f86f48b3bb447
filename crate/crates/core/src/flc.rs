//! Abstract syntax of the generated functional logic programs.
//!
//! Names stored here are target names (already mangled). Lists use the
//! constructors [`LIST_CONS`] and [`LIST_NIL`]; tuples and Booleans are
//! primitive.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;

pub const LIST_CONS: &str = ":";
pub const LIST_NIL: &str = "[]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    /// Integer division truncating toward zero (Prolog `//`).
    Quot,
    /// Modulo with the sign of the divisor (Prolog `mod`).
    Mod,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Quot => "`quot`",
            ArithOp::Mod => "`mod`",
        }
    }

    pub fn precedence(self) -> u8 {
        match self {
            ArithOp::Add | ArithOp::Sub => 6,
            _ => 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "/=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Pattern {
    Var(String),
    Num(BigInt),
    Cons(String, Vec<Pattern>),
    Tuple(Vec<Pattern>),
}

impl Pattern {
    pub fn vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    /// Variable occurrences in order, duplicates included.
    pub fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Pattern::Var(v) => out.push(v.clone()),
            Pattern::Num(_) => {}
            Pattern::Cons(_, ps) | Pattern::Tuple(ps) => ps.iter().for_each(|p| p.collect_vars(out)),
        }
    }

    pub fn to_expr(&self) -> Expr {
        match self {
            Pattern::Var(v) => Expr::Var(v.clone()),
            Pattern::Num(n) => Expr::Num(n.clone()),
            Pattern::Cons(c, ps) => Expr::Cons(c.clone(), ps.iter().map(Pattern::to_expr).collect()),
            Pattern::Tuple(ps) => Expr::Tuple(ps.iter().map(Pattern::to_expr).collect()),
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Pattern::Var(_))
    }
}

/// `pattern = expr` local binding.
pub type Binding = (Pattern, Expr);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Var(String),
    Num(BigInt),
    Cons(String, Vec<Expr>),
    Apply(String, Vec<Expr>),
    Tuple(Vec<Expr>),
    /// Strict equality `=:=`.
    Unify(Box<Expr>, Box<Expr>),
    /// Boolean conjunction `&&`.
    Conj(Box<Expr>, Box<Expr>),
    /// `cond &> body`.
    Guard(Box<Expr>, Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    /// Bindings scope over later bindings and the body.
    Let(Vec<Binding>, Box<Expr>),
    Arith(ArithOp, Box<Expr>, Box<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    True,
    False,
}

impl Expr {
    pub fn var(n: impl Into<String>) -> Expr {
        Expr::Var(n.into())
    }

    pub fn unify(a: Expr, b: Expr) -> Expr {
        Expr::Unify(Box::new(a), Box::new(b))
    }

    pub fn conj(a: Expr, b: Expr) -> Expr {
        Expr::Conj(Box::new(a), Box::new(b))
    }

    pub fn guard(c: Expr, b: Expr) -> Expr {
        Expr::Guard(Box::new(c), Box::new(b))
    }

    pub fn ite(c: Expr, t: Expr, e: Expr) -> Expr {
        Expr::If(Box::new(c), Box::new(t), Box::new(e))
    }

    pub fn arith(op: ArithOp, a: Expr, b: Expr) -> Expr {
        Expr::Arith(op, Box::new(a), Box::new(b))
    }

    pub fn cmp(op: CmpOp, a: Expr, b: Expr) -> Expr {
        Expr::Cmp(op, Box::new(a), Box::new(b))
    }

    /// `e1 && ... && en`, right-nested; `True` when empty.
    pub fn conj_all(items: Vec<Expr>) -> Expr {
        let mut it = items.into_iter().rev();
        match it.next() {
            None => Expr::True,
            Some(last) => it.fold(last, |acc, e| Expr::conj(e, acc)),
        }
    }

    /// Tuple of the given components; a single component stands alone.
    pub fn tuple_or_single(mut items: Vec<Expr>) -> Expr {
        if items.len() == 1 {
            items.pop().unwrap()
        } else {
            Expr::Tuple(items)
        }
    }

    pub fn list(items: Vec<Expr>, tail: Expr) -> Expr {
        items
            .into_iter()
            .rev()
            .fold(tail, |acc, h| Expr::Cons(LIST_CONS.to_string(), vec![h, acc]))
    }

    pub fn nil() -> Expr {
        Expr::Cons(LIST_NIL.to_string(), Vec::new())
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        free_vars(self)
    }

    /// Capture-free replacement of free occurrences of `name`.
    pub fn substitute(&self, name: &str, with: &Expr) -> Expr {
        let sub = |e: &Expr| e.substitute(name, with);
        match self {
            Expr::Var(v) if v == name => with.clone(),
            Expr::Var(_) | Expr::Num(_) | Expr::True | Expr::False => self.clone(),
            Expr::Cons(c, args) => Expr::Cons(c.clone(), args.iter().map(sub).collect()),
            Expr::Apply(f, args) => Expr::Apply(f.clone(), args.iter().map(sub).collect()),
            Expr::Tuple(args) => Expr::Tuple(args.iter().map(sub).collect()),
            Expr::Unify(a, b) => Expr::unify(sub(a), sub(b)),
            Expr::Conj(a, b) => Expr::conj(sub(a), sub(b)),
            Expr::Guard(a, b) => Expr::guard(sub(a), sub(b)),
            Expr::If(c, t, e) => Expr::ite(sub(c), sub(t), sub(e)),
            Expr::Arith(op, a, b) => Expr::arith(*op, sub(a), sub(b)),
            Expr::Cmp(op, a, b) => Expr::cmp(*op, sub(a), sub(b)),
            Expr::Let(bs, body) => {
                let mut out = Vec::with_capacity(bs.len());
                let mut shadowed = false;
                for (p, rhs) in bs {
                    out.push((p.clone(), if shadowed { rhs.clone() } else { sub(rhs) }));
                    if p.vars().iter().any(|v| v == name) {
                        shadowed = true;
                    }
                }
                let body = if shadowed { (**body).clone() } else { sub(body) };
                Expr::Let(out, Box::new(body))
            }
        }
    }

    /// Immediate subexpressions (binding right-hand sides included).
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Var(_) | Expr::Num(_) | Expr::True | Expr::False => Vec::new(),
            Expr::Cons(_, a) | Expr::Apply(_, a) | Expr::Tuple(a) => a.iter().collect(),
            Expr::Unify(a, b) | Expr::Conj(a, b) | Expr::Guard(a, b) | Expr::Arith(_, a, b) | Expr::Cmp(_, a, b) => {
                vec![a, b]
            }
            Expr::If(c, t, e) => vec![c, t, e],
            Expr::Let(bs, body) => bs.iter().map(|(_, e)| e).chain(std::iter::once(&**body)).collect(),
        }
    }
}

fn free_into(e: &Expr, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
    match e {
        Expr::Var(v) => {
            if !bound.contains(v) {
                out.insert(v.clone());
            }
        }
        Expr::Let(bs, body) => {
            let mark = bound.len();
            for (p, rhs) in bs {
                free_into(rhs, bound, out);
                bound.extend(p.vars());
            }
            free_into(body, bound, out);
            bound.truncate(mark);
        }
        other => other.children().into_iter().for_each(|c| free_into(c, bound, out)),
    }
}

pub fn free_vars(e: &Expr) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    free_into(e, &mut Vec::new(), &mut out);
    out
}

pub fn count_occurrences(name: &str, e: &Expr) -> usize {
    match e {
        Expr::Var(v) => usize::from(v == name),
        Expr::Let(bs, body) => {
            let mut n = 0;
            for (p, rhs) in bs {
                n += count_occurrences(name, rhs);
                if p.vars().iter().any(|v| v == name) {
                    return n;
                }
            }
            n + count_occurrences(name, body)
        }
        other => other.children().into_iter().map(|c| count_occurrences(name, c)).sum(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rule {
    pub fname: String,
    pub params: Vec<Pattern>,
    pub guard: Option<Expr>,
    /// `where` bindings; they scope over the guard and the right-hand side.
    pub locals: Vec<Binding>,
    pub rhs: Expr,
}

impl Rule {
    pub fn new(fname: impl Into<String>, params: Vec<Pattern>, rhs: Expr) -> Rule {
        Rule { fname: fname.into(), params, guard: None, locals: Vec::new(), rhs }
    }

    pub fn with_guard(mut self, guard: Option<Expr>) -> Rule {
        self.guard = guard;
        self
    }

    pub fn with_locals(mut self, locals: Vec<Binding>) -> Rule {
        self.locals = locals;
        self
    }

    pub fn arity(&self) -> usize {
        self.params.len()
    }

    /// Variables bound by the left-hand side, in order, duplicates included.
    pub fn lhs_var_occurrences(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.params.iter().for_each(|p| p.collect_vars(&mut out));
        out
    }

    /// Guard, locals and rhs viewed as one expression, for occurrence counts.
    pub fn body_expr(&self) -> Expr {
        let body = match &self.guard {
            Some(g) => Expr::guard(g.clone(), self.rhs.clone()),
            None => self.rhs.clone(),
        };
        if self.locals.is_empty() {
            body
        } else {
            Expr::Let(self.locals.clone(), Box::new(body))
        }
    }

    /// Free variables of the rule that the left-hand side does not bind.
    pub fn extra_vars(&self) -> BTreeSet<String> {
        let lhs: BTreeSet<String> = self.lhs_var_occurrences().into_iter().collect();
        let mut body = free_vars(&self.body_expr());
        body.retain(|v| !lhs.contains(v));
        body
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DataDecl {
    pub typename: String,
    pub constructors: Vec<(String, usize)>,
}

impl Default for DataDecl {
    fn default() -> Self {
        DataDecl { typename: "Term".to_string(), constructors: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct FlcProgram {
    pub datadecl: DataDecl,
    pub rules: Vec<Rule>,
}

impl FlcProgram {
    /// Function names with their arity, in order of first definition.
    pub fn functions(&self) -> Vec<(String, usize)> {
        let mut out: Vec<(String, usize)> = Vec::new();
        for r in &self.rules {
            let k = (r.fname.clone(), r.arity());
            if !out.contains(&k) {
                out.push(k);
            }
        }
        out
    }

    pub fn arity_of(&self, fname: &str) -> Option<usize> {
        self.rules.iter().find(|r| r.fname == fname).map(Rule::arity)
    }

    /// Recomputes the constructor census from the rules (order of first use).
    pub fn census(&self) -> Vec<(String, usize)> {
        let mut seen: Vec<(String, usize)> = Vec::new();
        let mut add = |c: &str, n: usize| {
            if c != LIST_CONS && c != LIST_NIL && !seen.iter().any(|(x, k)| x == c && *k == n) {
                seen.push((c.to_string(), n));
            }
        };
        fn pat(p: &Pattern, add: &mut dyn FnMut(&str, usize)) {
            match p {
                Pattern::Cons(c, ps) => {
                    add(c, ps.len());
                    ps.iter().for_each(|q| pat(q, add));
                }
                Pattern::Tuple(ps) => ps.iter().for_each(|q| pat(q, add)),
                _ => {}
            }
        }
        fn expr(e: &Expr, add: &mut dyn FnMut(&str, usize)) {
            if let Expr::Cons(c, args) = e {
                add(c, args.len());
            }
            if let Expr::Let(bs, _) = e {
                bs.iter().for_each(|(p, _)| pat(p, add));
            }
            e.children().into_iter().for_each(|c| expr(c, add));
        }
        for r in &self.rules {
            r.params.iter().for_each(|p| pat(p, &mut add));
            if let Some(g) = &r.guard {
                expr(g, &mut add);
            }
            for (p, e) in &r.locals {
                pat(p, &mut add);
                expr(e, &mut add);
            }
            expr(&r.rhs, &mut add);
        }
        seen
    }

    /// Rules grouped per function, in program order.
    pub fn rules_by_function(&self) -> BTreeMap<String, Vec<&Rule>> {
        let mut m: BTreeMap<String, Vec<&Rule>> = BTreeMap::new();
        for r in &self.rules {
            m.entry(r.fname.clone()).or_default().push(r);
        }
        m
    }
}

impl fmt::Display for FlcProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::codegen::emit_program(self, &crate::codegen::EmitOptions::default()))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::codegen::render_expr(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> Expr {
        Expr::var(n)
    }

    #[test]
    fn free_vars_examples() {
        assert_eq!(free_vars(&v("z")), BTreeSet::from(["z".to_string()]));
        let e = Expr::Let(
            vec![(Pattern::Var("z".into()), Expr::Apply("plus".into(), vec![v("x"), v("y")]))],
            Box::new(Expr::Cons("S".into(), vec![v("z")])),
        );
        assert_eq!(free_vars(&e), BTreeSet::from(["x".to_string(), "y".to_string()]));
        let e = Expr::unify(Expr::Tuple(vec![v("x"), v("y")]), Expr::Apply("plus".into(), vec![v("z")]));
        assert_eq!(free_vars(&e).len(), 3);
    }

    #[test]
    fn occurrence_counts() {
        assert_eq!(count_occurrences("z", &Expr::Cons("S".into(), vec![v("z")])), 1);
        let e = Expr::Apply("plus".into(), vec![Expr::Cons("O".into(), vec![]), v("y"), v("y")]);
        assert_eq!(count_occurrences("y", &e), 2);
        assert_eq!(count_occurrences("x", &Expr::Num(0.into())), 0);
    }

    #[test]
    fn let_binding_shadows_later_uses() {
        let e = Expr::Let(vec![(Pattern::Var("x".into()), v("x"))], Box::new(v("x")));
        assert_eq!(count_occurrences("x", &e), 1);
        assert_eq!(free_vars(&e), BTreeSet::from(["x".to_string()]));
        let s = e.substitute("x", &Expr::Num(1.into()));
        assert_eq!(s, Expr::Let(vec![(Pattern::Var("x".into()), Expr::Num(1.into()))], Box::new(v("x"))));
    }

    #[test]
    fn conj_all_nests_to_the_right() {
        assert_eq!(Expr::conj_all(vec![]), Expr::True);
        assert_eq!(Expr::conj_all(vec![v("a")]), v("a"));
        assert_eq!(Expr::conj_all(vec![v("a"), v("b"), v("c")]), Expr::conj(v("a"), Expr::conj(v("b"), v("c"))));
    }
}
