//! Demand-driven narrowing over the generated programs.
//!
//! Expressions live in a graph; a call node is overwritten with its head
//! normal form, so shared subexpressions are evaluated once per derivation.
//! Pattern matching follows a definitional tree per function (overlapping
//! rules become choices). Non-deterministic choices are explored by
//! re-executing from the query along a sequence of choice indices, under
//! iterative deepening on the number of steps of a derivation.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::Zero;

use crate::analysis::{build_tree, DefTree, Key, TreeOptions};
use crate::ast::{Literal, Term};
use crate::flc::{ArithOp, CmpOp, Expr, FlcProgram, Pattern, Rule};
use crate::reader::query_vars;
use crate::sld::{Limits, Status, Strategy};
use crate::transform::desugar_nonlinear;

const TUPLE: &str = "(,)";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NarrowResult {
    pub value: Expr,
    /// Bindings of the query's named free variables, sorted by name.
    pub subst: Vec<(String, Expr)>,
    /// Length of the derivation in steps.
    pub steps: u64,
}

impl fmt::Display for NarrowResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)?;
        if !self.subst.is_empty() {
            let items: Vec<String> = self.subst.iter().map(|(v, e)| format!("{v} -> {e}")).collect();
            write!(f, "  where {{{}}}", items.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NarrowOutcome {
    pub results: Vec<NarrowResult>,
    pub status: Status,
    pub total_steps: u64,
    /// Derivations abandoned because arithmetic met a free variable.
    pub suspended: u64,
}

impl NarrowOutcome {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.results {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        out.push_str(&format!("status: {} steps={}", self.status, self.total_steps));
        if self.suspended > 0 {
            out.push_str(&format!(" suspended={}", self.suspended));
        }
        out.push('\n');
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NarrowError {
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("`{0}` expects {1} arguments")]
    Arity(String, usize),
    #[error("tuple pattern of arity {0} matched against `{1}`")]
    TupleArity(usize, String),
    #[error("type error: `{0}` is not an integer")]
    Type(String),
    #[error("division by zero")]
    ZeroDivisor,
    #[error("cyclic evaluation")]
    Cycle,
    #[error("unsupported let pattern `{0}`")]
    LetPattern(String),
}

type Id = usize;
type Sym = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OpKind {
    Unify,
    Conj,
    Guard,
    If,
    Arith(ArithOp),
    Cmp(CmpOp),
}

#[derive(Debug, Clone)]
enum Ce {
    Var(usize),
    Int(BigInt),
    Con(Sym, Vec<Ce>),
    Call(usize, Vec<Ce>),
    Op(OpKind, Vec<Ce>),
    Let(Vec<(LPat, Ce)>, Box<Ce>),
}

#[derive(Debug, Clone)]
enum LPat {
    Var(usize),
    Tuple(Vec<LPat>),
}

#[derive(Debug, Clone)]
enum CPat {
    Var(usize),
    Int(BigInt),
    Con(Sym, Vec<CPat>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum CKey {
    Con(Sym),
    Int(BigInt),
}

#[derive(Debug)]
enum Tree {
    Leaf(usize),
    Branch(Vec<usize>, Vec<(CKey, Tree)>),
    Or(Vec<Tree>),
}

#[derive(Debug)]
struct CRule {
    nslots: usize,
    params: Vec<CPat>,
    extra: Vec<usize>,
    body: Ce,
}

#[derive(Debug)]
struct Fun {
    rules: Vec<CRule>,
    tree: Tree,
}

/// A program prepared for evaluation.
pub struct NarrowProgram {
    syms: Vec<(String, usize)>,
    sym_ids: HashMap<(String, usize), Sym>,
    fun_ids: HashMap<String, (usize, usize)>,
    funs: Vec<Fun>,
    true_sym: Sym,
    false_sym: Sym,
}

struct Scope {
    map: HashMap<String, usize>,
    next: usize,
    extra: Vec<usize>,
}

impl Scope {
    fn new() -> Scope {
        Scope { map: HashMap::new(), next: 0, extra: Vec::new() }
    }

    fn slot(&mut self) -> usize {
        self.next += 1;
        self.next - 1
    }
}

impl NarrowProgram {
    pub fn new(p: &FlcProgram) -> Result<NarrowProgram, NarrowError> {
        let mut np = NarrowProgram {
            syms: Vec::new(),
            sym_ids: HashMap::new(),
            fun_ids: HashMap::new(),
            funs: Vec::new(),
            true_sym: 0,
            false_sym: 0,
        };
        np.true_sym = np.sym("True", 0);
        np.false_sym = np.sym("False", 0);
        let groups = p.functions();
        for (i, (f, n)) in groups.iter().enumerate() {
            np.fun_ids.insert(f.clone(), (i, *n));
        }
        for (f, n) in &groups {
            let rules: Vec<Rule> =
                p.rules.iter().filter(|r| &r.fname == f).map(desugar_nonlinear).collect();
            if rules.iter().any(|r| r.arity() != *n) {
                return Err(NarrowError::Arity(f.clone(), *n));
            }
            let heads: Vec<Literal> =
                rules.iter().map(|r| Literal::new(f.clone(), r.params.iter().map(pattern_term).collect())).collect();
            let opts = TreeOptions { allowed: None, allow_or: true, collapse: false };
            let tree = build_tree(&heads, &opts).expect("overlapping rules always admit a tree");
            let tree = np.tree(&tree);
            let mut crules = Vec::new();
            for r in &rules {
                crules.push(np.rule(r)?);
            }
            np.funs.push(Fun { rules: crules, tree });
        }
        Ok(np)
    }

    fn sym(&mut self, name: &str, arity: usize) -> Sym {
        let key = (name.to_string(), arity);
        if let Some(&s) = self.sym_ids.get(&key) {
            return s;
        }
        let s = self.syms.len() as Sym;
        self.syms.push(key.clone());
        self.sym_ids.insert(key, s);
        s
    }

    fn tree(&mut self, t: &DefTree) -> Tree {
        match t {
            DefTree::Clause { clause, .. } => Tree::Leaf(*clause),
            DefTree::Branch { pos, children, .. } => Tree::Branch(
                pos.clone(),
                children
                    .iter()
                    .map(|(k, c)| {
                        let key = match k {
                            Key::Fun(f, n) => CKey::Con(self.sym(f, *n)),
                            Key::Int(i) => CKey::Int(i.clone()),
                        };
                        (key, self.tree(c))
                    })
                    .collect(),
            ),
            DefTree::Or(ts) => Tree::Or(ts.iter().map(|c| self.tree(c)).collect()),
        }
    }

    fn rule(&mut self, r: &Rule) -> Result<CRule, NarrowError> {
        let mut scope = Scope::new();
        let params = r.params.iter().map(|p| self.cpat(p, &mut scope)).collect();
        let body = self.expr(&r.body_expr(), &mut scope)?;
        Ok(CRule { nslots: scope.next, params, extra: scope.extra, body })
    }

    fn cpat(&mut self, p: &Pattern, scope: &mut Scope) -> CPat {
        match p {
            Pattern::Var(v) => {
                let s = scope.slot();
                scope.map.insert(v.clone(), s);
                CPat::Var(s)
            }
            Pattern::Num(n) => CPat::Int(n.clone()),
            Pattern::Cons(c, ps) => {
                let s = self.sym(c, ps.len());
                CPat::Con(s, ps.iter().map(|q| self.cpat(q, scope)).collect())
            }
            Pattern::Tuple(ps) => {
                let s = self.sym(TUPLE, ps.len());
                CPat::Con(s, ps.iter().map(|q| self.cpat(q, scope)).collect())
            }
        }
    }

    fn lpat(&mut self, p: &Pattern, scope: &mut Scope) -> Result<LPat, NarrowError> {
        match p {
            Pattern::Var(v) => {
                let s = scope.slot();
                scope.map.insert(v.clone(), s);
                Ok(LPat::Var(s))
            }
            Pattern::Tuple(ps) => Ok(LPat::Tuple(ps.iter().map(|q| self.lpat(q, scope)).collect::<Result<_, _>>()?)),
            other => Err(NarrowError::LetPattern(crate::codegen::render_pattern(other))),
        }
    }

    fn exprs(&mut self, es: &[Expr], scope: &mut Scope) -> Result<Vec<Ce>, NarrowError> {
        es.iter().map(|x| self.expr(x, scope)).collect()
    }

    fn exprs2(&mut self, es: &[&Expr], scope: &mut Scope) -> Result<Vec<Ce>, NarrowError> {
        es.iter().map(|x| self.expr(x, scope)).collect()
    }

    fn expr(&mut self, e: &Expr, scope: &mut Scope) -> Result<Ce, NarrowError> {
        Ok(match e {
            Expr::Var(v) => match scope.map.get(v) {
                Some(&s) => Ce::Var(s),
                None => {
                    let s = scope.slot();
                    scope.map.insert(v.clone(), s);
                    scope.extra.push(s);
                    Ce::Var(s)
                }
            },
            Expr::Num(n) => Ce::Int(n.clone()),
            Expr::True => Ce::Con(self.true_sym, Vec::new()),
            Expr::False => Ce::Con(self.false_sym, Vec::new()),
            Expr::Cons(c, args) => {
                let s = self.sym(c, args.len());
                Ce::Con(s, self.exprs(args, scope)?)
            }
            Expr::Tuple(args) => {
                let s = self.sym(TUPLE, args.len());
                Ce::Con(s, self.exprs(args, scope)?)
            }
            Expr::Apply(f, args) => {
                let (id, n) = *self.fun_ids.get(f).ok_or_else(|| NarrowError::UnknownFunction(f.clone()))?;
                if n != args.len() {
                    return Err(NarrowError::Arity(f.clone(), n));
                }
                Ce::Call(id, self.exprs(args, scope)?)
            }
            Expr::Unify(a, b) => Ce::Op(OpKind::Unify, self.exprs2(&[&**a, &**b], scope)?),
            Expr::Conj(a, b) => Ce::Op(OpKind::Conj, self.exprs2(&[&**a, &**b], scope)?),
            Expr::Guard(a, b) => Ce::Op(OpKind::Guard, self.exprs2(&[&**a, &**b], scope)?),
            Expr::If(c, t, f) => Ce::Op(OpKind::If, self.exprs2(&[&**c, &**t, &**f], scope)?),
            Expr::Arith(op, a, b) => Ce::Op(OpKind::Arith(*op), self.exprs2(&[&**a, &**b], scope)?),
            Expr::Cmp(op, a, b) => Ce::Op(OpKind::Cmp(*op), self.exprs2(&[&**a, &**b], scope)?),
            Expr::Let(bs, body) => {
                let saved = scope.map.clone();
                let mut pats = Vec::new();
                for (p, _) in bs {
                    pats.push(self.lpat(p, scope)?);
                }
                let mut out = Vec::new();
                for (lp, (_, x)) in pats.into_iter().zip(bs) {
                    out.push((lp, self.expr(x, scope)?));
                }
                let body = self.expr(body, scope)?;
                // extra variables first met inside the let stay visible outside
                let extra: Vec<(String, usize)> = scope
                    .map
                    .iter()
                    .filter(|(_, s)| scope.extra.contains(s))
                    .map(|(v, s)| (v.clone(), *s))
                    .collect();
                scope.map = saved;
                for (v, s) in extra {
                    scope.map.entry(v).or_insert(s);
                }
                Ce::Let(out, Box::new(body))
            }
        })
    }

    /// Enumerates values of `e` with the bindings of its free variables.
    pub fn narrow(&self, e: &Expr, limits: Limits, strategy: Strategy) -> Result<NarrowOutcome, NarrowError> {
        let mut np = NarrowProgram {
            syms: self.syms.clone(),
            sym_ids: self.sym_ids.clone(),
            fun_ids: self.fun_ids.clone(),
            funs: Vec::new(),
            true_sym: self.true_sym,
            false_sym: self.false_sym,
        };
        let mut scope = Scope::new();
        let names = query_vars(e);
        let mut named = Vec::new();
        for v in &names {
            let s = scope.slot();
            scope.map.insert(v.clone(), s);
            named.push((v.clone(), s));
        }
        let body = np.expr(e, &mut scope)?;
        named.sort();
        let query = Query { nslots: scope.next, body, named };
        let syms = Syms { syms: np.syms, ids: np.sym_ids, true_sym: self.true_sym, false_sym: self.false_sym };
        drive(self, &syms, &query, limits, strategy)
    }
}

fn pattern_term(p: &Pattern) -> Term {
    match p {
        Pattern::Var(v) => Term::Var(v.clone()),
        Pattern::Num(n) => Term::Num(n.clone()),
        Pattern::Cons(c, ps) => Term::Comp(c.clone(), ps.iter().map(pattern_term).collect()),
        Pattern::Tuple(ps) => Term::Comp(TUPLE.into(), ps.iter().map(pattern_term).collect()),
    }
}

struct Query {
    nslots: usize,
    body: Ce,
    named: Vec<(String, usize)>,
}

/// Symbols of the program extended by those the query introduces.
struct Syms {
    syms: Vec<(String, usize)>,
    ids: HashMap<(String, usize), Sym>,
    true_sym: Sym,
    false_sym: Sym,
}

pub fn narrow(p: &FlcProgram, e: &Expr, limits: Limits) -> Result<NarrowOutcome, NarrowError> {
    NarrowProgram::new(p)?.narrow(e, limits, Strategy::IterativeDeepening)
}

pub fn narrow_with(p: &FlcProgram, e: &Expr, limits: Limits, strategy: Strategy) -> Result<NarrowOutcome, NarrowError> {
    NarrowProgram::new(p)?.narrow(e, limits, strategy)
}

/// Steps of the derivation of the first value, or of the whole search when
/// there is none.
pub fn count_steps(p: &FlcProgram, e: &Expr, limits: Limits) -> Result<u64, NarrowError> {
    let out = narrow(p, e, limits)?;
    Ok(match out.results.first() {
        Some(r) => r.steps,
        None => out.total_steps,
    })
}

fn drive(prog: &NarrowProgram, syms: &Syms, q: &Query, limits: Limits, strategy: Strategy) -> Result<NarrowOutcome, NarrowError> {
    let (mut bound, mut prev) = match strategy {
        Strategy::IterativeDeepening => (limits.max_depth.min(16), 0),
        Strategy::DepthFirst => (limits.max_depth, 0),
    };
    let mut total: u64 = 0;
    let mut results = Vec::new();
    let mut suspended = 0;
    let done = |results, status, total, suspended| Ok(NarrowOutcome { results, status, total_steps: total, suspended });
    loop {
        let mut prefix: Vec<usize> = Vec::new();
        let mut cutoff = false;
        let mut found = Vec::new();
        let mut pass_suspended = 0;
        loop {
            if total >= limits.max_steps {
                return done(results, Status::StepLimit, total, suspended);
            }
            let mut run = Run {
                prog,
                syms,
                heap: Vec::new(),
                prefix: &prefix,
                trace: Vec::new(),
                steps: 0,
                bound,
                base: if prefix.is_empty() { Some(0) } else { None },
                budget: limits.max_steps - total,
            };
            let outcome = run.execute(q);
            total += run.counted();
            match outcome {
                Ok(r) => {
                    if r.steps > prev {
                        results.push(r.clone());
                    }
                    found.push(r);
                    if results.len() >= limits.max_answers {
                        return done(results, Status::AnswerLimit, total, suspended);
                    }
                }
                Err(Stop::Fail) => {}
                Err(Stop::Suspend) => {
                    pass_suspended += 1;
                    if run.steps > prev {
                        suspended += 1;
                    }
                }
                Err(Stop::Cutoff) => cutoff = true,
                Err(Stop::Budget) => return done(results, Status::StepLimit, total, suspended),
                Err(Stop::Error(e)) => return Err(e),
            }
            match run.trace.iter().rposition(|&(c, n, _)| c + 1 < n) {
                Some(k) => {
                    let mut next: Vec<usize> = run.trace[..k].iter().map(|t| t.0).collect();
                    next.push(run.trace[k].0 + 1);
                    prefix = next;
                }
                None => break,
            }
        }
        if !cutoff {
            return done(found, Status::Exhausted, total, pass_suspended);
        }
        if bound >= limits.max_depth {
            return done(results, Status::StepLimit, total, suspended);
        }
        prev = bound;
        bound = (bound * 2).min(limits.max_depth);
    }
}

#[derive(Debug)]
enum Stop {
    Fail,
    Cutoff,
    Suspend,
    Budget,
    Error(NarrowError),
}

impl From<NarrowError> for Stop {
    fn from(e: NarrowError) -> Stop {
        Stop::Error(e)
    }
}

#[derive(Debug, Clone)]
enum Node {
    Free,
    Ind(Id),
    Con(Sym, Vec<Id>),
    Int(BigInt),
    Call(usize, Vec<Id>),
    Op(OpKind, Vec<Id>),
    Select(Id, usize, usize),
    Hole,
    Busy,
}

struct Run<'a> {
    prog: &'a NarrowProgram,
    syms: &'a Syms,
    heap: Vec<Node>,
    prefix: &'a [usize],
    /// Choices met: (taken, alternatives, steps before the choice).
    trace: Vec<(usize, usize, u64)>,
    steps: u64,
    bound: u64,
    /// Steps already made when this run left the explored prefix.
    base: Option<u64>,
    budget: u64,
}

type R<T> = Result<T, Stop>;

const RED_ZONE: usize = 128 * 1024;
const STACK: usize = 4 * 1024 * 1024;

impl Run<'_> {
    fn counted(&self) -> u64 {
        self.base.map_or(0, |b| self.steps - b)
    }

    fn tick(&mut self) -> R<()> {
        self.steps += 1;
        if self.steps > self.bound {
            return Err(Stop::Cutoff);
        }
        if self.counted() > self.budget {
            return Err(Stop::Budget);
        }
        Ok(())
    }

    fn choose(&mut self, n: usize) -> usize {
        if n == 1 {
            return 0;
        }
        let idx = self.trace.len();
        let c = self.prefix.get(idx).copied().unwrap_or(0);
        self.trace.push((c, n, self.steps));
        if idx + 1 == self.prefix.len() {
            self.base = Some(self.steps);
        }
        c
    }

    fn alloc(&mut self, n: Node) -> Id {
        self.heap.push(n);
        self.heap.len() - 1
    }

    fn deref(&self, mut id: Id) -> Id {
        while let Node::Ind(next) = self.heap[id] {
            id = next;
        }
        id
    }

    fn execute(&mut self, q: &Query) -> R<NarrowResult> {
        let mut frame: Vec<Id> = (0..q.nslots).map(|_| self.alloc(Node::Free)).collect();
        let root = self.build(&q.body, &mut frame);
        let v = self.nf(root)?;
        let mut names: HashMap<Id, String> = HashMap::new();
        for (name, s) in &q.named {
            let id = self.deref(frame[*s]);
            if matches!(self.heap[id], Node::Free) {
                names.entry(id).or_insert_with(|| name.clone());
            }
        }
        let value = self.read(v, &mut names);
        let mut subst = Vec::new();
        for (name, s) in &q.named {
            let id = self.nf(frame[*s])?;
            let e = self.read(id, &mut names);
            if e != Expr::Var(name.clone()) {
                subst.push((name.clone(), e));
            }
        }
        Ok(NarrowResult { value, subst, steps: self.steps })
    }

    fn read(&self, id: Id, names: &mut HashMap<Id, String>) -> Expr {
        stacker::maybe_grow(RED_ZONE, STACK, || {
            let id = self.deref(id);
            match &self.heap[id] {
                Node::Int(n) => Expr::Num(n.clone()),
                Node::Con(s, args) => {
                    let (name, _) = &self.syms.syms[*s as usize];
                    let args: Vec<Expr> = args.iter().map(|a| self.read(*a, names)).collect();
                    if *s == self.syms.true_sym {
                        Expr::True
                    } else if *s == self.syms.false_sym {
                        Expr::False
                    } else if name == TUPLE {
                        Expr::Tuple(args)
                    } else {
                        Expr::Cons(name.clone(), args)
                    }
                }
                _ => {
                    let n = names.len();
                    Expr::Var(names.entry(id).or_insert_with(|| format!("_G{}", n + 1)).clone())
                }
            }
        })
    }

    fn build(&mut self, e: &Ce, frame: &mut Vec<Id>) -> Id {
        match e {
            Ce::Var(s) => frame[*s],
            Ce::Int(n) => self.alloc(Node::Int(n.clone())),
            Ce::Con(s, args) => {
                let ids = args.iter().map(|a| self.build(a, frame)).collect();
                self.alloc(Node::Con(*s, ids))
            }
            Ce::Call(f, args) => {
                let ids = args.iter().map(|a| self.build(a, frame)).collect();
                self.alloc(Node::Call(*f, ids))
            }
            Ce::Op(k, args) => {
                let ids = args.iter().map(|a| self.build(a, frame)).collect();
                self.alloc(Node::Op(*k, ids))
            }
            Ce::Let(bs, body) => {
                let mut holes = Vec::new();
                for (p, _) in bs {
                    let h = self.alloc(Node::Hole);
                    self.bind_let(p, h, frame);
                    holes.push(h);
                }
                for ((_, x), h) in bs.iter().zip(holes) {
                    let v = self.build(x, frame);
                    self.heap[h] = if self.deref(v) == h { Node::Busy } else { Node::Ind(v) };
                }
                self.build(body, frame)
            }
        }
    }

    fn bind_let(&mut self, p: &LPat, node: Id, frame: &mut Vec<Id>) {
        match p {
            LPat::Var(s) => frame[*s] = node,
            LPat::Tuple(ps) => {
                for (i, q) in ps.iter().enumerate() {
                    let sel = self.alloc(Node::Select(node, i, ps.len()));
                    self.bind_let(q, sel, frame);
                }
            }
        }
    }

    fn show(&mut self, id: Id) -> String {
        self.read(id, &mut HashMap::new()).to_string()
    }

    fn tuple_sym(&self, n: usize) -> Option<Sym> {
        self.syms.ids.get(&(TUPLE.to_string(), n)).copied()
    }

    fn hnf(&mut self, id: Id) -> R<Id> {
        stacker::maybe_grow(RED_ZONE, STACK, || {
            let id = self.deref(id);
            match self.heap[id].clone() {
                Node::Free | Node::Con(..) | Node::Int(_) => Ok(id),
                Node::Hole | Node::Busy => Err(Stop::Error(NarrowError::Cycle)),
                Node::Ind(_) => unreachable!(),
                Node::Select(t, i, n) => {
                    self.heap[id] = Node::Busy;
                    let h = self.hnf(t)?;
                    let sym = self.tuple_sym(n);
                    let item = match self.heap[h].clone() {
                        Node::Con(s, args) if Some(s) == sym => args[i],
                        Node::Free if sym.is_some() => {
                            let args: Vec<Id> = (0..n).map(|_| self.alloc(Node::Free)).collect();
                            self.heap[h] = Node::Con(sym.unwrap(), args.clone());
                            args[i]
                        }
                        _ => {
                            let shown = self.show(h);
                            return Err(Stop::Error(NarrowError::TupleArity(n, shown)));
                        }
                    };
                    let r = self.hnf(item)?;
                    self.heap[id] = Node::Ind(r);
                    Ok(r)
                }
                Node::Call(f, args) => {
                    self.heap[id] = Node::Busy;
                    let r = self.apply(f, &args)?;
                    self.heap[id] = Node::Ind(r);
                    Ok(r)
                }
                Node::Op(k, args) => {
                    self.heap[id] = Node::Busy;
                    let r = self.op(k, &args)?;
                    self.heap[id] = Node::Ind(r);
                    Ok(r)
                }
            }
        })
    }

    fn nf(&mut self, id: Id) -> R<Id> {
        stacker::maybe_grow(RED_ZONE, STACK, || {
            let h = self.hnf(id)?;
            if let Node::Con(_, args) = self.heap[h].clone() {
                for a in args {
                    self.nf(a)?;
                }
            }
            Ok(h)
        })
    }

    fn subterm(&self, args: &[Id], pos: &[usize]) -> Id {
        let mut cur = args[pos[0] - 1];
        for &k in &pos[1..] {
            let d = self.deref(cur);
            match &self.heap[d] {
                Node::Con(_, a) => cur = a[k - 1],
                _ => unreachable!("branch positions lie below evaluated constructors"),
            }
        }
        cur
    }

    fn apply(&mut self, f: usize, args: &[Id]) -> R<Id> {
        let prog = self.prog;
        let mut tree = &prog.funs[f].tree;
        loop {
            match tree {
                Tree::Leaf(r) => {
                    self.tick()?;
                    return self.fire(&prog.funs[f].rules[*r], args);
                }
                Tree::Or(alts) => {
                    let i = self.choose(alts.len());
                    tree = &alts[i];
                }
                Tree::Branch(pos, children) => {
                    let node = self.subterm(args, pos);
                    let h = self.hnf(node)?;
                    let next = match self.heap[h].clone() {
                        Node::Con(s, _) => children.iter().find(|(k, _)| *k == CKey::Con(s)),
                        Node::Int(n) => children.iter().find(|(k, _)| *k == CKey::Int(n.clone())),
                        Node::Free => {
                            let i = self.choose(children.len());
                            let (key, sub) = &children[i];
                            self.heap[h] = match key {
                                CKey::Int(n) => Node::Int(n.clone()),
                                CKey::Con(s) => {
                                    let n = self.syms.syms[*s as usize].1;
                                    Node::Con(*s, (0..n).map(|_| self.alloc(Node::Free)).collect())
                                }
                            };
                            self.tick()?;
                            tree = sub;
                            continue;
                        }
                        _ => unreachable!("head normal form"),
                    };
                    match next {
                        Some((_, sub)) => tree = sub,
                        None => return Err(Stop::Fail),
                    }
                }
            }
        }
    }

    fn fire(&mut self, rule: &CRule, args: &[Id]) -> R<Id> {
        let mut frame = vec![0; rule.nslots];
        for (p, &a) in rule.params.iter().zip(args) {
            if !self.match_pat(p, a, &mut frame) {
                return Err(Stop::Fail);
            }
        }
        for &s in &rule.extra {
            frame[s] = self.alloc(Node::Free);
        }
        let body = self.build(&rule.body, &mut frame);
        self.hnf(body)
    }

    fn match_pat(&self, p: &CPat, node: Id, frame: &mut [Id]) -> bool {
        match p {
            CPat::Var(s) => {
                frame[*s] = node;
                true
            }
            CPat::Int(n) => matches!(&self.heap[self.deref(node)], Node::Int(m) if m == n),
            CPat::Con(s, ps) => match &self.heap[self.deref(node)] {
                Node::Con(t, args) if t == s => ps.iter().zip(args.clone()).all(|(q, a)| self.match_pat(q, a, frame)),
                _ => false,
            },
        }
    }

    fn boolean(&mut self, b: bool) -> Id {
        let s = if b { self.syms.true_sym } else { self.syms.false_sym };
        self.alloc(Node::Con(s, Vec::new()))
    }

    /// Head normal form of a Boolean; a free variable is instantiated to
    /// each of `alts` in turn.
    fn condition(&mut self, id: Id, alts: &[bool]) -> R<bool> {
        let h = self.hnf(id)?;
        match self.heap[h].clone() {
            Node::Con(s, _) if s == self.syms.true_sym => Ok(true),
            Node::Con(s, _) if s == self.syms.false_sym => Ok(false),
            Node::Free => {
                let b = alts[self.choose(alts.len())];
                let s = if b { self.syms.true_sym } else { self.syms.false_sym };
                self.heap[h] = Node::Con(s, Vec::new());
                self.tick()?;
                Ok(b)
            }
            _ => {
                let shown = self.show(h);
                Err(Stop::Error(NarrowError::Type(shown)))
            }
        }
    }

    fn integer(&mut self, id: Id) -> R<BigInt> {
        let h = self.hnf(id)?;
        match self.heap[h].clone() {
            Node::Int(n) => Ok(n),
            Node::Free => Err(Stop::Suspend),
            _ => {
                let shown = self.show(h);
                Err(Stop::Error(NarrowError::Type(shown)))
            }
        }
    }

    fn op(&mut self, k: OpKind, args: &[Id]) -> R<Id> {
        match k {
            OpKind::Unify => {
                self.unify(args[0], args[1])?;
                self.tick()?;
                Ok(self.boolean(true))
            }
            OpKind::Conj => {
                let c = self.condition(args[0], &[true, false])?;
                self.tick()?;
                if c {
                    self.hnf(args[1])
                } else {
                    Ok(self.boolean(false))
                }
            }
            OpKind::Guard => {
                if !self.condition(args[0], &[true])? {
                    return Err(Stop::Fail);
                }
                self.tick()?;
                self.hnf(args[1])
            }
            OpKind::If => {
                let c = self.condition(args[0], &[true, false])?;
                self.tick()?;
                self.hnf(if c { args[1] } else { args[2] })
            }
            OpKind::Arith(op) => {
                let a = self.integer(args[0])?;
                let b = self.integer(args[1])?;
                self.tick()?;
                let v = match op {
                    ArithOp::Add => a + b,
                    ArithOp::Sub => a - b,
                    ArithOp::Mul => a * b,
                    ArithOp::Quot | ArithOp::Mod if b.is_zero() => return Err(Stop::Error(NarrowError::ZeroDivisor)),
                    ArithOp::Quot => a / b,
                    ArithOp::Mod => a.mod_floor(&b),
                };
                Ok(self.alloc(Node::Int(v)))
            }
            OpKind::Cmp(op @ (CmpOp::Eq | CmpOp::Ne)) => {
                let a = self.nf(args[0])?;
                let b = self.nf(args[1])?;
                let eq = self.equal(a, b)?;
                self.tick()?;
                Ok(self.boolean(eq == (op == CmpOp::Eq)))
            }
            OpKind::Cmp(op) => {
                let a = self.integer(args[0])?;
                let b = self.integer(args[1])?;
                self.tick()?;
                let r = match op {
                    CmpOp::Lt => a < b,
                    CmpOp::Le => a <= b,
                    CmpOp::Gt => a > b,
                    _ => a >= b,
                };
                Ok(self.boolean(r))
            }
        }
    }

    /// Structural equality of normal forms; free variables suspend.
    fn equal(&self, a: Id, b: Id) -> R<bool> {
        let mut work = vec![(a, b)];
        while let Some((a, b)) = work.pop() {
            let (a, b) = (self.deref(a), self.deref(b));
            match (&self.heap[a], &self.heap[b]) {
                (Node::Free, _) | (_, Node::Free) => return Err(Stop::Suspend),
                (Node::Int(m), Node::Int(n)) => {
                    if m != n {
                        return Ok(false);
                    }
                }
                (Node::Con(f, xs), Node::Con(g, ys)) => {
                    if f != g {
                        return Ok(false);
                    }
                    work.extend(xs.iter().copied().zip(ys.iter().copied()));
                }
                _ => return Ok(false),
            }
        }
        Ok(true)
    }

    fn occurs(&self, var: Id, id: Id) -> bool {
        let mut work = vec![id];
        while let Some(n) = work.pop() {
            let n = self.deref(n);
            if n == var {
                return true;
            }
            if let Node::Con(_, args) = &self.heap[n] {
                work.extend(args.iter().copied());
            }
        }
        false
    }

    fn unify(&mut self, a: Id, b: Id) -> R<()> {
        stacker::maybe_grow(RED_ZONE, STACK, || {
            let a = self.hnf(a)?;
            let b = self.hnf(b)?;
            if a == b {
                return Ok(());
            }
            match (self.heap[a].clone(), self.heap[b].clone()) {
                (Node::Free, Node::Free) => {
                    self.heap[a] = Node::Ind(b);
                    Ok(())
                }
                (Node::Free, _) => self.bind(a, b),
                (_, Node::Free) => self.bind(b, a),
                (Node::Int(m), Node::Int(n)) if m == n => Ok(()),
                (Node::Con(f, xs), Node::Con(g, ys)) if f == g => {
                    for (x, y) in xs.into_iter().zip(ys) {
                        self.unify(x, y)?;
                    }
                    Ok(())
                }
                _ => Err(Stop::Fail),
            }
        })
    }

    fn bind(&mut self, var: Id, val: Id) -> R<()> {
        let val = self.nf(val)?;
        if !matches!(self.heap[self.deref(var)], Node::Free) {
            return self.unify(var, val);
        }
        let var = self.deref(var);
        if self.occurs(var, val) {
            return Err(Stop::Fail);
        }
        self.heap[var] = Node::Ind(val);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reader::{read_program, read_query};

    const EX2: &str = "app [] ys = ys
app (x:xs) ys = x : app xs ys

app3 xs ys zs = app (app xs ys) zs

dup xs | xs =:= app3 _ (z:_) (z:_) = z
";

    fn run(src: &str, q: &str) -> NarrowOutcome {
        let p = read_program(src).unwrap();
        narrow(&p, &read_query(q, &p).unwrap(), Limits::default()).unwrap()
    }

    fn shown(o: &NarrowOutcome) -> Vec<String> {
        o.results.iter().map(|r| r.to_string()).collect()
    }

    #[test]
    fn dup_values() {
        let o = run(EX2, "dup [1,2,2,1]");
        let mut v = shown(&o);
        v.sort();
        assert_eq!(v, vec!["1", "2"]);
        assert_eq!(o.status, Status::Exhausted);
        let o = run(EX2, "dup []");
        assert!(o.results.is_empty());
        assert_eq!(o.status, Status::Exhausted);
    }

    #[test]
    fn splitting_plus() {
        let src = "plus y = (O, y)\nplus (S z) | (x, y) =:= plus z = (S x, y)\n";
        let o = run(src, "plus (S (S O))");
        assert_eq!(shown(&o), vec!["(O, S (S O))", "(S O, S O)", "(S (S O), O)"]);
        assert_eq!(o.status, Status::Exhausted);
    }

    #[test]
    fn free_variables_are_narrowed() {
        let o = run(EX2, "app3 xs ys zs =:= []");
        assert_eq!(shown(&o), vec!["True  where {xs -> [], ys -> [], zs -> []}"]);
        assert_eq!(o.status, Status::Exhausted);
        let o = run(EX2, "app x y =:= [1]");
        assert_eq!(shown(&o), vec!["True  where {x -> [], y -> [1]}", "True  where {x -> [1], y -> []}"]);
    }

    #[test]
    fn laziness_and_sharing() {
        let src = "const x y = x\n\ndec (S x) = x\n\nplus O y = y\nplus (S x) y = S (plus x y)\n";
        let o = run(src, "const O (dec O)");
        assert_eq!(shown(&o), vec!["O"]);
        assert_eq!(o.status, Status::Exhausted);
        let p = read_program(src).unwrap();
        let once = count_steps(&p, &read_query("plus (S (S O)) O", &p).unwrap(), Limits::default()).unwrap();
        let shared = count_steps(&p, &read_query("let x = plus (S (S O)) O in (x, x)", &p).unwrap(), Limits::default()).unwrap();
        assert_eq!(once, 3);
        assert_eq!(shared, once);
        assert_eq!(count_steps(&p, &read_query("O", &p).unwrap(), Limits::default()).unwrap(), 0);
    }

    #[test]
    fn arithmetic_and_suspension() {
        let src = "fac n = if n == 0 then 1 else n * fac (n - 1)\n";
        let o = run(src, "fac 5");
        assert_eq!(shown(&o), vec!["120"]);
        let o = run(src, "fac n =:= 1");
        assert!(o.results.is_empty());
        assert_eq!(o.suspended, 1);
        assert!(o.render().ends_with("suspended=1\n"));
    }

    #[test]
    fn infinite_search_hits_the_limit() {
        let src = "nat O = True\nnat (S x) = nat x\n";
        let p = read_program(src).unwrap();
        let q = read_query("nat x", &p).unwrap();
        let o = narrow(&p, &q, Limits { max_steps: 2_000, max_answers: 10_000, ..Limits::default() }).unwrap();
        assert_eq!(o.status, Status::StepLimit);
        assert!(o.results.len() > 3);
        let o = narrow(&p, &q, Limits { max_answers: 3, ..Limits::default() }).unwrap();
        assert_eq!(o.status, Status::AnswerLimit);
        assert_eq!(shown(&o), vec!["True  where {x -> O}", "True  where {x -> S O}", "True  where {x -> S (S O)}"]);
    }

    #[test]
    fn tuple_arity_mismatch_is_an_error() {
        let p = read_program("f x = x\n").unwrap();
        let q = read_query("let (a, b) = f (O, O, O) in a", &p).unwrap();
        assert!(matches!(narrow(&p, &q, Limits::default()), Err(NarrowError::TupleArity(2, _))));
    }
}
