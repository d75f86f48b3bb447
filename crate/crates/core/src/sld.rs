//! SLD resolution with leftmost selection over a heap of term cells, a
//! trail and an explicit choicepoint stack.
//!
//! The default search is iterative deepening on derivation length, which
//! finds every answer at finite depth. Depth-first search (Prolog's order)
//! is available as well.

use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::Zero;

use crate::ast::{is_fresh_name, Goal, LogicProgram, Subgoal, Substitution, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_steps: u64,
    pub max_depth: u64,
    pub max_answers: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_steps: 100_000, max_depth: 1_000, max_answers: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    #[default]
    IterativeDeepening,
    DepthFirst,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Strategy, String> {
        match s {
            "id" => Ok(Strategy::IterativeDeepening),
            "dfs" => Ok(Strategy::DepthFirst),
            other => Err(format!("unknown strategy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Exhausted,
    StepLimit,
    AnswerLimit,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Exhausted => "exhausted",
            Status::StepLimit => "step-limit",
            Status::AnswerLimit => "answer-limit",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Answer {
    pub subst: Substitution,
    /// Total steps spent when the answer was found.
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchOutcome {
    pub answers: Vec<Answer>,
    pub status: Status,
    pub total_steps: u64,
}

impl SearchOutcome {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for a in &self.answers {
            out.push_str(&a.subst.to_string());
            out.push('\n');
        }
        out.push_str(&format!("status: {} steps={}\n", self.status, self.total_steps));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SldError {
    #[error("instantiation error: unbound variable in arithmetic expression `{0}`")]
    Instantiation(String),
    #[error("type error: `{0}` is not an arithmetic expression")]
    Type(String),
    #[error("evaluation error: division by zero in `{0}`")]
    ZeroDivisor(String),
    #[error("unknown procedure {0}")]
    UnknownProcedure(String),
}

type Sym = u32;

#[derive(Debug, Clone)]
enum Cell {
    Ref(usize),
    Con(Sym),
    Int(BigInt),
    /// Functor and the heap index of its first argument.
    Str(Sym, usize),
}

#[derive(Debug, Clone)]
enum Tt {
    Var(usize),
    Con(Sym),
    Int(BigInt),
    Str(Sym, Vec<Tt>),
}

#[derive(Debug, Clone)]
enum Tg {
    Lit(Tt),
    Ite(Vec<Tg>, Vec<Tg>, Vec<Tg>),
}

#[derive(Debug)]
struct ClauseT {
    nvars: usize,
    head: Vec<Tt>,
    body: Vec<Tg>,
    /// Principal functor of the first argument, for quick rejection.
    first: Option<FirstKey>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum FirstKey {
    Sym(Sym),
    Int(BigInt),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Builtin {
    Is,
    Unify,
    Lt,
    Le,
    Gt,
    Ge,
    ArEq,
    ArNe,
}

#[derive(Debug)]
enum G {
    Call(Cell),
    Ite(Rc<(Vec<G>, Vec<G>, Vec<G>)>),
    CutTo(usize),
}

struct Node {
    goal: Rc<G>,
    next: List,
}

type List = Option<Rc<Node>>;

type Frame = Vec<Option<Cell>>;

fn push_all(items: &[Rc<G>], tail: List) -> List {
    items.iter().rev().fold(tail, |next, g| Some(Rc::new(Node { goal: g.clone(), next })))
}

/// Drops long goal lists without recursing.
struct GoalList(List);

impl Drop for GoalList {
    fn drop(&mut self) {
        let mut cur = self.0.take();
        while let Some(node) = cur {
            match Rc::try_unwrap(node) {
                Ok(mut n) => cur = n.next.take(),
                Err(_) => break,
            }
        }
    }
}

enum Alt {
    Clauses { pred: Sym, goal: Cell, next: usize, rest: GoalList },
    Else { goals: Vec<Rc<G>>, rest: GoalList },
}

struct Choice {
    alt: Alt,
    trail: usize,
    heap: usize,
    depth: u64,
}

/// Compiled program, reusable across queries.
pub struct SldProgram {
    syms: Vec<(String, usize)>,
    sym_ids: HashMap<(String, usize), Sym>,
    preds: HashMap<Sym, Vec<ClauseT>>,
    builtins: HashMap<Sym, Builtin>,
}

impl SldProgram {
    pub fn new(p: &LogicProgram) -> SldProgram {
        let mut prog = SldProgram { syms: Vec::new(), sym_ids: HashMap::new(), preds: HashMap::new(), builtins: HashMap::new() };
        for (name, b) in [
            ("is", Builtin::Is),
            ("=", Builtin::Unify),
            ("<", Builtin::Lt),
            ("=<", Builtin::Le),
            (">", Builtin::Gt),
            (">=", Builtin::Ge),
            ("=:=", Builtin::ArEq),
            ("=\\=", Builtin::ArNe),
        ] {
            let s = prog.sym(name, 2);
            prog.builtins.insert(s, b);
        }
        for c in &p.clauses {
            let mut vars = HashMap::new();
            let head: Vec<Tt> = c.head.args.iter().map(|a| prog.template(a, &mut vars)).collect();
            let body = prog.goal_template(&c.body.items, &mut vars);
            let first = head.first().and_then(|t| match t {
                Tt::Var(_) => None,
                Tt::Con(s) | Tt::Str(s, _) => Some(FirstKey::Sym(*s)),
                Tt::Int(i) => Some(FirstKey::Int(i.clone())),
            });
            let pred = prog.sym(&c.head.pred, c.head.arity());
            prog.preds.entry(pred).or_default().push(ClauseT { nvars: vars.len(), head, body, first });
        }
        prog
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

    fn template(&mut self, t: &Term, vars: &mut HashMap<String, usize>) -> Tt {
        match t {
            Term::Var(v) => {
                let n = vars.len();
                Tt::Var(*vars.entry(v.clone()).or_insert(n))
            }
            Term::Num(n) => Tt::Int(n.clone()),
            Term::Comp(f, args) if args.is_empty() => Tt::Con(self.sym(f, 0)),
            Term::Comp(f, args) => {
                let s = self.sym(f, args.len());
                Tt::Str(s, args.iter().map(|a| self.template(a, vars)).collect())
            }
        }
    }

    fn goal_template(&mut self, items: &[Subgoal], vars: &mut HashMap<String, usize>) -> Vec<Tg> {
        items
            .iter()
            .map(|sg| match sg {
                Subgoal::Lit(l) => Tg::Lit(self.template(&l.as_term(), vars)),
                Subgoal::IfThenElse { cond, then, els } => Tg::Ite(
                    self.goal_template(&cond.items, vars),
                    self.goal_template(&then.items, vars),
                    self.goal_template(&els.items, vars),
                ),
            })
            .collect()
    }

    pub fn solve(&mut self, g: &Goal, limits: Limits, strategy: Strategy) -> Result<SearchOutcome, SldError> {
        let mut vars = HashMap::new();
        let body = self.goal_template(&g.items, &mut vars);
        let mut names: Vec<(String, usize)> =
            vars.iter().filter(|(v, _)| !is_fresh_name(v)).map(|(v, &i)| (v.clone(), i)).collect();
        names.sort();
        let mut m = Machine { prog: self, heap: Vec::new(), trail: Vec::new(), choices: Vec::new(), steps: 0 };
        m.run(&body, vars.len(), &names, limits, strategy)
    }
}

/// Solves `g` against `p` under the given limits.
pub fn solve(p: &LogicProgram, g: &Goal, limits: Limits) -> Result<SearchOutcome, SldError> {
    SldProgram::new(p).solve(g, limits, Strategy::IterativeDeepening)
}

pub fn solve_with(p: &LogicProgram, g: &Goal, limits: Limits, strategy: Strategy) -> Result<SearchOutcome, SldError> {
    SldProgram::new(p).solve(g, limits, strategy)
}

struct Machine<'p> {
    prog: &'p SldProgram,
    heap: Vec<Cell>,
    trail: Vec<usize>,
    choices: Vec<Choice>,
    steps: u64,
}

enum PassEnd {
    Finished,
    Steps,
    Answers,
}

struct Pass {
    cutoff: bool,
    found: Vec<Answer>,
}

impl Machine<'_> {
    fn new_var(&mut self) -> usize {
        let a = self.heap.len();
        self.heap.push(Cell::Ref(a));
        a
    }

    /// Builds a template instance; unset frame slots get fresh variables.
    /// `shared` records whether an already bound slot was used.
    fn build(&mut self, t: &Tt, frame: &mut Frame, shared: &mut bool) -> Cell {
        match t {
            Tt::Var(i) => match &frame[*i] {
                Some(c) => {
                    *shared = true;
                    c.clone()
                }
                None => {
                    let c = Cell::Ref(self.new_var());
                    frame[*i] = Some(c.clone());
                    c
                }
            },
            Tt::Con(s) => Cell::Con(*s),
            Tt::Int(n) => Cell::Int(n.clone()),
            Tt::Str(f, args) => {
                let start = self.heap.len();
                for _ in args {
                    self.heap.push(Cell::Ref(0));
                }
                for (k, a) in args.iter().enumerate() {
                    let c = self.build(a, frame, shared);
                    self.heap[start + k] = c;
                }
                Cell::Str(*f, start)
            }
        }
    }

    fn build_goals(&mut self, gs: &[Tg], frame: &mut Frame) -> Vec<Rc<G>> {
        let mut shared = false;
        gs.iter()
            .map(|g| match g {
                Tg::Lit(t) => Rc::new(G::Call(self.build(t, frame, &mut shared))),
                Tg::Ite(c, t, e) => {
                    let c = self.build_goals(c, frame).into_iter().map(unwrap_rc).collect();
                    let t = self.build_goals(t, frame).into_iter().map(unwrap_rc).collect();
                    let e = self.build_goals(e, frame).into_iter().map(unwrap_rc).collect();
                    Rc::new(G::Ite(Rc::new((c, t, e))))
                }
            })
            .collect()
    }

    /// Matches a clause head argument against a goal argument. The first
    /// occurrence of a clause variable takes the goal cell itself.
    fn match_head(&mut self, t: &Tt, goal: Cell, frame: &mut Frame) -> bool {
        match t {
            Tt::Var(i) => match frame[*i].clone() {
                None => {
                    frame[*i] = Some(self.deref(goal));
                    true
                }
                Some(c) => self.unify(c, goal),
            },
            Tt::Con(s) => match self.deref(goal) {
                Cell::Ref(v) => {
                    self.bind(v, Cell::Con(*s));
                    true
                }
                Cell::Con(g) => g == *s,
                _ => false,
            },
            Tt::Int(n) => match self.deref(goal) {
                Cell::Ref(v) => {
                    self.bind(v, Cell::Int(n.clone()));
                    true
                }
                Cell::Int(m) => &m == n,
                _ => false,
            },
            Tt::Str(f, args) => match self.deref(goal) {
                Cell::Str(g, start) if g == *f => {
                    args.iter().enumerate().all(|(k, a)| {
                        let c = self.heap[start + k].clone();
                        self.match_head(a, c, frame)
                    })
                }
                Cell::Ref(v) => {
                    let mut shared = false;
                    let c = self.build(t, frame, &mut shared);
                    if shared && self.occurs(v, &c) {
                        return false;
                    }
                    self.bind(v, c);
                    true
                }
                _ => false,
            },
        }
    }

    fn deref(&self, mut c: Cell) -> Cell {
        while let Cell::Ref(a) = c {
            match &self.heap[a] {
                Cell::Ref(b) if *b == a => return c,
                next => c = next.clone(),
            }
        }
        c
    }

    fn occurs(&self, var: usize, c: &Cell) -> bool {
        let mut stack = vec![c.clone()];
        while let Some(c) = stack.pop() {
            match self.deref(c) {
                Cell::Ref(a) => {
                    if a == var {
                        return true;
                    }
                }
                Cell::Str(f, start) => {
                    let n = self.prog.syms[f as usize].1;
                    stack.extend(self.heap[start..start + n].iter().cloned());
                }
                _ => {}
            }
        }
        false
    }

    fn bind(&mut self, var: usize, c: Cell) {
        self.trail.push(var);
        self.heap[var] = c;
    }

    fn unify(&mut self, a: Cell, b: Cell) -> bool {
        let mut work = vec![(a, b)];
        while let Some((a, b)) = work.pop() {
            let a = self.deref(a);
            let b = self.deref(b);
            match (a, b) {
                (Cell::Ref(x), Cell::Ref(y)) => {
                    if x != y {
                        if x < y {
                            self.bind(y, Cell::Ref(x));
                        } else {
                            self.bind(x, Cell::Ref(y));
                        }
                    }
                }
                (Cell::Ref(x), t) | (t, Cell::Ref(x)) => {
                    if matches!(t, Cell::Str(..)) && self.occurs(x, &t) {
                        return false;
                    }
                    self.bind(x, t);
                }
                (Cell::Con(p), Cell::Con(q)) => {
                    if p != q {
                        return false;
                    }
                }
                (Cell::Int(m), Cell::Int(n)) => {
                    if m != n {
                        return false;
                    }
                }
                (Cell::Str(f, s), Cell::Str(g, t)) => {
                    if f != g {
                        return false;
                    }
                    let n = self.prog.syms[f as usize].1;
                    for k in (0..n).rev() {
                        work.push((self.heap[s + k].clone(), self.heap[t + k].clone()));
                    }
                }
                _ => return false,
            }
        }
        true
    }

    fn undo_to(&mut self, trail: usize, heap: usize) {
        while self.trail.len() > trail {
            let v = self.trail.pop().unwrap();
            self.heap[v] = Cell::Ref(v);
        }
        self.heap.truncate(heap);
    }

    fn read(&self, c: &Cell, names: &mut HashMap<usize, String>) -> Term {
        stacker::maybe_grow(64 * 1024, 1024 * 1024, || match self.deref(c.clone()) {
            Cell::Ref(a) => {
                let n = names.len();
                Term::Var(names.entry(a).or_insert_with(|| format!("_G{}", n + 1)).clone())
            }
            Cell::Con(s) => Term::atom(self.prog.syms[s as usize].0.clone()),
            Cell::Int(n) => Term::Num(n),
            Cell::Str(f, start) => {
                let (name, n) = &self.prog.syms[f as usize];
                let args = (0..*n).map(|k| self.read(&self.heap[start + k], names)).collect();
                Term::Comp(name.clone(), args)
            }
        })
    }

    fn show(&self, c: &Cell) -> String {
        self.read(c, &mut HashMap::new()).to_string()
    }

    fn eval(&self, c: &Cell) -> Result<BigInt, SldError> {
        stacker::maybe_grow(64 * 1024, 1024 * 1024, || match self.deref(c.clone()) {
            Cell::Int(n) => Ok(n),
            Cell::Ref(_) => Err(SldError::Instantiation(self.show(c))),
            Cell::Con(_) => Err(SldError::Type(self.show(c))),
            Cell::Str(f, start) => {
                let (name, n) = &self.prog.syms[f as usize];
                let arg = |k: usize| self.eval(&self.heap[start + k]);
                match (name.as_str(), *n) {
                    ("+", 2) => Ok(arg(0)? + arg(1)?),
                    ("-", 2) => Ok(arg(0)? - arg(1)?),
                    ("*", 2) => Ok(arg(0)? * arg(1)?),
                    ("//", 2) | ("mod", 2) => {
                        let (a, b) = (arg(0)?, arg(1)?);
                        if b.is_zero() {
                            return Err(SldError::ZeroDivisor(self.show(c)));
                        }
                        Ok(if name == "//" { a / b } else { a.mod_floor(&b) })
                    }
                    ("-", 1) => Ok(-arg(0)?),
                    ("+", 1) => arg(0),
                    _ => Err(SldError::Type(self.show(c))),
                }
            }
        })
    }

    fn builtin(&mut self, b: Builtin, start: usize) -> Result<bool, SldError> {
        let l = self.heap[start].clone();
        let r = self.heap[start + 1].clone();
        Ok(match b {
            Builtin::Unify => self.unify(l, r),
            Builtin::Is => {
                let v = self.eval(&r)?;
                self.unify(l, Cell::Int(v))
            }
            _ => {
                let (x, y) = (self.eval(&l)?, self.eval(&r)?);
                match b {
                    Builtin::Lt => x < y,
                    Builtin::Le => x <= y,
                    Builtin::Gt => x > y,
                    Builtin::Ge => x >= y,
                    Builtin::ArEq => x == y,
                    _ => x != y,
                }
            }
        })
    }

    fn first_matches(&self, cl: &ClauseT, goal: &Cell) -> bool {
        let Some(key) = &cl.first else { return true };
        let Cell::Str(_, start) = goal else { return true };
        match (self.deref(self.heap[*start].clone()), key) {
            (Cell::Ref(_), _) => true,
            (Cell::Con(s) | Cell::Str(s, _), FirstKey::Sym(k)) => s == *k,
            (Cell::Int(n), FirstKey::Int(k)) => &n == k,
            _ => false,
        }
    }

    /// Tries clauses of `pred` from index `from`; returns the new goal list on
    /// success.
    fn resolve(&mut self, pred: Sym, goal: &Cell, from: usize, rest: &List, depth: u64) -> Option<List> {
        let prog = self.prog;
        let clauses = &prog.preds[&pred];
        let candidates: Vec<usize> = (from..clauses.len()).filter(|&i| self.first_matches(&clauses[i], goal)).collect();
        for (k, &i) in candidates.iter().enumerate() {
            let (trail, heap) = (self.trail.len(), self.heap.len());
            let cl = &clauses[i];
            let mut frame: Frame = vec![None; cl.nvars];
            let ok = match goal {
                Cell::Str(_, start) => cl.head.iter().enumerate().all(|(j, a)| {
                    let g = self.heap[start + j].clone();
                    self.match_head(a, g, &mut frame)
                }),
                _ => true,
            };
            if !ok {
                self.undo_to(trail, heap);
                continue;
            }
            let body = self.build_goals(&cl.body, &mut frame);
            if let Some(&next) = candidates.get(k + 1) {
                self.choices.push(Choice {
                    alt: Alt::Clauses { pred, goal: goal.clone(), next, rest: GoalList(rest.clone()) },
                    trail,
                    heap,
                    depth,
                });
            }
            return Some(push_all(&body, rest.clone()));
        }
        None
    }

    fn run(
        &mut self,
        body: &[Tg],
        nvars: usize,
        names: &[(String, usize)],
        limits: Limits,
        strategy: Strategy,
    ) -> Result<SearchOutcome, SldError> {
        let mut frame: Frame = (0..nvars).map(|_| Some(Cell::Ref(self.new_var()))).collect();
        let goals = self.build_goals(body, &mut frame);
        let mut answers: Vec<Answer> = Vec::new();
        let (mut bound, mut prev) = match strategy {
            Strategy::IterativeDeepening => (limits.max_depth.min(16), 0),
            Strategy::DepthFirst => (limits.max_depth, 0),
        };
        loop {
            let mut pass = Pass { cutoff: false, found: Vec::new() };
            let end = self.pass(&goals, names, bound, prev, limits, &mut answers, &mut pass)?;
            match end {
                PassEnd::Steps => return Ok(self.outcome(answers, Status::StepLimit)),
                PassEnd::Answers => return Ok(self.outcome(answers, Status::AnswerLimit)),
                PassEnd::Finished => {}
            }
            if !pass.cutoff {
                return Ok(self.outcome(pass.found, Status::Exhausted));
            }
            if bound >= limits.max_depth {
                return Ok(self.outcome(answers, Status::StepLimit));
            }
            prev = bound;
            bound = (bound * 2).min(limits.max_depth);
        }
    }

    fn outcome(&self, answers: Vec<Answer>, status: Status) -> SearchOutcome {
        SearchOutcome { answers, status, total_steps: self.steps }
    }

    fn answer(&self, names: &[(String, usize)]) -> Substitution {
        let mut fresh: HashMap<usize, String> = HashMap::new();
        for (n, i) in names {
            if let Cell::Ref(a) = self.deref(Cell::Ref(*i)) {
                fresh.entry(a).or_insert_with(|| n.clone());
            }
        }
        let mut s = Substitution::new();
        for (n, i) in names {
            let t = self.read(&Cell::Ref(*i), &mut fresh);
            if t.as_var() != Some(n.as_str()) {
                s.insert_raw(n.clone(), t);
            }
        }
        s
    }

    #[allow(clippy::too_many_arguments)]
    fn pass(
        &mut self,
        start: &[Rc<G>],
        names: &[(String, usize)],
        bound: u64,
        prev: u64,
        limits: Limits,
        answers: &mut Vec<Answer>,
        pass: &mut Pass,
    ) -> Result<PassEnd, SldError> {
        let prog = self.prog;
        let base_heap = self.heap.len();
        let base_trail = self.trail.len();
        self.choices.clear();
        let mut goals = GoalList(push_all(start, None));
        let mut depth: u64 = 0;
        loop {
            if self.steps >= limits.max_steps {
                self.undo_to(base_trail, base_heap);
                return Ok(PassEnd::Steps);
            }
            let next = goals.0.as_ref().map(|n| (n.goal.clone(), n.next.clone()));
            let ok = match next {
                None => {
                    let a = Answer { subst: self.answer(names), steps: self.steps };
                    if depth > prev {
                        answers.push(a.clone());
                    }
                    pass.found.push(a);
                    if answers.len() >= limits.max_answers {
                        self.undo_to(base_trail, base_heap);
                        return Ok(PassEnd::Answers);
                    }
                    false
                }
                Some((g, rest)) => match &*g {
                    G::CutTo(h) => {
                        self.choices.truncate(*h);
                        goals = GoalList(rest);
                        true
                    }
                    G::Ite(parts) => {
                        let (c, t, e) = &**parts;
                        let else_goals: Vec<Rc<G>> = e.iter().map(clone_goal).collect();
                        let then_goals: Vec<Rc<G>> = t.iter().map(clone_goal).collect();
                        let height = self.choices.len();
                        self.choices.push(Choice {
                            alt: Alt::Else { goals: else_goals, rest: GoalList(rest.clone()) },
                            trail: self.trail.len(),
                            heap: self.heap.len(),
                            depth,
                        });
                        let after = push_all(&then_goals, rest);
                        let after = Some(Rc::new(Node { goal: Rc::new(G::CutTo(height)), next: after }));
                        let cond: Vec<Rc<G>> = c.iter().map(clone_goal).collect();
                        goals = GoalList(push_all(&cond, after));
                        true
                    }
                    G::Call(cell) => {
                        let cell = self.deref(cell.clone());
                        let (sym, start) = match cell {
                            Cell::Str(f, s) => (f, Some(s)),
                            Cell::Con(f) => (f, None),
                            _ => return Err(SldError::Type(self.show(&cell))),
                        };
                        if depth >= bound {
                            pass.cutoff = true;
                            false
                        } else if let (Some(&b), Some(s)) = (prog.builtins.get(&sym), start) {
                            self.steps += 1;
                            if self.builtin(b, s)? {
                                depth += 1;
                                goals = GoalList(rest);
                                true
                            } else {
                                false
                            }
                        } else if prog.preds.contains_key(&sym) {
                            match self.resolve(sym, &cell, 0, &rest, depth) {
                                Some(gl) => {
                                    self.steps += 1;
                                    depth += 1;
                                    goals = GoalList(gl);
                                    true
                                }
                                None => false,
                            }
                        } else {
                            let (n, a) = &self.prog.syms[sym as usize];
                            return Err(SldError::UnknownProcedure(format!("{n}/{a}")));
                        }
                    }
                },
            };
            if ok {
                continue;
            }
            // backtrack
            loop {
                let Some(ch) = self.choices.pop() else {
                    self.undo_to(base_trail, base_heap);
                    return Ok(PassEnd::Finished);
                };
                self.undo_to(ch.trail, ch.heap);
                depth = ch.depth;
                match ch.alt {
                    Alt::Else { goals: e, rest } => {
                        goals = GoalList(push_all(&e, rest.0.clone()));
                        break;
                    }
                    Alt::Clauses { pred, goal, next, rest } => {
                        if let Some(gl) = self.resolve(pred, &goal, next, &rest.0, depth) {
                            self.steps += 1;
                            depth += 1;
                            goals = GoalList(gl);
                            break;
                        }
                    }
                }
            }
        }
    }
}

fn unwrap_rc(g: Rc<G>) -> G {
    Rc::try_unwrap(g).unwrap_or_else(|rc| match &*rc {
        G::Call(c) => G::Call(c.clone()),
        G::Ite(p) => G::Ite(p.clone()),
        G::CutTo(h) => G::CutTo(*h),
    })
}

fn clone_goal(g: &G) -> Rc<G> {
    Rc::new(match g {
        G::Call(c) => G::Call(c.clone()),
        G::Ite(p) => G::Ite(p.clone()),
        G::CutTo(h) => G::CutTo(*h),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse_goal, parse_program};

    const DUP: &str = "app([],Ys,Ys).
app([X|Xs],Ys,[X|Zs]) :- app(Xs,Ys,Zs).
app3(Xs,Ys,Zs,Ts) :- app(Xs,Ys,Rs), app(Rs,Zs,Ts).
dup(Xs,Z) :- app3(_,[Z|_],[Z|_],Xs).";

    fn run(src: &str, goal: &str, limits: Limits) -> SearchOutcome {
        solve(&parse_program(src).unwrap(), &parse_goal(goal).unwrap(), limits).unwrap()
    }

    #[test]
    fn dup_answers_then_limit() {
        let out = run(DUP, "dup([1,2,2,1],Z)", Limits { max_steps: 20_000, ..Limits::default() });
        let mut shown: Vec<String> = out.answers.iter().map(|a| a.subst.to_string()).collect();
        shown.sort();
        assert_eq!(shown, vec!["{Z -> 1}", "{Z -> 2}"]);
        assert_eq!(out.status, Status::StepLimit);
    }

    #[test]
    fn dup_of_empty_list_never_terminates() {
        let out = run(DUP, "dup([],Z)", Limits { max_steps: 5_000, ..Limits::default() });
        assert!(out.answers.is_empty());
        assert_eq!(out.status, Status::StepLimit);
    }

    #[test]
    fn single_fact_exhausts() {
        let out = run(DUP, "app([],L,L)", Limits::default());
        assert_eq!(out.answers.len(), 1);
        assert!(out.answers[0].subst.is_empty());
        assert_eq!(out.status, Status::Exhausted);
        assert_eq!(out.render(), "{}\nstatus: exhausted steps=1\n");
    }

    #[test]
    fn exhausted_search_uses_prolog_order() {
        let out = run(DUP, "app(X,Y,[a,b])", Limits::default());
        let shown: Vec<String> = out.answers.iter().map(|a| a.subst.to_string()).collect();
        assert_eq!(shown, vec!["{X -> [], Y -> [a,b]}", "{X -> [a], Y -> [b]}", "{X -> [a,b], Y -> []}"]);
        assert_eq!(out.status, Status::Exhausted);
    }

    #[test]
    fn arithmetic_and_if_then_else() {
        let fac = "fac(N,F) :- (N=0 -> F=1 ; N1 is N - 1, fac(N1, F1), F is F1 * N).";
        let out = run(fac, "fac(5,F)", Limits::default());
        assert_eq!(out.answers[0].subst.to_string(), "{F -> 120}");
        assert_eq!(out.status, Status::Exhausted);
        let out = run(fac, "fac(N,1)", Limits::default());
        assert_eq!(out.answers[0].subst.to_string(), "{N -> 0}");
        let err = solve(&parse_program(fac).unwrap(), &parse_goal("X is Y + 1").unwrap(), Limits::default());
        assert!(matches!(err, Err(SldError::Instantiation(_))));
        let out = run("m(X,Y) :- Y is X mod 3.", "m(-7,Y)", Limits::default());
        assert_eq!(out.answers[0].subst.to_string(), "{Y -> 2}");
        let out = run("q(X,Y) :- Y is X // 2.", "q(-7,Y)", Limits::default());
        assert_eq!(out.answers[0].subst.to_string(), "{Y -> -3}");
    }

    #[test]
    fn occurs_check_and_unbound_answers() {
        let out = run("eq(X,X).", "eq(Y,f(Y))", Limits::default());
        assert!(out.answers.is_empty());
        let out = run("eq(X,X).", "eq(A,B)", Limits::default());
        assert_eq!(out.answers[0].subst.to_string(), "{B -> A}");
        let out = run("p(f(_)).", "p(X)", Limits::default());
        assert_eq!(out.answers[0].subst.to_string(), "{X -> f(_G1)}");
    }

    #[test]
    fn unknown_procedure_is_an_error() {
        let r = solve(&parse_program("p :- q.").unwrap(), &parse_goal("p").unwrap(), Limits::default());
        assert_eq!(r, Err(SldError::UnknownProcedure("q/0".into())));
    }

    #[test]
    fn depth_first_reproduces_prolog() {
        let p = parse_program("nat(o).\nnat(s(X)) :- nat(X).").unwrap();
        let out = solve_with(&p, &parse_goal("nat(X)").unwrap(), Limits { max_answers: 3, ..Limits::default() }, Strategy::DepthFirst).unwrap();
        let shown: Vec<String> = out.answers.iter().map(|a| a.subst.to_string()).collect();
        assert_eq!(shown, vec!["{X -> o}", "{X -> s(o)}", "{X -> s(s(o))}"]);
        assert_eq!(out.status, Status::AnswerLimit);
    }
}
