//! Translation of logic programs into functional logic programs at three
//! levels: Boolean functions, result tuples unified with `=:=`, and lazy
//! local bindings.

use std::collections::{BTreeMap, BTreeSet};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::analysis::ResPosMap;
use crate::ast::{is_fresh_name, Clause, Goal, Literal, LogicProgram, PredKey, Subgoal, Term, CONS, NIL};
use crate::codegen::{Kind, ManglingTable, VarScope};
use crate::flc::{count_occurrences, free_vars, ArithOp, Binding, CmpOp, DataDecl, Expr, FlcProgram, Pattern, Rule};
use crate::flc::{LIST_CONS, LIST_NIL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Conservative,
    Functional,
    Demand,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Mode, String> {
        match s {
            "conservative" => Ok(Mode::Conservative),
            "functional" => Ok(Mode::Functional),
            "demand" => Ok(Mode::Demand),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Conservative => "conservative",
            Mode::Functional => "functional",
            Mode::Demand => "demand",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TransformMode {
    pub mode: Mode,
    pub inline: bool,
    pub use_let: bool,
}

impl TransformMode {
    pub fn new(mode: Mode) -> TransformMode {
        TransformMode { mode, inline: true, use_let: true }
    }

    pub fn conservative() -> TransformMode {
        TransformMode::new(Mode::Conservative)
    }

    pub fn functional() -> TransformMode {
        TransformMode::new(Mode::Functional)
    }

    pub fn demand() -> TransformMode {
        TransformMode::new(Mode::Demand)
    }

    fn lets(&self) -> bool {
        self.mode == Mode::Demand && self.use_let
    }
}

impl Default for TransformMode {
    fn default() -> Self {
        TransformMode::demand()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct TransformError {
    pub message: String,
}

fn err<T>(message: impl Into<String>) -> Result<T, TransformError> {
    Err(TransformError { message: message.into() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Builtin {
    Is,
    Unify,
    Cmp(CmpOp),
}

fn builtin(l: &Literal) -> Option<Builtin> {
    if l.arity() != 2 {
        return None;
    }
    Some(match l.pred.as_str() {
        "is" => Builtin::Is,
        "=" => Builtin::Unify,
        "<" => Builtin::Cmp(CmpOp::Lt),
        "=<" => Builtin::Cmp(CmpOp::Le),
        ">" => Builtin::Cmp(CmpOp::Gt),
        ">=" => Builtin::Cmp(CmpOp::Ge),
        "=:=" => Builtin::Cmp(CmpOp::Eq),
        "=\\=" => Builtin::Cmp(CmpOp::Ne),
        _ => return None,
    })
}

pub fn is_builtin(l: &Literal) -> bool {
    builtin(l).is_some()
}

/// Result arguments (ascending positions) and the remaining arguments.
pub fn split_args(lit: &Literal, respos: &BTreeSet<usize>) -> (Vec<Term>, Vec<Term>) {
    let mut results = Vec::new();
    let mut rest = Vec::new();
    for (i, a) in lit.args.iter().enumerate() {
        if respos.contains(&(i + 1)) {
            results.push(a.clone());
        } else {
            rest.push(a.clone());
        }
    }
    (results, rest)
}

/// Registers every symbol of `p` in program order.
fn register_program(p: &LogicProgram, table: &mut ManglingTable, constructors: &mut Vec<(String, usize)>) {
    for c in &p.clauses {
        table.mangle(&c.head.pred, c.head.arity(), Kind::Function);
        register_terms(&c.head.args, table, constructors);
        register_goal(&c.body, table, constructors);
    }
}

fn register_goal(g: &Goal, table: &mut ManglingTable, constructors: &mut Vec<(String, usize)>) {
    for sg in &g.items {
        match sg {
            Subgoal::Lit(l) => {
                if builtin(l).is_none() {
                    table.mangle(&l.pred, l.arity(), Kind::Function);
                    register_terms(&l.args, table, constructors);
                } else if l.pred == "=" {
                    register_terms(&l.args, table, constructors);
                }
            }
            Subgoal::IfThenElse { cond, then, els } => {
                register_goal(cond, table, constructors);
                register_goal(then, table, constructors);
                register_goal(els, table, constructors);
            }
        }
    }
}

fn register_terms(ts: &[Term], table: &mut ManglingTable, constructors: &mut Vec<(String, usize)>) {
    for t in ts {
        register_term(t, table, constructors);
    }
}

fn register_term(t: &Term, table: &mut ManglingTable, constructors: &mut Vec<(String, usize)>) {
    if let Term::Comp(f, args) = t {
        let is_list = (f == CONS && args.len() == 2) || (f == NIL && args.is_empty());
        if !is_list && table.lookup(f, args.len(), Kind::Constructor).is_none() {
            let name = table.mangle(f, args.len(), Kind::Constructor);
            constructors.push((name, args.len()));
        }
        register_terms(args, table, constructors);
    }
}

/// Target expression of a term. Symbols missing from `table` are mangled on
/// the fly.
pub fn transform_term(t: &Term, table: &mut ManglingTable, scope: &mut VarScope) -> Expr {
    match t {
        Term::Var(v) => Expr::Var(scope.mangle(v)),
        Term::Num(n) => Expr::Num(n.clone()),
        Term::Comp(f, args) if f == CONS && args.len() == 2 => Expr::Cons(
            LIST_CONS.into(),
            vec![transform_term(&args[0], table, scope), transform_term(&args[1], table, scope)],
        ),
        Term::Comp(f, args) if f == NIL && args.is_empty() => Expr::nil(),
        Term::Comp(f, args) => {
            let name = table.mangle(f, args.len(), Kind::Constructor);
            Expr::Cons(name, args.iter().map(|a| transform_term(a, table, scope)).collect())
        }
    }
}

pub fn transform_pattern(t: &Term, table: &mut ManglingTable, scope: &mut VarScope) -> Pattern {
    match t {
        Term::Var(v) => Pattern::Var(scope.mangle(v)),
        Term::Num(n) => Pattern::Num(n.clone()),
        Term::Comp(f, args) if f == CONS && args.len() == 2 => Pattern::Cons(
            LIST_CONS.into(),
            vec![transform_pattern(&args[0], table, scope), transform_pattern(&args[1], table, scope)],
        ),
        Term::Comp(f, args) if f == NIL && args.is_empty() => Pattern::Cons(LIST_NIL.into(), Vec::new()),
        Term::Comp(f, args) => {
            let name = table.mangle(f, args.len(), Kind::Constructor);
            Pattern::Cons(name, args.iter().map(|a| transform_pattern(a, table, scope)).collect())
        }
    }
}

/// Transformed program together with the naming information needed to map
/// answers back to source terms.
#[derive(Debug, Clone)]
pub struct Translation {
    pub program: FlcProgram,
    pub table: ManglingTable,
    pub respos: ResPosMap,
    pub mode: TransformMode,
}

/// Translated goal: a Boolean-valued expression plus the names of the goal
/// variables it mentions.
#[derive(Debug, Clone)]
pub struct GoalQuery {
    pub expr: Expr,
    /// Target variable name to source variable name.
    pub vars: BTreeMap<String, String>,
    /// Program names plus the constructors introduced by the goal.
    pub table: ManglingTable,
}

struct Ctx<'a> {
    table: &'a mut ManglingTable,
    scope: VarScope,
    respos: &'a ResPosMap,
    mode: TransformMode,
    /// Predicate and arity of the clause, for diagnostics.
    owner: String,
}

enum Item {
    Cond(Expr),
    Bind(Pattern, Expr),
}

struct Plan {
    items: Vec<Item>,
    bound: BTreeSet<String>,
}

impl Ctx<'_> {
    fn term(&mut self, t: &Term) -> Expr {
        transform_term(t, self.table, &mut self.scope)
    }

    fn pattern(&mut self, t: &Term) -> Pattern {
        transform_pattern(t, self.table, &mut self.scope)
    }

    fn function(&mut self, l: &Literal) -> String {
        self.table.mangle(&l.pred, l.arity(), Kind::Function)
    }

    fn respos_of(&self, l: &Literal) -> BTreeSet<usize> {
        if self.mode.mode == Mode::Conservative {
            return BTreeSet::new();
        }
        self.respos.get(&l.key())
    }

    fn arith(&mut self, t: &Term) -> Result<Expr, TransformError> {
        match t {
            Term::Var(_) | Term::Num(_) => Ok(self.term(t)),
            Term::Comp(f, args) if args.len() == 2 => {
                let op = match f.as_str() {
                    "+" => ArithOp::Add,
                    "-" => ArithOp::Sub,
                    "*" => ArithOp::Mul,
                    "//" => ArithOp::Quot,
                    "mod" => ArithOp::Mod,
                    _ => return err(format!("non-arithmetic operator `{f}/2` in arithmetic expression `{t}` ({})", self.owner)),
                };
                Ok(Expr::arith(op, self.arith(&args[0])?, self.arith(&args[1])?))
            }
            Term::Comp(f, args) if args.len() == 1 && (f == "-" || f == "+") => {
                let inner = self.arith(&args[0])?;
                Ok(if f == "-" { Expr::arith(ArithOp::Sub, Expr::Num(0.into()), inner) } else { inner })
            }
            Term::Comp(f, args) => err(format!(
                "non-arithmetic operator `{f}/{}` in arithmetic expression `{t}` ({})",
                args.len(),
                self.owner
            )),
        }
    }

    /// Condition form of a single literal (no bindings).
    fn condition(&mut self, l: &Literal) -> Result<Expr, TransformError> {
        match builtin(l) {
            Some(Builtin::Is) => Ok(Expr::unify(self.term(&l.args[0]), self.arith(&l.args[1])?)),
            Some(Builtin::Unify) => Ok(Expr::unify(self.term(&l.args[0]), self.term(&l.args[1]))),
            Some(Builtin::Cmp(op)) => Ok(Expr::cmp(op, self.arith(&l.args[0])?, self.arith(&l.args[1])?)),
            None => {
                let rp = self.respos_of(l);
                let fname = self.function(l);
                if rp.is_empty() {
                    let args = l.args.iter().map(|a| self.term(a)).collect();
                    Ok(Expr::Apply(fname, args))
                } else {
                    let (results, rest) = split_args(l, &rp);
                    let results = results.iter().map(|a| self.term(a)).collect();
                    let rest = rest.iter().map(|a| self.term(a)).collect();
                    Ok(Expr::unify(Expr::tuple_or_single(results), Expr::Apply(fname, rest)))
                }
            }
        }
    }

    /// Boolean test for an if-then-else condition.
    fn simple_condition(&mut self, cond: &Goal) -> Result<Expr, TransformError> {
        if let [Subgoal::Lit(l)] = cond.items.as_slice() {
            match builtin(l) {
                Some(Builtin::Cmp(op)) => return Ok(Expr::cmp(op, self.arith(&l.args[0])?, self.arith(&l.args[1])?)),
                Some(Builtin::Unify) => {
                    return Ok(Expr::cmp(CmpOp::Eq, self.term(&l.args[0]), self.term(&l.args[1])));
                }
                _ => {}
            }
        }
        err(format!(
            "unsupported if-then-else condition `{cond}` ({}): only an arithmetic comparison or `=` can be translated",
            self.owner
        ))
    }

    /// Conjunction of conditions, as used by the Boolean translation levels.
    fn goal_conditions(&mut self, g: &Goal) -> Result<Vec<Expr>, TransformError> {
        let mut out = Vec::new();
        for sg in &g.items {
            match sg {
                Subgoal::Lit(l) => out.push(self.condition(l)?),
                Subgoal::IfThenElse { cond, then, els } => {
                    let c = self.simple_condition(cond)?;
                    let t = Expr::conj_all(self.goal_conditions(then)?);
                    let e = Expr::conj_all(self.goal_conditions(els)?);
                    out.push(Expr::ite(c, t, e));
                }
            }
        }
        Ok(out)
    }

    /// Candidate variables a literal could bind, and the variables occurring
    /// in its result arguments.
    fn candidates(&self, l: &Literal, protected: &BTreeSet<String>) -> (Option<Vec<String>>, BTreeSet<String>) {
        let as_var = |t: &Term| t.as_var().map(str::to_string);
        match builtin(l) {
            Some(Builtin::Is) => {
                if self.respos_of(l).contains(&1) {
                    let rv: BTreeSet<String> = l.args[0].vars().into_iter().collect();
                    (as_var(&l.args[0]).map(|v| vec![v]), rv)
                } else {
                    (None, BTreeSet::new())
                }
            }
            Some(Builtin::Unify) => {
                let pick = [&l.args[0], &l.args[1]]
                    .into_iter()
                    .filter_map(|t| as_var(t))
                    .find(|v| !protected.contains(v));
                match pick {
                    Some(v) => (Some(vec![v.clone()]), BTreeSet::from([v])),
                    None => (None, BTreeSet::new()),
                }
            }
            Some(Builtin::Cmp(_)) => (None, BTreeSet::new()),
            None => {
                let rp = self.respos_of(l);
                if rp.is_empty() {
                    return (None, BTreeSet::new());
                }
                let (results, _) = split_args(l, &rp);
                let rv: BTreeSet<String> = results.iter().flat_map(|t| t.vars()).collect();
                let vars: Option<Vec<String>> = results.iter().map(as_var).collect();
                let vars = vars.filter(|vs| vs.iter().collect::<BTreeSet<_>>().len() == vs.len());
                (vars, rv)
            }
        }
    }

    /// Bindings and conditions for a flat list of literals.
    fn plan(&mut self, lits: &[&Literal], protected: &BTreeSet<String>) -> Result<Plan, TransformError> {
        let info: Vec<_> = lits.iter().map(|l| self.candidates(l, protected)).collect();
        let mut chosen: Vec<Option<Vec<String>>> = vec![None; lits.len()];
        let mut bound: BTreeSet<String> = BTreeSet::new();
        for (i, (cand, _)) in info.iter().enumerate() {
            let Some(vs) = cand else { continue };
            let ok = vs.iter().all(|v| {
                !protected.contains(v)
                    && !bound.contains(v)
                    && info.iter().enumerate().all(|(j, (_, rv))| j == i || !rv.contains(v))
            });
            if ok {
                bound.extend(vs.iter().cloned());
                chosen[i] = Some(vs.clone());
            }
        }

        let mut items = Vec::with_capacity(lits.len());
        for (i, l) in lits.iter().enumerate() {
            match &chosen[i] {
                None => items.push(Item::Cond(self.condition(l)?)),
                Some(vs) => {
                    let pat = self.bound_pattern(vs);
                    let rhs = match builtin(l) {
                        Some(Builtin::Is) => self.arith(&l.args[1])?,
                        Some(Builtin::Unify) => {
                            let other = if l.args[0].as_var() == Some(vs[0].as_str()) { &l.args[1] } else { &l.args[0] };
                            self.term(other)
                        }
                        _ => {
                            let (_, rest) = split_args(l, &self.respos_of(l));
                            let fname = self.function(l);
                            Expr::Apply(fname, rest.iter().map(|a| self.term(a)).collect())
                        }
                    };
                    items.push(Item::Bind(pat, rhs));
                }
            }
        }
        demote_cycles(&mut items);
        let bound = items
            .iter()
            .filter_map(|it| match it {
                Item::Bind(p, _) => Some(p.vars()),
                Item::Cond(_) => None,
            })
            .flatten()
            .collect();
        Ok(Plan { items, bound })
    }

    fn bound_pattern(&mut self, vs: &[String]) -> Pattern {
        let mut ps: Vec<Pattern> = vs.iter().map(|v| Pattern::Var(self.scope.mangle(v))).collect();
        if ps.len() == 1 {
            ps.pop().unwrap()
        } else {
            Pattern::Tuple(ps)
        }
    }

    /// Locals, conditions and result expression of a goal evaluated for
    /// `result`, distributing the rest of the goal into if-then-else
    /// branches.
    fn demand_body(
        &mut self,
        items: &[Subgoal],
        result: &Expr,
        protected: &BTreeSet<String>,
    ) -> Result<(Vec<Binding>, Vec<Expr>, Expr), TransformError> {
        let split = items.iter().position(|sg| matches!(sg, Subgoal::IfThenElse { .. }));
        let (pre, rest) = match split {
            Some(i) => (&items[..i], Some((&items[i], &items[i + 1..]))),
            None => (items, None),
        };
        let lits: Vec<&Literal> = pre
            .iter()
            .map(|sg| match sg {
                Subgoal::Lit(l) => l,
                Subgoal::IfThenElse { .. } => unreachable!("split at first if-then-else"),
            })
            .collect();
        let plan = self.plan(&lits, protected)?;
        let rhs = match rest {
            None => result.clone(),
            Some((Subgoal::IfThenElse { cond, then, els }, post)) => {
                let c = self.simple_condition(cond)?;
                let mut inner = protected.clone();
                inner.extend(plan.bound.iter().cloned());
                let branch = |g: &Goal, ctx: &mut Self| -> Result<Expr, TransformError> {
                    let mut items = g.items.clone();
                    items.extend(post.iter().cloned());
                    let (bs, cs, r) = ctx.demand_body(&items, result, &inner)?;
                    Ok(ctx.wrap_value(bs, cs, r))
                };
                let t = branch(then, self)?;
                let e = branch(els, self)?;
                Expr::ite(c, t, e)
            }
            Some(_) => unreachable!("split at first if-then-else"),
        };
        let (bindings, conds) = settle(plan.items, &rhs);
        Ok((bindings, conds, rhs))
    }

    fn wrap_value(&self, bindings: Vec<Binding>, conds: Vec<Expr>, rhs: Expr) -> Expr {
        let body = if conds.is_empty() { rhs } else { Expr::guard(Expr::conj_all(conds), rhs) };
        let e = if bindings.is_empty() { body } else { Expr::Let(bindings, Box::new(body)) };
        if self.mode.inline {
            inline_expr(&e)
        } else {
            e
        }
    }

    fn clause(&mut self, c: &Clause) -> Result<Rule, TransformError> {
        let rp = self.respos_of(&c.head);
        let fname = self.function(&c.head);
        let (results, rest) = if rp.is_empty() { (Vec::new(), c.head.args.clone()) } else { split_args(&c.head, &rp) };
        // variables are named in order of appearance in the source clause
        for v in c.vars() {
            self.scope.mangle(&v);
        }
        let params: Vec<Pattern> = rest.iter().map(|t| self.pattern(t)).collect();
        let result = if results.is_empty() {
            Expr::True
        } else {
            let rs = results.iter().map(|t| self.term(t)).collect();
            Expr::tuple_or_single(rs)
        };
        if self.mode.lets() && !results.is_empty() {
            let protected: BTreeSet<String> = rest.iter().flat_map(|t| t.vars()).collect();
            let (locals, conds, rhs) = self.demand_body(&c.body.items, &result, &protected)?;
            let guard = if conds.is_empty() { None } else { Some(Expr::conj_all(conds)) };
            let rule = Rule::new(fname, params, rhs).with_guard(guard).with_locals(locals);
            return Ok(if self.mode.inline { inline_single_use(&rule) } else { rule });
        }
        let conds = self.goal_conditions(&c.body)?;
        let guard = if conds.is_empty() { None } else { Some(Expr::conj_all(conds)) };
        Ok(Rule::new(fname, params, result).with_guard(guard))
    }
}

/// Demotes bindings that depend on themselves to `=:=` conditions.
fn demote_cycles(items: &mut [Item]) {
    loop {
        let binds: Vec<usize> = (0..items.len()).filter(|&i| matches!(items[i], Item::Bind(..))).collect();
        let mut g: DiGraph<usize, ()> = DiGraph::new();
        let nodes: Vec<_> = binds.iter().map(|&i| g.add_node(i)).collect();
        let mut self_loop = BTreeSet::new();
        for (a, &i) in binds.iter().enumerate() {
            let Item::Bind(_, rhs) = &items[i] else { continue };
            let fv = free_vars(rhs);
            for (b, &j) in binds.iter().enumerate() {
                let Item::Bind(pj, _) = &items[j] else { continue };
                if pj.vars().iter().any(|v| fv.contains(v)) {
                    if a == b {
                        self_loop.insert(i);
                    } else {
                        g.add_edge(nodes[a], nodes[b], ());
                    }
                }
            }
        }
        let mut cyclic: BTreeSet<usize> = self_loop;
        for scc in tarjan_scc(&g) {
            if scc.len() > 1 {
                cyclic.extend(scc.iter().map(|n| g[*n]));
            }
        }
        if cyclic.is_empty() {
            return;
        }
        for i in cyclic {
            demote(&mut items[i]);
        }
    }
}

fn demote(it: &mut Item) {
    if let Item::Bind(p, rhs) = it {
        *it = Item::Cond(Expr::unify(p.to_expr(), rhs.clone()));
    }
}

/// Bindings whose variables are never used are kept as strict conditions.
fn settle(mut items: Vec<Item>, rhs: &Expr) -> (Vec<Binding>, Vec<Expr>) {
    loop {
        let mut used = free_vars(rhs);
        for it in &items {
            match it {
                Item::Cond(e) | Item::Bind(_, e) => used.extend(free_vars(e)),
            }
        }
        let mut changed = false;
        for it in items.iter_mut() {
            if let Item::Bind(p, _) = it {
                if !p.vars().iter().any(|v| used.contains(v)) {
                    demote(it);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut bindings = Vec::new();
    let mut conds = Vec::new();
    for it in items {
        match it {
            Item::Cond(e) => conds.push(e),
            Item::Bind(p, e) => bindings.push((p, e)),
        }
    }
    (bindings, conds)
}

fn single_var_binding(bs: &[Binding], mut uses: impl FnMut(&str, usize) -> usize) -> Option<usize> {
    bs.iter().enumerate().position(|(i, (p, rhs))| match p {
        Pattern::Var(x) => count_occurrences(x, rhs) == 0 && uses(x, i) == 1,
        _ => false,
    })
}

/// Inlines variable bindings used exactly once, to a fixpoint. Tuple
/// bindings stay.
pub fn inline_single_use(rule: &Rule) -> Rule {
    let mut r = rule.clone();
    r.rhs = inline_expr(&r.rhs);
    r.guard = r.guard.as_ref().map(inline_expr);
    for (_, e) in r.locals.iter_mut() {
        *e = inline_expr(e);
    }
    loop {
        let pick = single_var_binding(&r.locals, |x, i| {
            let mut n = count_occurrences(x, &r.rhs);
            n += r.guard.as_ref().map_or(0, |g| count_occurrences(x, g));
            n + r.locals.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, (_, e))| count_occurrences(x, e)).sum::<usize>()
        });
        let Some(i) = pick else { break };
        let (p, e) = r.locals.remove(i);
        let Pattern::Var(x) = p else { unreachable!("only variable bindings are inlined") };
        r.rhs = r.rhs.substitute(&x, &e);
        r.guard = r.guard.map(|g| g.substitute(&x, &e));
        for (_, rhs) in r.locals.iter_mut() {
            *rhs = rhs.substitute(&x, &e);
        }
    }
    r
}

/// Same inlining for nested `let` expressions.
pub fn inline_expr(e: &Expr) -> Expr {
    match e {
        Expr::Let(bs, body) => {
            let mut bs: Vec<Binding> = bs.iter().map(|(p, x)| (p.clone(), inline_expr(x))).collect();
            let mut body = inline_expr(body);
            loop {
                let pick = single_var_binding(&bs, |x, i| {
                    count_occurrences(x, &body)
                        + bs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, (_, e))| count_occurrences(x, e)).sum::<usize>()
                });
                let Some(i) = pick else { break };
                let (p, v) = bs.remove(i);
                let Pattern::Var(x) = p else { unreachable!("only variable bindings are inlined") };
                body = body.substitute(&x, &v);
                for (_, rhs) in bs.iter_mut() {
                    *rhs = rhs.substitute(&x, &v);
                }
            }
            if bs.is_empty() {
                body
            } else {
                Expr::Let(bs, Box::new(body))
            }
        }
        Expr::Var(_) | Expr::Num(_) | Expr::True | Expr::False => e.clone(),
        Expr::Cons(c, a) => Expr::Cons(c.clone(), a.iter().map(inline_expr).collect()),
        Expr::Apply(f, a) => Expr::Apply(f.clone(), a.iter().map(inline_expr).collect()),
        Expr::Tuple(a) => Expr::Tuple(a.iter().map(inline_expr).collect()),
        Expr::Unify(a, b) => Expr::unify(inline_expr(a), inline_expr(b)),
        Expr::Conj(a, b) => Expr::conj(inline_expr(a), inline_expr(b)),
        Expr::Guard(a, b) => Expr::guard(inline_expr(a), inline_expr(b)),
        Expr::If(c, t, f) => Expr::ite(inline_expr(c), inline_expr(t), inline_expr(f)),
        Expr::Arith(op, a, b) => Expr::arith(*op, inline_expr(a), inline_expr(b)),
        Expr::Cmp(op, a, b) => Expr::cmp(*op, inline_expr(a), inline_expr(b)),
    }
}

/// Replaces repeated left-hand-side variables by fresh ones and adds the
/// corresponding `=:=` constraints in front of the guard.
pub fn desugar_nonlinear(rule: &Rule) -> Rule {
    let occ = rule.lhs_var_occurrences();
    let mut taken: BTreeSet<String> = occ.iter().cloned().collect();
    taken.extend(free_vars(&rule.body_expr()));
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut eqs = Vec::new();
    let params = rule
        .params
        .iter()
        .map(|p| relinearize(p, &mut seen, &mut taken, &mut eqs))
        .collect();
    if eqs.is_empty() {
        return rule.clone();
    }
    let guard = match &rule.guard {
        Some(g) => {
            eqs.push(g.clone());
            Expr::conj_all(eqs)
        }
        None => Expr::conj_all(eqs),
    };
    Rule { params, guard: Some(guard), ..rule.clone() }
}

fn relinearize(p: &Pattern, seen: &mut BTreeSet<String>, taken: &mut BTreeSet<String>, eqs: &mut Vec<Expr>) -> Pattern {
    match p {
        Pattern::Var(x) => {
            if seen.insert(x.clone()) {
                return p.clone();
            }
            let fresh = (1..).map(|k| format!("{x}{k}")).find(|c| !taken.contains(c)).expect("unbounded names");
            taken.insert(fresh.clone());
            eqs.push(Expr::unify(Expr::var(x.clone()), Expr::var(fresh.clone())));
            Pattern::Var(fresh)
        }
        Pattern::Num(_) => p.clone(),
        Pattern::Cons(c, ps) => Pattern::Cons(c.clone(), ps.iter().map(|q| relinearize(q, seen, taken, eqs)).collect()),
        Pattern::Tuple(ps) => Pattern::Tuple(ps.iter().map(|q| relinearize(q, seen, taken, eqs)).collect()),
    }
}

fn owner(c: &Clause) -> String {
    format!("clause for {}", PredKey::new(c.head.pred.clone(), c.head.arity()))
}

pub fn transform_program(p: &LogicProgram, respos: &ResPosMap, mode: TransformMode) -> Result<Translation, TransformError> {
    let mut table = ManglingTable::new();
    let mut constructors = Vec::new();
    register_program(p, &mut table, &mut constructors);
    let mut rules = Vec::with_capacity(p.clauses.len());
    // rules of one function stay contiguous even if the source interleaves
    for key in p.predicates() {
        for c in p.clauses_of(&key) {
            let scope = table.var_scope();
            let mut ctx = Ctx { table: &mut table, scope, respos, mode, owner: owner(c) };
            rules.push(ctx.clause(c)?);
        }
    }
    let program = FlcProgram { datadecl: DataDecl { typename: "Term".into(), constructors }, rules };
    Ok(Translation { program, table, respos: respos.clone(), mode })
}

pub fn transform_conservative(p: &LogicProgram) -> Result<FlcProgram, TransformError> {
    Ok(transform_program(p, &ResPosMap::new(), TransformMode::conservative())?.program)
}

pub fn transform_functional(p: &LogicProgram, r: &ResPosMap) -> Result<FlcProgram, TransformError> {
    Ok(transform_program(p, r, TransformMode::functional())?.program)
}

pub fn transform_demand(p: &LogicProgram, r: &ResPosMap) -> Result<FlcProgram, TransformError> {
    Ok(transform_program(p, r, TransformMode::demand())?.program)
}

impl Translation {
    /// Goal as a Boolean expression in the same transformation mode. Goal
    /// variables stay visible except those listed in `hide`, which may be
    /// turned into local bindings.
    pub fn translate_goal(&self, goal: &Goal, hide: &[String]) -> Result<GoalQuery, TransformError> {
        let mut table = self.table.clone();
        let mut scope = table.var_scope();
        let visible: Vec<String> =
            goal.vars().into_iter().filter(|v| !is_fresh_name(v) && !hide.contains(v)).collect();
        for v in goal.vars() {
            scope.mangle(&v);
        }
        let mut ctx = Ctx { table: &mut table, scope, respos: &self.respos, mode: self.mode, owner: "goal".into() };
        let expr = if ctx.mode.lets() {
            let protected: BTreeSet<String> = visible.iter().cloned().collect();
            let (bs, cs, rhs) = ctx.demand_body(&goal.items, &Expr::True, &protected)?;
            let body = if cs.is_empty() {
                rhs
            } else if rhs == Expr::True {
                Expr::conj_all(cs)
            } else {
                Expr::guard(Expr::conj_all(cs), rhs)
            };
            let e = if bs.is_empty() { body } else { Expr::Let(bs, Box::new(body)) };
            if ctx.mode.inline {
                inline_expr(&e)
            } else {
                e
            }
        } else {
            Expr::conj_all(ctx.goal_conditions(goal)?)
        };
        let rev = ctx.scope.reverse();
        let vars = rev.into_iter().filter(|(_, s)| visible.contains(s)).collect();
        Ok(GoalQuery { expr, vars, table })
    }

    /// Source term of a target value built from constructors, numbers and
    /// variables. Unknown constructors are kept by name.
    pub fn source_term(&self, e: &Expr, var_names: &BTreeMap<String, String>) -> Option<Term> {
        source_term(&self.table, e, var_names)
    }
}

impl GoalQuery {
    /// Like [`Translation::source_term`], but also knows the goal's own
    /// constructors and variable names.
    pub fn source_term(&self, e: &Expr) -> Option<Term> {
        source_term(&self.table, e, &self.vars)
    }
}

fn source_term(table: &ManglingTable, e: &Expr, var_names: &BTreeMap<String, String>) -> Option<Term> {
    Some(match e {
        Expr::Var(v) => Term::Var(var_names.get(v).cloned().unwrap_or_else(|| v.clone())),
        Expr::Num(n) => Term::Num(n.clone()),
        Expr::Cons(c, args) => {
            let args: Option<Vec<Term>> = args.iter().map(|a| source_term(table, a, var_names)).collect();
            let args = args?;
            if c == LIST_CONS && args.len() == 2 {
                Term::Comp(CONS.into(), args)
            } else if c == LIST_NIL && args.is_empty() {
                Term::nil()
            } else {
                let name = table.source_of(c, Kind::Constructor).map(|(n, _)| n.to_string()).unwrap_or_else(|| c.clone());
                Term::Comp(name, args)
            }
        }
        _ => return None,
    })
}
