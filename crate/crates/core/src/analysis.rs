//! Partial definitional trees, inductively sequential argument sets and
//! inference of result argument positions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::ast::{Clause, Literal, LogicProgram, PredKey, Subgoal, Term};

/// Case label of a branch node child.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Key {
    Fun(String, usize),
    Int(BigInt),
}

impl Key {
    fn of(t: &Term) -> Option<Key> {
        match t {
            Term::Var(_) => None,
            Term::Num(n) => Some(Key::Int(n.clone())),
            Term::Comp(f, args) => Some(Key::Fun(f.clone(), args.len())),
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            Key::Fun(_, n) => *n,
            Key::Int(_) => 0,
        }
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Key::Fun(name, n) => write!(f, "{name}/{n}"),
            Key::Int(i) => write!(f, "{i}"),
        }
    }
}

/// Leaves refer to clauses by their index in the input slice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DefTree {
    Clause { pattern: Literal, clause: usize },
    Branch { pattern: Literal, pos: Vec<usize>, children: Vec<(Key, DefTree)> },
    /// Overlapping alternatives; only produced when explicitly allowed.
    Or(Vec<DefTree>),
}

impl DefTree {
    pub fn pattern(&self) -> Option<&Literal> {
        match self {
            DefTree::Clause { pattern, .. } | DefTree::Branch { pattern, .. } => Some(pattern),
            DefTree::Or(_) => None,
        }
    }

    /// Clause indices at the leaves, left to right.
    pub fn clauses(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_clauses(&mut out);
        out
    }

    fn collect_clauses(&self, out: &mut Vec<usize>) {
        match self {
            DefTree::Clause { clause, .. } => out.push(*clause),
            DefTree::Branch { children, .. } => children.iter().for_each(|(_, t)| t.collect_clauses(out)),
            DefTree::Or(ts) => ts.iter().for_each(|t| t.collect_clauses(out)),
        }
    }

    /// Positions of branch nodes with more than one child.
    pub fn multi_branch_positions(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        fn go(t: &DefTree, out: &mut Vec<Vec<usize>>) {
            match t {
                DefTree::Clause { .. } => {}
                DefTree::Branch { pos, children, .. } => {
                    if children.len() > 1 {
                        out.push(pos.clone());
                    }
                    children.iter().for_each(|(_, c)| go(c, out));
                }
                DefTree::Or(ts) => ts.iter().for_each(|c| go(c, out)),
            }
        }
        go(self, &mut out);
        out
    }
}

#[derive(Debug, Clone, Default)]
pub struct TreeOptions {
    /// Top-level argument positions under which multi-child branches may
    /// occur; `None` allows every position.
    pub allowed: Option<BTreeSet<usize>>,
    pub allow_or: bool,
    /// Drop branch nodes with a single child.
    pub collapse: bool,
}

struct Builder<'a> {
    heads: &'a [Literal],
    opts: &'a TreeOptions,
    next_var: usize,
}

impl Builder<'_> {
    fn fresh(&mut self) -> Term {
        self.next_var += 1;
        Term::Var(format!("#{}", self.next_var))
    }

    fn branch_allowed(&self, pos: &[usize]) -> bool {
        match &self.opts.allowed {
            None => true,
            Some(d) => d.contains(&pos[0]),
        }
    }

    fn build(&mut self, pattern: &Literal, rules: &[usize]) -> Option<DefTree> {
        if rules.is_empty() {
            return None;
        }
        let pat = pattern.as_term();
        if rules.len() == 1 && renames_into(&pat, &self.heads[rules[0]].as_term()) {
            return Some(DefTree::Clause { pattern: pattern.clone(), clause: rules[0] });
        }
        let mut single = None;
        let mut multi = Vec::new();
        for path in var_positions(&pat) {
            let mut keys: Vec<Key> = Vec::new();
            let mut all = true;
            for &r in rules {
                match self.heads[r].as_term().at(&path).and_then(Key::of) {
                    Some(k) => {
                        if !keys.contains(&k) {
                            keys.push(k);
                        }
                    }
                    None => {
                        all = false;
                        break;
                    }
                }
            }
            if !all {
                continue;
            }
            if keys.len() == 1 {
                single = Some((path, keys));
                break;
            }
            if self.branch_allowed(&path) {
                multi.push((path, keys));
            }
        }
        let candidates: Vec<(Vec<usize>, Vec<Key>)> = match single {
            Some(s) => vec![s],
            None => multi,
        };
        for (path, keys) in candidates {
            if let Some(t) = self.branch_on(pattern, &pat, rules, path, keys) {
                return Some(t);
            }
        }
        if self.opts.allow_or && rules.len() > 1 {
            let mut alts = Vec::new();
            for &r in rules {
                alts.push(self.build(pattern, &[r])?);
            }
            return Some(DefTree::Or(alts));
        }
        None
    }

    fn branch_on(
        &mut self,
        pattern: &Literal,
        pat: &Term,
        rules: &[usize],
        path: Vec<usize>,
        keys: Vec<Key>,
    ) -> Option<DefTree> {
        let mut children = Vec::with_capacity(keys.len());
        for key in keys {
            let sub = match &key {
                Key::Int(i) => Term::Num(i.clone()),
                Key::Fun(f, n) => {
                    let args = (0..*n).map(|_| self.fresh()).collect();
                    Term::Comp(f.clone(), args)
                }
            };
            let refined = pat.replace_at(&path, sub);
            let group: Vec<usize> = rules
                .iter()
                .copied()
                .filter(|&r| self.heads[r].as_term().at(&path).and_then(Key::of).as_ref() == Some(&key))
                .collect();
            let lit = match refined {
                Term::Comp(p, args) => Literal::new(p, args),
                _ => unreachable!("literal pattern is compound"),
            };
            children.push((key, self.build(&lit, &group)?));
        }
        if self.opts.collapse && children.len() == 1 {
            return children.pop().map(|(_, t)| t);
        }
        Some(DefTree::Branch { pattern: pattern.clone(), pos: path, children })
    }
}

/// `head` is `pat` with variables mapped to (possibly shared) variables.
fn renames_into(pat: &Term, head: &Term) -> bool {
    match (pat, head) {
        (Term::Var(_), Term::Var(_)) => true,
        (Term::Num(a), Term::Num(b)) => a == b,
        (Term::Comp(f, fa), Term::Comp(g, ga)) => {
            f == g && fa.len() == ga.len() && fa.iter().zip(ga).all(|(a, b)| renames_into(a, b))
        }
        _ => false,
    }
}

fn var_positions(t: &Term) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    fn go(t: &Term, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        match t {
            Term::Var(_) => out.push(path.clone()),
            Term::Num(_) => {}
            Term::Comp(_, args) => {
                for (i, a) in args.iter().enumerate() {
                    path.push(i + 1);
                    go(a, path, out);
                    path.pop();
                }
            }
        }
    }
    go(t, &mut Vec::new(), &mut out);
    out
}

/// Definitional tree over clause heads that must share one predicate symbol.
pub fn build_tree(heads: &[Literal], opts: &TreeOptions) -> Option<DefTree> {
    let first = heads.first()?;
    let mut b = Builder { heads, opts, next_var: 0 };
    let root = Literal::new(first.pred.clone(), (0..first.arity()).map(|_| b.fresh()).collect());
    let all: Vec<usize> = (0..heads.len()).collect();
    b.build(&root, &all)
}

/// Tree whose multi-child branches all lie at or below a position in `allowed`.
pub fn build_def_tree(clauses: &[Clause], allowed: &BTreeSet<usize>) -> Option<DefTree> {
    let heads: Vec<Literal> = clauses.iter().map(|c| c.head.clone()).collect();
    build_tree(&heads, &TreeOptions { allowed: Some(allowed.clone()), allow_or: false, collapse: true })
}

/// All inclusion-minimal inductively sequential position sets, sorted
/// lexicographically.
pub fn minimal_indseq_sets(clauses: &[Clause]) -> Vec<BTreeSet<usize>> {
    let Some(first) = clauses.first() else {
        return Vec::new();
    };
    let n = first.head.arity();
    if n > 20 {
        let all: BTreeSet<usize> = (1..=n).collect();
        return if build_def_tree(clauses, &all).is_some() { vec![all] } else { Vec::new() };
    }
    let mut subsets: Vec<BTreeSet<usize>> = (0u32..(1u32 << n))
        .map(|mask| (1..=n).filter(|i| mask & (1 << (i - 1)) != 0).collect())
        .collect();
    subsets.sort_by_key(|s: &BTreeSet<usize>| s.len());
    let mut found: Vec<BTreeSet<usize>> = Vec::new();
    for s in subsets {
        if found.iter().any(|f| f.is_subset(&s)) {
            continue;
        }
        if build_def_tree(clauses, &s).is_some() {
            found.push(s);
        }
    }
    found.sort_by(|a, b| a.iter().cmp(b.iter()));
    found
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RespSource {
    Directive,
    SingleRule,
    Heuristic,
    None,
}

impl fmt::Display for RespSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RespSource::Directive => "directive",
            RespSource::SingleRule => "single-rule",
            RespSource::Heuristic => "heuristic",
            RespSource::None => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RespEntry {
    pub respos: BTreeSet<usize>,
    pub indseq: Option<BTreeSet<usize>>,
    pub source: RespSource,
}

/// Result argument positions per predicate. Predicates without an entry
/// (including undefined ones) have no result positions, except the
/// arithmetic builtin `is/2`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ResPosMap {
    entries: BTreeMap<PredKey, RespEntry>,
    order: Vec<PredKey>,
}

impl ResPosMap {
    pub fn new() -> ResPosMap {
        ResPosMap::default()
    }

    pub fn get(&self, key: &PredKey) -> BTreeSet<usize> {
        if let Some(e) = self.entries.get(key) {
            return e.respos.clone();
        }
        if key.name == "is" && key.arity == 2 {
            return BTreeSet::from([1]);
        }
        BTreeSet::new()
    }

    pub fn entry(&self, key: &PredKey) -> Option<&RespEntry> {
        self.entries.get(key)
    }

    pub fn set(&mut self, key: PredKey, respos: BTreeSet<usize>) {
        self.insert(key, RespEntry { respos, indseq: None, source: RespSource::Directive });
    }

    pub fn insert(&mut self, key: PredKey, entry: RespEntry) {
        if !self.entries.contains_key(&key) {
            self.order.push(key.clone());
        }
        self.entries.insert(key, entry);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PredKey, &RespEntry)> {
        self.order.iter().map(|k| (k, &self.entries[k]))
    }

    /// Same map with every result set emptied, `is/2` included.
    pub fn cleared(&self) -> ResPosMap {
        let mut out = ResPosMap::new();
        let none = || RespEntry { respos: BTreeSet::new(), indseq: None, source: RespSource::None };
        for (k, _) in self.iter() {
            out.insert(k.clone(), none());
        }
        out.insert(PredKey::new("is", 2), none());
        out
    }

    /// One line per predicate, in program order.
    pub fn report(&self) -> String {
        let mut out = String::new();
        for (k, e) in self.iter() {
            let indseq = match &e.indseq {
                Some(d) => fmt_set(d),
                None => "none".to_string(),
            };
            out.push_str(&format!("{k}: indseq={indseq} respos={} source={}\n", fmt_set(&e.respos), e.source));
        }
        out
    }
}

pub fn fmt_set(s: &BTreeSet<usize>) -> String {
    let items: Vec<String> = s.iter().map(|i| i.to_string()).collect();
    format!("{{{}}}", items.join(","))
}

fn body_literals(items: &[Subgoal], out: &mut Vec<Literal>) {
    for sg in items {
        match sg {
            Subgoal::Lit(l) => out.push(l.clone()),
            Subgoal::IfThenElse { cond, then, els } => {
                body_literals(&cond.items, out);
                body_literals(&then.items, out);
                body_literals(&els.items, out);
            }
        }
    }
}

fn single_clause_respos(c: &Clause, known: &ResPosMap) -> bool {
    let n = c.head.arity();
    if n == 0 {
        return false;
    }
    let last = &c.head.args[n - 1];
    let Some(v) = last.as_var() else {
        return true;
    };
    let mut lits = Vec::new();
    body_literals(&c.body.items, &mut lits);
    let in_result = lits.iter().any(|l| {
        let rp = known.get(&l.key());
        rp.iter().any(|&i| l.args[i - 1].occurs(v))
    });
    if in_result {
        return true;
    }
    // A call that computes only head variables acts as a constraint; a fresh
    // last argument fed into it is then what the predicate yields.
    if c.head.args[..n - 1].iter().any(|a| a.occurs(v)) {
        return false;
    }
    let head_vars: BTreeSet<String> = c.head.args[..n - 1].iter().flat_map(|a| a.vars()).collect();
    lits.iter().any(|l| {
        let rp = known.get(&l.key());
        !rp.is_empty()
            && rp.iter().all(|&i| l.args[i - 1].as_var().is_some_and(|x| head_vars.contains(x)))
            && l.args
                .iter()
                .enumerate()
                .any(|(i, a)| !rp.contains(&(i + 1)) && a.occurs(v))
    })
}

fn heuristic(clauses: &[Clause]) -> (Option<BTreeSet<usize>>, BTreeSet<usize>) {
    let n = clauses[0].head.arity();
    match minimal_indseq_sets(clauses).into_iter().next() {
        Some(d) => {
            let m = (1..=n).rev().find(|i| !d.contains(i));
            (Some(d), m.into_iter().collect())
        }
        None => (None, BTreeSet::new()),
    }
}

/// Result positions for every predicate defined in `p`, honouring
/// directives first and processing callees before callers.
pub fn infer_respos(p: &LogicProgram) -> ResPosMap {
    let preds = p.predicates();
    let mut graph: DiGraph<usize, ()> = DiGraph::new();
    let nodes: Vec<_> = (0..preds.len()).map(|i| graph.add_node(i)).collect();
    let index: BTreeMap<&PredKey, usize> = preds.iter().enumerate().map(|(i, k)| (k, i)).collect();
    for (i, k) in preds.iter().enumerate() {
        for c in p.clauses_of(k) {
            let mut lits = Vec::new();
            body_literals(&c.body.items, &mut lits);
            for l in lits {
                if let Some(&j) = index.get(&l.key()) {
                    graph.update_edge(nodes[i], nodes[j], ());
                }
            }
        }
    }
    let mut known = ResPosMap::new();
    let mut entries: BTreeMap<usize, RespEntry> = BTreeMap::new();
    for scc in tarjan_scc(&graph) {
        let mut members: Vec<usize> = scc.iter().map(|n| graph[*n]).collect();
        members.sort_unstable();
        let mut singles = Vec::new();
        for &i in &members {
            let key = &preds[i];
            let clauses: Vec<Clause> = p.clauses_of(key).cloned().collect();
            let entry = if let Some(d) = p.directive_for(key) {
                RespEntry { respos: d.respos.clone(), indseq: None, source: RespSource::Directive }
            } else if clauses.len() == 1 {
                singles.push(i);
                continue;
            } else {
                let (indseq, respos) = heuristic(&clauses);
                let source = if respos.is_empty() { RespSource::None } else { RespSource::Heuristic };
                RespEntry { respos, indseq, source }
            };
            known.insert(key.clone(), entry.clone());
            entries.insert(i, entry);
        }
        for i in singles {
            let key = &preds[i];
            let c = p.clauses_of(key).next().expect("single clause").clone();
            let indseq = minimal_indseq_sets(std::slice::from_ref(&c)).into_iter().next();
            let entry = if single_clause_respos(&c, &known) {
                RespEntry { respos: BTreeSet::from([c.head.arity()]), indseq, source: RespSource::SingleRule }
            } else {
                RespEntry { respos: BTreeSet::new(), indseq, source: RespSource::None }
            };
            known.insert(key.clone(), entry.clone());
            entries.insert(i, entry);
        }
    }
    let mut out = ResPosMap::new();
    for (i, e) in entries {
        out.insert(preds[i].clone(), e);
    }
    out
}

/// Directives only; every other defined predicate stays a predicate.
pub fn directive_respos(p: &LogicProgram) -> ResPosMap {
    let mut out = ResPosMap::new();
    for k in p.predicates() {
        let entry = match p.directive_for(&k) {
            Some(d) => RespEntry { respos: d.respos.clone(), indseq: None, source: RespSource::Directive },
            None => RespEntry { respos: BTreeSet::new(), indseq: None, source: RespSource::None },
        };
        out.insert(k, entry);
    }
    out
}
