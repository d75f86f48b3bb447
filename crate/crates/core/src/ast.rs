//! First-order terms, clauses and logic programs, together with
//! substitutions, most general unifiers and clause renaming.
//!
//! Everything here is immutable once built. The only mutable state is the
//! [`FreshNames`] counter, which belongs to a single transformation or
//! derivation context.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;

/// Prefix reserved for generated variable names. The frontend rejects user
/// variables that start with it.
pub const FRESH_PREFIX: &str = "__";

/// Name of the list constructor.
pub const CONS: &str = ".";
/// Name of the empty list.
pub const NIL: &str = "[]";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Num(BigInt),
    /// Functor application; an atom is a `Comp` without arguments.
    Comp(String, Vec<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn atom(name: impl Into<String>) -> Term {
        Term::Comp(name.into(), Vec::new())
    }

    pub fn num(n: impl Into<BigInt>) -> Term {
        Term::Num(n.into())
    }

    pub fn comp(name: impl Into<String>, args: Vec<Term>) -> Term {
        Term::Comp(name.into(), args)
    }

    pub fn nil() -> Term {
        Term::atom(NIL)
    }

    pub fn cons(head: Term, tail: Term) -> Term {
        Term::Comp(CONS.to_string(), vec![head, tail])
    }

    /// Builds a proper list from its elements.
    pub fn list(items: impl IntoIterator<Item = Term, IntoIter: DoubleEndedIterator>) -> Term {
        items
            .into_iter()
            .rev()
            .fold(Term::nil(), |tail, head| Term::cons(head, tail))
    }

    /// Peano numeral `s(...s(o)...)` with `n` successors.
    pub fn peano(n: usize) -> Term {
        (0..n).fold(Term::atom("o"), |t, _| Term::comp("s", vec![t]))
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }

    /// Functor name and arity for compound terms and atoms.
    pub fn functor(&self) -> Option<(&str, usize)> {
        match self {
            Term::Comp(f, args) => Some((f, args.len())),
            _ => None,
        }
    }

    /// Variables in order of first occurrence (left to right, depth first).
    pub fn vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    pub(crate) fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Term::Num(_) => {}
            Term::Comp(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    pub fn occurs(&self, var: &str) -> bool {
        match self {
            Term::Var(v) => v == var,
            Term::Num(_) => false,
            Term::Comp(_, args) => args.iter().any(|a| a.occurs(var)),
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Num(_) => true,
            Term::Comp(_, args) => args.iter().all(Term::is_ground),
        }
    }

    /// Subterm at a 1-based position path.
    pub fn at(&self, path: &[usize]) -> Option<&Term> {
        match path.split_first() {
            None => Some(self),
            Some((&i, rest)) => match self {
                Term::Comp(_, args) if i >= 1 && i <= args.len() => args[i - 1].at(rest),
                _ => None,
            },
        }
    }

    /// Replaces the subterm at `path` (which must exist).
    pub fn replace_at(&self, path: &[usize], with: Term) -> Term {
        match path.split_first() {
            None => with,
            Some((&i, rest)) => match self {
                Term::Comp(f, args) => {
                    let mut args = args.clone();
                    args[i - 1] = args[i - 1].replace_at(rest, with);
                    Term::Comp(f.clone(), args)
                }
                other => other.clone(),
            },
        }
    }

    pub fn rename(&self, map: &BTreeMap<String, String>) -> Term {
        match self {
            Term::Var(v) => Term::Var(map.get(v).cloned().unwrap_or_else(|| v.clone())),
            Term::Num(_) => self.clone(),
            Term::Comp(f, args) => Term::Comp(f.clone(), args.iter().map(|a| a.rename(map)).collect()),
        }
    }

    /// Elements of a proper or partial list, plus its tail.
    pub fn list_parts(&self) -> Option<(Vec<&Term>, &Term)> {
        let mut items = Vec::new();
        let mut cur = self;
        while let Term::Comp(f, args) = cur {
            if f == CONS && args.len() == 2 {
                items.push(&args[0]);
                cur = &args[1];
            } else {
                break;
            }
        }
        if items.is_empty() {
            None
        } else {
            Some((items, cur))
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Term::Comp(_, args) if !args.is_empty() => 1 + args.iter().map(Term::depth).max().unwrap_or(0),
            _ => 0,
        }
    }
}

fn atom_needs_quotes(name: &str) -> bool {
    if name.is_empty() {
        return true;
    }
    if name == NIL || name == "!" || name == ";" {
        return false;
    }
    let mut chars = name.chars();
    let first = chars.next().unwrap();
    if first.is_ascii_lowercase() {
        return !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    }
    !name.chars().all(|c| crate::frontend::is_symbol_char(c))
}

pub(crate) fn fmt_atom(name: &str, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if atom_needs_quotes(name) {
        write!(f, "'")?;
        for c in name.chars() {
            match c {
                '\'' => write!(f, "\\'")?,
                '\\' => write!(f, "\\\\")?,
                '\n' => write!(f, "\\n")?,
                c => write!(f, "{c}")?,
            }
        }
        write!(f, "'")
    } else {
        write!(f, "{name}")
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Num(n) => write!(f, "{n}"),
            Term::Comp(name, args) => {
                if let Some((items, tail)) = self.list_parts() {
                    write!(f, "[")?;
                    for (i, item) in items.iter().enumerate() {
                        if i > 0 {
                            write!(f, ",")?;
                        }
                        write!(f, "{item}")?;
                    }
                    if !matches!(tail, Term::Comp(n, a) if n == NIL && a.is_empty()) {
                        write!(f, "|{tail}")?;
                    }
                    return write!(f, "]");
                }
                fmt_atom(name, f)?;
                if !args.is_empty() {
                    write!(f, "(")?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            write!(f, ",")?;
                        }
                        write!(f, "{a}")?;
                    }
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

/// A predicate call `p(t1,...,tn)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Literal {
    pub pred: String,
    pub args: Vec<Term>,
}

impl Literal {
    pub fn new(pred: impl Into<String>, args: Vec<Term>) -> Literal {
        Literal { pred: pred.into(), args }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn key(&self) -> PredKey {
        PredKey::new(self.pred.clone(), self.args.len())
    }

    pub fn as_term(&self) -> Term {
        Term::Comp(self.pred.clone(), self.args.clone())
    }

    pub fn vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.args.iter().for_each(|a| a.collect_vars(&mut out));
        out
    }

    pub fn map_terms(&self, f: &mut impl FnMut(&Term) -> Term) -> Literal {
        Literal { pred: self.pred.clone(), args: self.args.iter().map(|a| f(a)).collect() }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Term::Comp(self.pred.clone(), self.args.clone()).fmt(f)
    }
}

/// Predicate identity: name and arity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredKey {
    pub name: String,
    pub arity: usize,
}

impl PredKey {
    pub fn new(name: impl Into<String>, arity: usize) -> PredKey {
        PredKey { name: name.into(), arity }
    }
}

impl fmt::Display for PredKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

/// One element of a goal: a predicate call or an if-then-else construct.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Subgoal {
    Lit(Literal),
    IfThenElse { cond: Goal, then: Goal, els: Goal },
}

impl Subgoal {
    pub fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Subgoal::Lit(l) => l.args.iter().for_each(|a| a.collect_vars(out)),
            Subgoal::IfThenElse { cond, then, els } => {
                for g in [cond, then, els] {
                    g.items.iter().for_each(|s| s.collect_vars(out));
                }
            }
        }
    }

    pub fn map_terms(&self, f: &mut impl FnMut(&Term) -> Term) -> Subgoal {
        match self {
            Subgoal::Lit(l) => Subgoal::Lit(l.map_terms(f)),
            Subgoal::IfThenElse { cond, then, els } => Subgoal::IfThenElse {
                cond: cond.map_terms(f),
                then: then.map_terms(f),
                els: els.map_terms(f),
            },
        }
    }
}

impl fmt::Display for Subgoal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subgoal::Lit(l) => l.fmt(f),
            Subgoal::IfThenElse { cond, then, els } => write!(f, "({cond} -> {then} ; {els})"),
        }
    }
}

/// Conjunction of subgoals; empty means the empty goal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Goal {
    pub items: Vec<Subgoal>,
}

impl Goal {
    pub fn new(items: Vec<Subgoal>) -> Goal {
        Goal { items }
    }

    pub fn empty() -> Goal {
        Goal::default()
    }

    pub fn from_literals(lits: impl IntoIterator<Item = Literal>) -> Goal {
        Goal { items: lits.into_iter().map(Subgoal::Lit).collect() }
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.items.iter().for_each(|s| s.collect_vars(&mut out));
        out
    }

    pub fn map_terms(&self, f: &mut impl FnMut(&Term) -> Term) -> Goal {
        Goal { items: self.items.iter().map(|s| s.map_terms(f)).collect() }
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.items.is_empty() {
            return write!(f, "true");
        }
        for (i, s) in self.items.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            s.fmt(f)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Clause {
    pub head: Literal,
    pub body: Goal,
}

impl Clause {
    pub fn fact(head: Literal) -> Clause {
        Clause { head, body: Goal::empty() }
    }

    pub fn rule(head: Literal, body: Goal) -> Clause {
        Clause { head, body }
    }

    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }

    pub fn vars(&self) -> Vec<String> {
        let mut out = self.head.vars();
        self.body.items.iter().for_each(|s| s.collect_vars(&mut out));
        out
    }

    pub fn map_terms(&self, f: &mut impl FnMut(&Term) -> Term) -> Clause {
        Clause { head: self.head.map_terms(f), body: self.body.map_terms(f) }
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.body.is_empty() {
            write!(f, "{}.", self.head)
        } else {
            write!(f, "{} :- {}.", self.head, self.body)
        }
    }
}

/// `:- function p/n: positions.`
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Directive {
    pub pred: String,
    pub arity: usize,
    pub respos: BTreeSet<usize>,
}

impl Directive {
    pub fn key(&self) -> PredKey {
        PredKey::new(self.pred.clone(), self.arity)
    }
}

impl fmt::Display for Directive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, ":- function ")?;
        fmt_atom(&self.pred, f)?;
        write!(f, "/{}: [", self.arity)?;
        for (i, p) in self.respos.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "].")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LogicProgram {
    pub clauses: Vec<Clause>,
    pub directives: Vec<Directive>,
}

impl LogicProgram {
    pub fn new(clauses: Vec<Clause>) -> LogicProgram {
        LogicProgram { clauses, directives: Vec::new() }
    }

    /// Defined predicates in order of first definition.
    pub fn predicates(&self) -> Vec<PredKey> {
        let mut out: Vec<PredKey> = Vec::new();
        for c in &self.clauses {
            let k = c.head.key();
            if !out.contains(&k) {
                out.push(k);
            }
        }
        out
    }

    pub fn clauses_of<'a>(&'a self, key: &'a PredKey) -> impl Iterator<Item = &'a Clause> + 'a {
        self.clauses
            .iter()
            .filter(move |c| c.head.pred == key.name && c.head.args.len() == key.arity)
    }

    pub fn directive_for(&self, key: &PredKey) -> Option<&Directive> {
        self.directives.iter().rev().find(|d| d.pred == key.name && d.arity == key.arity)
    }
}

impl fmt::Display for LogicProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.directives {
            writeln!(f, "{d}")?;
        }
        for c in &self.clauses {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Finite map from variables to terms, kept idempotent.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Substitution {
    bindings: BTreeMap<String, Term>,
}

impl Substitution {
    pub fn new() -> Substitution {
        Substitution::default()
    }

    /// Builds a substitution from arbitrary bindings and normalises it to
    /// idempotent form. Returns `None` if the bindings are cyclic.
    pub fn from_bindings(pairs: impl IntoIterator<Item = (String, Term)>) -> Option<Substitution> {
        let mut s = Substitution::new();
        for (v, t) in pairs {
            let t = s.apply(&t);
            let current = s.apply(&Term::Var(v.clone()));
            let mgu = mgu(&current, &t)?;
            s = s.compose(&mgu);
        }
        Some(s)
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.bindings.get(var)
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Term)> {
        self.bindings.iter()
    }

    pub fn apply(&self, t: &Term) -> Term {
        apply_subst(self, t)
    }

    /// `other ∘ self`: apply `self` first, then `other`.
    pub fn compose(&self, other: &Substitution) -> Substitution {
        let mut bindings: BTreeMap<String, Term> = self
            .bindings
            .iter()
            .map(|(v, t)| (v.clone(), other.apply(t)))
            .filter(|(v, t)| t.as_var() != Some(v.as_str()))
            .collect();
        for (v, t) in &other.bindings {
            bindings.entry(v.clone()).or_insert_with(|| t.clone());
        }
        Substitution { bindings }
    }

    /// Restriction to the given variables.
    pub fn restrict(&self, vars: &[String]) -> Substitution {
        Substitution {
            bindings: self
                .bindings
                .iter()
                .filter(|(v, _)| vars.contains(v))
                .map(|(v, t)| (v.clone(), t.clone()))
                .collect(),
        }
    }

    pub(crate) fn insert_raw(&mut self, var: String, t: Term) {
        self.bindings.insert(var, t);
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (v, t)) in self.bindings.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v} -> {t}")?;
        }
        write!(f, "}}")
    }
}

pub fn apply_subst(s: &Substitution, t: &Term) -> Term {
    match t {
        Term::Var(v) => match s.bindings.get(v) {
            Some(b) => b.clone(),
            None => t.clone(),
        },
        Term::Num(_) => t.clone(),
        Term::Comp(f, args) => Term::Comp(f.clone(), args.iter().map(|a| apply_subst(s, a)).collect()),
    }
}

/// Most general unifier with occurs check. The result is idempotent.
pub fn mgu(t1: &Term, t2: &Term) -> Option<Substitution> {
    let mut subst = Substitution::new();
    let mut work: Vec<(Term, Term)> = vec![(t1.clone(), t2.clone())];
    while let Some((a, b)) = work.pop() {
        let a = subst.apply(&a);
        let b = subst.apply(&b);
        match (a, b) {
            (Term::Var(x), Term::Var(y)) if x == y => {}
            (Term::Var(x), t) | (t, Term::Var(x)) => {
                if t.occurs(&x) {
                    return None;
                }
                let single = Substitution { bindings: BTreeMap::from([(x, t)]) };
                subst = subst.compose(&single);
            }
            (Term::Num(m), Term::Num(n)) => {
                if m != n {
                    return None;
                }
            }
            (Term::Comp(f, fa), Term::Comp(g, ga)) => {
                if f != g || fa.len() != ga.len() {
                    return None;
                }
                work.extend(fa.into_iter().zip(ga).rev());
            }
            _ => return None,
        }
    }
    Some(subst)
}

/// Variant of `c` whose variables avoid every name in `avoid`.
pub fn rename_apart(c: &Clause, avoid: &BTreeSet<String>) -> Clause {
    let vars = c.vars();
    let mut taken: BTreeSet<String> = avoid.iter().cloned().collect();
    taken.extend(vars.iter().cloned());
    let mut map = BTreeMap::new();
    for v in &vars {
        if avoid.contains(v) {
            let mut k = 1usize;
            let fresh = loop {
                let cand = format!("{v}{k}");
                if !taken.contains(&cand) {
                    break cand;
                }
                k += 1;
            };
            taken.insert(fresh.clone());
            map.insert(v.clone(), fresh);
        }
    }
    c.map_terms(&mut |t| t.rename(&map))
}

/// True when `a` and `b` are equal up to a bijective renaming of variables.
pub fn is_variant(a: &Term, b: &Term) -> bool {
    fn go(a: &Term, b: &Term, fwd: &mut BTreeMap<String, String>, bwd: &mut BTreeMap<String, String>) -> bool {
        match (a, b) {
            (Term::Var(x), Term::Var(y)) => {
                let f_ok = fwd.entry(x.clone()).or_insert_with(|| y.clone()) == y;
                let b_ok = bwd.entry(y.clone()).or_insert_with(|| x.clone()) == x;
                f_ok && b_ok
            }
            (Term::Num(m), Term::Num(n)) => m == n,
            (Term::Comp(f, fa), Term::Comp(g, ga)) => {
                f == g && fa.len() == ga.len() && fa.iter().zip(ga).all(|(x, y)| go(x, y, fwd, bwd))
            }
            _ => false,
        }
    }
    go(a, b, &mut BTreeMap::new(), &mut BTreeMap::new())
}

/// Generator of variable names under [`FRESH_PREFIX`].
#[derive(Debug, Clone, Default)]
pub struct FreshNames {
    next: usize,
}

impl FreshNames {
    pub fn new() -> FreshNames {
        FreshNames::default()
    }

    pub fn starting_at(next: usize) -> FreshNames {
        FreshNames { next }
    }

    pub fn fresh(&mut self) -> String {
        self.next += 1;
        format!("{FRESH_PREFIX}{}", self.next)
    }
}

pub fn is_fresh_name(name: &str) -> bool {
    name.starts_with(FRESH_PREFIX)
}
