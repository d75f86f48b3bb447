use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use pl2flc_core::analysis::{build_def_tree, build_tree, infer_respos, minimal_indseq_sets, DefTree, Key, TreeOptions};
use pl2flc_core::ast::{is_variant, mgu, Clause, Goal, Literal, LogicProgram, Subgoal, Substitution, Term};
use pl2flc_core::frontend::parse_goal;
use pl2flc_core::harness::{compare, goal_vars, render_answer, sld_answers, Verdict};
use pl2flc_core::sld::{solve, Limits, Status};
use pl2flc_core::transform::TransformMode;

type Check = Result<(), TestCaseError>;

pub const VARS: &[&str] = &["X", "Y", "Z"];

pub fn term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        prop::sample::select(VARS).prop_map(Term::var),
        prop::sample::select(&["a", "b"][..]).prop_map(Term::atom),
        (0i64..3).prop_map(Term::num),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|t| Term::comp("f", vec![t])),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::comp("g", vec![a, b])),
            (inner.clone(), inner).prop_map(|(a, b)| Term::cons(a, b)),
        ]
    })
}

fn universe() -> Vec<Term> {
    let base = vec![Term::atom("a"), Term::atom("b"), Term::num(0), Term::nil()];
    let mut out = base.clone();
    for t in &base {
        out.push(Term::comp("f", vec![t.clone()]));
    }
    out.push(Term::comp("g", vec![Term::atom("a"), Term::atom("b")]));
    out.push(Term::cons(Term::atom("a"), Term::nil()));
    out
}

fn all_vars(ts: &[&Term]) -> Vec<String> {
    let mut vs: BTreeSet<String> = BTreeSet::new();
    for t in ts {
        vs.extend(t.vars());
    }
    vs.into_iter().collect()
}

/// Every assignment of the variables to terms of `universe()`.
fn ground_substitutions(vars: &[String]) -> Vec<Substitution> {
    let u = universe();
    let mut out = vec![Vec::new()];
    for v in vars {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<(String, Term)>| {
                u.iter().map(move |t| {
                    let mut p = prefix.clone();
                    p.push((v.clone(), t.clone()));
                    p
                })
            })
            .collect();
    }
    out.into_iter().map(|b| Substitution::from_bindings(b).unwrap()).collect()
}

pub fn check_mgu(t1: &Term, t2: &Term) -> Check {
    let vars = all_vars(&[t1, t2]);
    let ground: Vec<Substitution> =
        ground_substitutions(&vars).into_iter().filter(|th| th.apply(t1) == th.apply(t2)).collect();
    match mgu(t1, t2) {
        None => prop_assert!(ground.is_empty(), "no mgu, but {} ground unifiers", ground.len()),
        Some(s) => {
            prop_assert_eq!(s.apply(t1), s.apply(t2));
            prop_assert_eq!(s.apply(&s.apply(t1)), s.apply(t1));
            for th in &ground {
                for v in &vars {
                    let x = Term::var(v.clone());
                    prop_assert_eq!(th.apply(&s.apply(&x)), th.apply(&x));
                }
            }
        }
    }
    Ok(())
}

pub fn check_variant(t: &Term, perm: &[&str]) -> Check {
    let map: BTreeMap<String, String> = VARS.iter().zip(perm).map(|(a, b)| (a.to_string(), format!("V{b}"))).collect();
    prop_assert!(is_variant(t, &t.rename(&map)));
    let merge = BTreeMap::from([("X".to_string(), "Y".to_string())]);
    let vs = t.vars();
    let both = vs.contains(&"X".to_string()) && vs.contains(&"Y".to_string());
    prop_assert_eq!(is_variant(t, &t.rename(&merge)), !both);
    Ok(())
}

pub fn check_round_trip(t: &Term) -> Check {
    let g = parse_goal(&format!("p({t})")).unwrap();
    match g.items.as_slice() {
        [Subgoal::Lit(l)] => prop_assert_eq!(&l.args[0], t),
        other => prop_assert!(false, "unexpected goal {:?}", other),
    }
    Ok(())
}

// Linear clause heads over a, b and f/1.
fn pattern(depth: u32) -> BoxedStrategy<Option<Term>> {
    if depth == 0 {
        return prop_oneof![Just(None), Just(Some(Term::atom("a"))), Just(Some(Term::atom("b")))].boxed();
    }
    prop_oneof![
        2 => Just(None),
        1 => Just(Some(Term::atom("a"))),
        1 => Just(Some(Term::atom("b"))),
        2 => pattern(depth - 1).prop_map(|t| Some(Term::comp("f", vec![t.unwrap_or_else(|| Term::var("_"))]))),
    ]
    .boxed()
}

fn number_vars(t: &Term, next: &mut usize) -> Term {
    match t {
        Term::Var(_) => {
            *next += 1;
            Term::var(format!("V{next}"))
        }
        Term::Comp(f, args) => Term::comp(f.clone(), args.iter().map(|a| number_vars(a, next)).collect()),
        other => other.clone(),
    }
}

pub fn heads() -> impl Strategy<Value = Vec<Literal>> {
    (2usize..=3).prop_flat_map(|arity| {
        prop::collection::vec(prop::collection::vec(pattern(2), arity), 1..=4).prop_map(|rows| {
            let mut next = 0;
            rows.into_iter()
                .map(|args| {
                    let args = args.into_iter().map(|a| number_vars(&a.unwrap_or_else(|| Term::var("_")), &mut next)).collect();
                    Literal::new("h", args)
                })
                .collect()
        })
    })
}

fn inputs(arity: usize) -> Vec<Vec<Term>> {
    let a = Term::atom("a");
    let b = Term::atom("b");
    let f = |t: &Term| Term::comp("f", vec![t.clone()]);
    let u = vec![a.clone(), b.clone(), f(&a), f(&b), f(&f(&a)), f(&f(&b))];
    let mut out = vec![Vec::new()];
    for _ in 0..arity {
        out = out.into_iter().flat_map(|p: Vec<Term>| u.iter().map(move |t| [p.clone(), vec![t.clone()]].concat())).collect();
    }
    out
}

fn matches(pattern: &Term, t: &Term) -> bool {
    match (pattern, t) {
        (Term::Var(_), _) => true,
        (Term::Comp(f, xs), Term::Comp(g, ys)) => f == g && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| matches(x, y)),
        (p, t) => p == t,
    }
}

fn walk(tree: &DefTree, args: &Term) -> Option<usize> {
    match tree {
        DefTree::Clause { clause, .. } => Some(*clause),
        DefTree::Branch { pos, children, .. } => {
            let sub = args.at(pos)?;
            let key = match sub {
                Term::Comp(f, xs) => Key::Fun(f.clone(), xs.len()),
                _ => return None,
            };
            children.iter().find(|(k, _)| *k == key).and_then(|(_, t)| walk(t, args))
        }
        DefTree::Or(_) => panic!("or-node without allow_or"),
    }
}

pub fn check_def_tree(hs: &[Literal]) -> Check {
    let arity = hs[0].arity();
    let tree = build_tree(hs, &TreeOptions { allowed: None, allow_or: false, collapse: false });
    let cases = inputs(arity);
    let matching = |input: &Vec<Term>| -> Vec<usize> {
        (0..hs.len()).filter(|&i| hs[i].args.iter().zip(input).all(|(p, t)| matches(p, t))).collect()
    };
    let overlap = cases.iter().any(|c| matching(c).len() > 1);
    if let Some(tree) = tree {
        prop_assert!(!overlap, "tree for overlapping heads {:?}", hs);
        let mut leaves = tree.clauses();
        leaves.sort();
        prop_assert_eq!(leaves, (0..hs.len()).collect::<Vec<_>>());
        for c in &cases {
            let args = Term::comp("h", c.clone());
            let want = matching(c);
            match walk(&tree, &args) {
                Some(i) => prop_assert_eq!(want, vec![i]),
                None => prop_assert!(want.is_empty()),
            }
        }
    }
    Ok(())
}

pub fn check_minimal_sets(hs: &[Literal]) -> Check {
    let clauses: Vec<Clause> = hs.iter().cloned().map(Clause::fact).collect();
    for s in minimal_indseq_sets(&clauses) {
        let tree = build_def_tree(&clauses, &s);
        prop_assert!(tree.is_some());
        for p in tree.unwrap().multi_branch_positions() {
            prop_assert!(s.contains(&p[0]));
        }
        for i in &s {
            let mut smaller = s.clone();
            smaller.remove(i);
            prop_assert!(build_def_tree(&clauses, &smaller).is_none());
        }
    }
    Ok(())
}

const CONSTS: &[&str] = &["a", "b", "c"];

// Rules over the edge relation e/2; each is (head, body) with variables X, Y, Z.
const RULES: &[(&str, &[&str])] = &[
    ("p(X,Y)", &["e(X,Y)"]),
    ("p(X,Y)", &["e(X,Z)", "p(Z,Y)"]),
    ("p(X,Y)", &["p(X,Z)", "e(Z,Y)"]),
    ("p(X,X)", &["e(X,Y)"]),
    ("q(X,Y)", &["p(Y,X)"]),
    ("q(X,Y)", &["e(X,Y)", "e(Y,X)"]),
    ("q(X,X)", &["p(X,Y)", "e(Y,Y)"]),
];

fn atom(src: &str) -> Literal {
    match parse_goal(src).unwrap().items.remove(0) {
        Subgoal::Lit(l) => l,
        _ => unreachable!(),
    }
}

pub fn datalog() -> impl Strategy<Value = (Vec<(usize, usize)>, Vec<usize>)> {
    (
        prop::collection::vec((0..CONSTS.len(), 0..CONSTS.len()), 1..6),
        prop::sample::subsequence((0..RULES.len()).collect::<Vec<_>>(), 1..=4),
    )
}

fn build(edges: &[(usize, usize)], rules: &[usize]) -> LogicProgram {
    let mut clauses = Vec::new();
    for (a, b) in edges {
        clauses.push(Clause::fact(Literal::new("e", vec![Term::atom(CONSTS[*a]), Term::atom(CONSTS[*b])])));
    }
    // p must be defined, since q's rules call it
    let base = if rules.contains(&0) { vec![] } else { vec![0] };
    for &r in base.iter().chain(rules) {
        let (h, body) = RULES[r];
        clauses.push(Clause::rule(atom(h), Goal::from_literals(body.iter().map(|b| atom(b)))));
    }
    LogicProgram::new(clauses)
}

/// Least Herbrand model by naive bottom-up iteration.
fn least_model(p: &LogicProgram) -> BTreeSet<(String, Vec<String>)> {
    let mut model: BTreeSet<(String, Vec<String>)> = BTreeSet::new();
    let ground = |l: &Literal, s: &Substitution| -> (String, Vec<String>) {
        (l.pred.clone(), l.args.iter().map(|a| s.apply(a).to_string()).collect())
    };
    loop {
        let mut added = false;
        for c in &p.clauses {
            let vars = c.vars();
            let mut assignments: Vec<Vec<(String, Term)>> = vec![Vec::new()];
            for v in &vars {
                assignments = assignments
                    .into_iter()
                    .flat_map(|pre| CONSTS.iter().map(move |k| [pre.clone(), vec![(v.clone(), Term::atom(*k))]].concat()))
                    .collect();
            }
            for a in assignments {
                let s = Substitution::from_bindings(a).unwrap();
                let body_holds = c.body.items.iter().all(|sg| match sg {
                    Subgoal::Lit(l) => model.contains(&ground(l, &s)),
                    _ => false,
                });
                if body_holds && model.insert(ground(&c.head, &s)) {
                    added = true;
                }
            }
        }
        if !added {
            return model;
        }
    }
}

const SMALL: Limits = Limits { max_steps: 20_000, max_depth: 1000, max_answers: 100 };

pub fn check_least_model(edges: &[(usize, usize)], rules: &[usize], pred: &str) -> Check {
    let p = build(edges, rules);
    if !p.predicates().iter().any(|k| k.name == pred) {
        return Ok(());
    }
    let model = least_model(&p);
    let want: BTreeSet<String> = model
        .iter()
        .filter(|(q, _)| q == pred)
        .map(|(_, args)| format!("{{X -> {}, Y -> {}}}", args[0], args[1]))
        .collect();
    let goal = parse_goal(&format!("{pred}(X,Y)")).unwrap();
    let out = solve(&p, &goal, SMALL).unwrap();
    let got: BTreeSet<String> = sld_answers(&out, &goal_vars(&goal)).iter().map(render_answer).collect();
    prop_assert!(got.is_subset(&want), "sld {:?} model {:?}", got, want);
    if out.status == Status::Exhausted {
        prop_assert_eq!(&got, &want);
    }
    let c = compare(&p, &goal, &infer_respos(&p).cleared(), TransformMode::conservative(), SMALL).unwrap();
    let narrowed: BTreeSet<String> = c.narrow_answers.iter().map(render_answer).collect();
    prop_assert!(narrowed.is_subset(&want));
    if c.narrow.status == Status::Exhausted {
        prop_assert_eq!(&narrowed, &want);
    }
    prop_assert_ne!(c.verdict, Verdict::Mismatch);
    Ok(())
}
