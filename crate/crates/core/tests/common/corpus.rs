use std::collections::BTreeSet;

use pl2flc_core::analysis::{infer_respos, ResPosMap};
use pl2flc_core::ast::LogicProgram;
use pl2flc_core::frontend::{parse_goal, parse_program};
use pl2flc_core::harness::{compare, Comparison};
use pl2flc_core::sld::Limits;
use pl2flc_core::transform::TransformMode;

pub const PLUS: &str = "plus(o,Y,Y).
plus(s(X),Y,s(Z)) :- plus(X,Y,Z).";

pub const APP: &str = "app([],Ys,Ys).
app([X|Xs],Ys,[X|Zs]) :- app(Xs,Ys,Zs).";

pub const REV: &str = "app([],Ys,Ys).
app([X|Xs],Ys,[X|Zs]) :- app(Xs,Ys,Zs).
rev([],[]).
rev([X|Xs],Zs) :- rev(Xs,Ys), app(Ys,[X],Zs).";

pub const LEN: &str = "len([],o).
len([_|Xs],s(N)) :- len(Xs,N).";

pub const MEMBER: &str = "member(X,[X|_]).
member(X,[_|Ys]) :- member(X,Ys).";

pub const ACK: &str = "ackermann(o,N,s(N)).
ackermann(s(M),o,V) :- ackermann(M,s(o),V).
ackermann(s(M),s(N),V) :- ackermann(s(M),N,V1), ackermann(M,V1,V).";

pub const TIMES: &str = "plus(o,Y,Y).
plus(s(X),Y,s(Z)) :- plus(X,Y,Z).
times(o,_,o).
times(s(X),Y,Z) :- times(X,Y,W), plus(W,Y,Z).";

pub const PERM: &str = "sel(X,[X|Xs],Xs).
sel(X,[Y|Xs],[Y|Zs]) :- sel(X,Xs,Zs).
perm([],[]).
perm(L,[X|P]) :- sel(X,L,R), perm(R,P).";

pub const EVEN: &str = "even(o).
even(s(s(X))) :- even(X).";

pub const FAC: &str = "fac(N,F) :- (N=0 -> F=1 ; N1 is N - 1, fac(N1, F1), F is F1 * N).";

pub const Q: &str = "q(a,c).
q(b,d).";

pub const LAST: &str = "last([X],X).
last([_|Xs],X) :- last(Xs,X).";

pub const LE: &str = "le(o,_).
le(s(X),s(Y)) :- le(X,Y).";

pub const TWO: &str = "two(s(s(o))).";

pub struct Pair {
    pub name: &'static str,
    pub program: &'static str,
    pub goal: &'static str,
    // extra result-position assignments tried on top of the generated maps
    pub extra: &'static [(&'static str, usize, &'static [usize])],
    // uses arithmetic builtins, so only maps keeping them functional apply
    pub arith: bool,
}

pub const CORPUS: &[Pair] = &[
    Pair { name: "plus-forward", program: PLUS, goal: "plus(s(o),o,Z)", extra: &[("plus", 3, &[1, 2])], arith: false },
    Pair { name: "plus-split", program: PLUS, goal: "plus(X,Y,s(s(o)))", extra: &[("plus", 3, &[1, 2])], arith: false },
    Pair { name: "plus-minus", program: PLUS, goal: "plus(X,s(o),s(s(s(o))))", extra: &[("plus", 3, &[1, 2])], arith: false },
    Pair { name: "app-split", program: APP, goal: "app(X,Y,[a,b,c])", extra: &[("app", 3, &[1, 2])], arith: false },
    Pair { name: "app-forward", program: APP, goal: "app([a,b],[c,d],L)", extra: &[], arith: false },
    Pair { name: "rev", program: REV, goal: "rev([a,b,c,d,e],R)", extra: &[], arith: false },
    Pair { name: "len", program: LEN, goal: "len([a,b,c],N)", extra: &[], arith: false },
    Pair { name: "member", program: MEMBER, goal: "member(X,[a,b,c])", extra: &[("member", 2, &[1])], arith: false },
    Pair { name: "ackermann", program: ACK, goal: "ackermann(s(o),s(o),V)", extra: &[], arith: false },
    Pair { name: "times", program: TIMES, goal: "times(s(s(o)),s(s(o)),Z)", extra: &[("plus", 3, &[1, 2])], arith: false },
    Pair { name: "perm", program: PERM, goal: "perm([a,b,c],P)", extra: &[], arith: false },
    Pair { name: "even", program: EVEN, goal: "even(s(s(s(s(o)))))", extra: &[], arith: false },
    Pair { name: "fac", program: FAC, goal: "fac(5,F)", extra: &[], arith: true },
    Pair { name: "q-table", program: Q, goal: "q(X,Y)", extra: &[("q", 2, &[1])], arith: false },
    Pair { name: "last", program: LAST, goal: "last([a,b,c],X)", extra: &[], arith: false },
    Pair { name: "le", program: LE, goal: "le(X,s(s(o)))", extra: &[], arith: false },
    Pair { name: "two", program: TWO, goal: "two(X)", extra: &[], arith: false },
];

pub fn program(p: &Pair) -> LogicProgram {
    parse_program(p.program).unwrap()
}

fn uniform(p: &LogicProgram, pick: impl Fn(usize) -> BTreeSet<usize>) -> ResPosMap {
    let mut r = ResPosMap::new();
    for k in p.predicates() {
        let s = pick(k.arity);
        r.set(k, s);
    }
    r
}

/// Distinct result-position maps for one corpus program: the inferred one,
/// the empty one, last or first argument everywhere (pure programs only),
/// and the pair's extra assignments applied to the inferred map.
pub fn respos_maps(pair: &Pair) -> Vec<(String, ResPosMap)> {
    let p = program(pair);
    let inferred = infer_respos(&p);
    let mut maps = vec![("inferred".to_string(), inferred.clone()), ("none".to_string(), inferred.cleared())];
    if !pair.arith {
        maps.push(("last".to_string(), uniform(&p, |n| if n == 0 { BTreeSet::new() } else { BTreeSet::from([n]) })));
        maps.push(("first".to_string(), uniform(&p, |n| if n == 0 { BTreeSet::new() } else { BTreeSet::from([1]) })));
    }
    for (name, arity, set) in pair.extra {
        let mut m = inferred.clone();
        m.set(pl2flc_core::ast::PredKey::new(*name, *arity), set.iter().copied().collect());
        maps.push((format!("{name}/{arity}={set:?}"), m));
    }
    let mut out: Vec<(String, ResPosMap)> = Vec::new();
    for (n, m) in maps {
        if !out.iter().any(|(_, o)| respos_equal(&p, o, &m)) {
            out.push((n, m));
        }
    }
    out
}

fn respos_equal(p: &LogicProgram, a: &ResPosMap, b: &ResPosMap) -> bool {
    p.predicates().iter().all(|k| a.get(k) == b.get(k))
}

pub fn run(pair: &Pair, respos: &ResPosMap, mode: TransformMode, limits: Limits) -> Comparison {
    let p = program(pair);
    let g = parse_goal(pair.goal).unwrap();
    compare(&p, &g, respos, mode, limits).unwrap()
}
