use std::time::{Duration, Instant};

use pl2flc_core::codegen::{emit_program, EmitOptions};
use pl2flc_core::flc::FlcProgram;
use pl2flc_core::frontend::{parse_goal, parse_program};
use pl2flc_core::harness::{default_respos, goal_vars, narrow_answers, render_answer};
use pl2flc_core::narrow::{count_steps, narrow};
use pl2flc_core::reader::{read_program, read_query};
use pl2flc_core::sld::{solve, Limits, SearchOutcome, Status};
use pl2flc_core::transform::{transform_program, Mode, TransformMode, Translation};

const DUP: &str = "app([],Ys,Ys).
app([X|Xs],Ys,[X|Zs]) :- app(Xs,Ys,Zs).
app3(Xs,Ys,Zs,Ts) :- app(Xs,Ys,Rs), app(Rs,Zs,Ts).
dup(Xs,Z) :- app3(_,[Z|_],[Z|_],Xs).";

const PLUS: &str = "plus(o,Y,Y).
plus(s(X),Y,s(Z)) :- plus(X,Y,Z).";

// Deep enough that only the step budget can stop the search.
const SLD_LIMITS: Limits = Limits { max_steps: 100_000, max_depth: 10_000_000, max_answers: 100 };
const BUDGET: Duration = Duration::from_secs(5);

fn sld(src: &str, goal: &str) -> SearchOutcome {
    solve(&parse_program(src).unwrap(), &parse_goal(goal).unwrap(), SLD_LIMITS).unwrap()
}

fn demand(src: &str) -> Translation {
    let p = parse_program(src).unwrap();
    transform_program(&p, &default_respos(&p, Mode::Demand), TransformMode::demand()).unwrap()
}

fn assert_step_limit(out: &SearchOutcome) {
    assert_eq!(out.status, Status::StepLimit);
    assert!(out.total_steps >= 100_000, "{}", out.total_steps);
}

#[test]
fn dup_of_empty_list() {
    let t0 = Instant::now();
    let out = sld(DUP, "dup([],Z)");
    assert_step_limit(&out);
    assert!(out.answers.is_empty());
    let t = demand(DUP);
    let e = read_query("dup []", &t.program).unwrap();
    let n = narrow(&t.program, &e, Limits::default()).unwrap();
    assert_eq!(n.status, Status::Exhausted);
    assert!(n.results.is_empty());
    assert!(t0.elapsed() < BUDGET);
}

#[test]
fn app3_with_empty_result() {
    let t0 = Instant::now();
    let goal = "app3(Xs,Ys,Zs,[])";
    let out = sld(DUP, goal);
    assert_step_limit(&out);
    assert_eq!(out.answers.len(), 1);
    let t = demand(DUP);
    let g = parse_goal(goal).unwrap();
    let q = t.translate_goal(&g, &[]).unwrap();
    assert_eq!(q.expr.to_string(), "[] =:= app3 xs ys zs");
    let n = narrow(&t.program, &q.expr, Limits::default()).unwrap();
    assert_eq!(n.status, Status::Exhausted);
    let answers: Vec<String> = narrow_answers(&n, &q, &goal_vars(&g)).iter().map(render_answer).collect();
    assert_eq!(answers, vec!["{Xs -> [], Ys -> [], Zs -> []}"]);
    assert!(t0.elapsed() < BUDGET);
}

#[test]
fn nested_plus_equal_to_zero() {
    let t0 = Instant::now();
    let goal = "plus(X,Y,R),plus(R,Z,o)";
    let out = sld(PLUS, goal);
    assert_step_limit(&out);
    assert_eq!(out.answers.len(), 1);
    let t = demand(PLUS);
    let e = read_query("plus (plus x y) z =:= O", &t.program).unwrap();
    let n = narrow(&t.program, &e, Limits::default()).unwrap();
    assert_eq!(n.status, Status::Exhausted);
    assert_eq!(n.results.len(), 1);
    assert_eq!(n.results[0].to_string(), "True  where {x -> O, y -> O, z -> O}");
    let q = t.translate_goal(&parse_goal(goal).unwrap(), &["R".to_string()]).unwrap();
    assert_eq!(q.expr.to_string(), "O =:= plus (plus x y) z");
    assert!(t0.elapsed() < BUDGET);
}

fn peano_expr(n: usize) -> String {
    (0..n).fold("O".to_string(), |acc, _| format!("(S {acc})"))
}

fn peano_term(n: usize) -> String {
    (0..n).fold("o".to_string(), |acc, _| format!("s({acc})"))
}

const IS_POS: &str = "isPos O = False\nisPos (S x) = True\n";

fn demand_plus_with_is_pos() -> FlcProgram {
    let t = demand(PLUS);
    let text = emit_program(&t.program, &EmitOptions { prologue: false, data_decl: false });
    read_program(&format!("{text}\n{IS_POS}")).unwrap()
}

#[test]
fn is_pos_of_sum_needs_two_steps() {
    let p = demand_plus_with_is_pos();
    for n1 in [0, 1, 5, 40] {
        for n2 in [0, 3] {
            let e = read_query(&format!("isPos (plus {} {})", peano_expr(n1), peano_expr(n2)), &p).unwrap();
            let out = narrow(&p, &e, Limits::default()).unwrap();
            let want = if n1 + n2 > 0 { "True" } else { "False" };
            assert_eq!(out.results[0].value.to_string(), want);
            if n1 > 0 {
                assert_eq!(count_steps(&p, &e, Limits::default()).unwrap(), 2, "n1={n1} n2={n2}");
            }
        }
    }
}

#[test]
fn conservative_route_grows_with_the_first_summand() {
    let src = format!("{PLUS}\nisPos(s(_)).");
    let p = parse_program(&src).unwrap();
    let t = transform_program(&p, &default_respos(&p, Mode::Conservative), TransformMode::conservative()).unwrap();
    let mut last = 0;
    for n1 in 1..=6 {
        let g = parse_goal(&format!("plus({},s(o),R), isPos(R)", peano_term(n1))).unwrap();
        let q = t.translate_goal(&g, &[]).unwrap();
        let steps = count_steps(&t.program, &q.expr, Limits::default()).unwrap();
        assert!(steps > 2 && steps > last, "n1={n1} steps={steps}");
        last = steps;
    }
}
