use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const PLUS: &str = "plus(o,Y,Y).\nplus(s(X),Y,s(Z)) :- plus(X,Y,Z).\n";

const DUP: &str = "app([],Ys,Ys).
app([X|Xs],Ys,[X|Zs]) :- app(Xs,Ys,Zs).
app3(Xs,Ys,Zs,Ts) :- app(Xs,Ys,Rs), app(Rs,Zs,Ts).
dup(Xs,Z) :- app3(_,[Z|_],[Z|_],Xs).
";

fn pl2flc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pl2flc")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn file(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn transform_defaults_to_demand_mode() {
    let d = TempDir::new().unwrap();
    let plus = file(&d, "plus.pl", PLUS);
    let o = pl2flc(&["transform", s(&plus)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o),
        "-- Functional logic program generated by pl2flc.\n\ndata Term = O | S Term\n\nplus O y = y\nplus (S x) y = S (plus x y)\n"
    );
}

#[test]
fn transform_conservative_and_explain() {
    let d = TempDir::new().unwrap();
    let plus = file(&d, "plus.pl", PLUS);
    let o = pl2flc(&["transform", "--mode", "conservative", "--explain", s(&plus)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).ends_with("plus O y y = True\nplus (S x) y (S z) | plus x y z = True\n"));
    assert_eq!(stderr(&o), "plus/3: indseq=none respos={} source=none\nis/2: indseq=none respos={} source=none\n");
    let o = pl2flc(&["transform", "--explain", s(&plus)]);
    assert_eq!(stderr(&o), "plus/3: indseq={1} respos={3} source=heuristic\n");
}

#[test]
fn transform_without_inference_keeps_predicates() {
    let d = TempDir::new().unwrap();
    let app3 = file(&d, "app3.pl", DUP);
    let plain = pl2flc(&["transform", "--no-infer", s(&app3)]);
    let cons = pl2flc(&["transform", "--mode", "conservative", s(&app3)]);
    assert_eq!(plain.status.code(), Some(0));
    assert_eq!(stdout(&plain), stdout(&cons));
}

#[test]
fn transform_without_let_and_to_file() {
    let d = TempDir::new().unwrap();
    let plus = file(&d, "plus.pl", PLUS);
    let out = d.path().join("plus.curry");
    let o = pl2flc(&["transform", "--no-let", "-o", s(&out), s(&plus)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.ends_with("plus O y = y\nplus (S x) y | z =:= plus x y = S z\n"));
}

#[test]
fn errors_exit_with_one() {
    let d = TempDir::new().unwrap();
    let bad = file(&d, "bad.pl", "p(X :- q.\n");
    let o = pl2flc(&["transform", s(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.pl:1:"), "{}", stderr(&o));
    let cut = file(&d, "cut.pl", "p(X) :- q(X), !.\nq(a).\n");
    let o = pl2flc(&["transform", s(&cut)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cut"));
    let plus = file(&d, "plus.pl", PLUS);
    let o = pl2flc(&["run", "--engine", "sld", s(&plus), "plus(X,"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn run_sld_reports_answers_then_the_limit() {
    let d = TempDir::new().unwrap();
    let dup = file(&d, "dup.pl", DUP);
    let o = pl2flc(&["run", "--engine", "sld", "--max-steps", "5000", s(&dup), "dup([1,2,2,1],Z)"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[..2], ["{Z -> 1}", "{Z -> 2}"]);
    assert!(lines[2].starts_with("status: step-limit"), "{out}");
}

#[test]
fn run_narrow_on_a_transformed_file() {
    let d = TempDir::new().unwrap();
    let dup = file(&d, "dup.pl", DUP);
    let flc = d.path().join("dup_demand");
    assert_eq!(pl2flc(&["transform", "-o", s(&flc), s(&dup)]).status.code(), Some(0));
    let o = pl2flc(&["run", "--engine", "narrow", s(&flc), "dup [1,2,2,1]"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[..2], ["1", "2"]);
    assert!(lines[2].starts_with("status: exhausted"), "{out}");
}

#[test]
fn run_narrow_splits_two() {
    let d = TempDir::new().unwrap();
    let plus12 = file(&d, "plus12", "plus y = (O, y)\nplus (S z) | (x,y) =:= plus z = (S x, y)\n");
    let o = pl2flc(&["run", "--engine", "narrow", "--strategy", "dfs", s(&plus12), "plus (S (S O))"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let mut values: Vec<&str> = out.lines().filter(|l| !l.starts_with("status:")).collect();
    values.sort();
    assert_eq!(values, ["(O, S (S O))", "(S (S O), O)", "(S O, S O)"]);
    assert!(out.contains("status: exhausted"));
}

#[test]
fn run_narrow_accepts_prolog_input() {
    let d = TempDir::new().unwrap();
    let plus = file(&d, "plus.pl", PLUS);
    let o = pl2flc(&["run", "--engine", "narrow", s(&plus), "plus (S O) (S O)"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("S (S O)\n"));
}

#[test]
fn compare_verdicts() {
    let d = TempDir::new().unwrap();
    let plus = file(&d, "plus.pl", PLUS);
    let o = pl2flc(&["compare", s(&plus), "plus(s(o),o,Z)"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("{Z -> s(o)}"));
    assert!(stdout(&o).ends_with("verdict: EQUAL\n"));

    let app3 = file(&d, "app3.pl", DUP);
    let o = pl2flc(&["compare", "--max-steps", "20000", s(&app3), "app3(Xs,Ys,Zs,[])"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("narrowing: status=exhausted"), "{out}");
    assert!(out.contains("narrowing answers:\n  {Xs -> [], Ys -> [], Zs -> []}\nonly sld:"), "{out}");
    assert!(out.ends_with("verdict: SLD-LIMIT\n"));

    let empty = file(&d, "empty.pl", "");
    let o = pl2flc(&["compare", s(&empty), "true"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).ends_with("verdict: EQUAL\n"));
}

#[test]
fn compare_mismatch_exits_nonzero() {
    let d = TempDir::new().unwrap();
    let lazy = file(
        &d,
        "lazy.pl",
        ":- function dec/2.\ndec(s(X),X).\n:- function const/3.\nconst(X,_,X).\nf(X,Y) :- dec(X,Z), const(o,Z,Y).\n",
    );
    let o = pl2flc(&["compare", s(&lazy), "f(o,Y)"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).ends_with("verdict: MISMATCH\n"));
    let o = pl2flc(&["compare", "--mode", "functional", s(&lazy), "f(o,Y)"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn bench_writes_table_and_csv() {
    let d = TempDir::new().unwrap();
    file(&d, "plus.pl", PLUS);
    file(
        &d,
        "bench.toml",
        "[[entry]]\nname = \"plus\"\nprogram = \"plus.pl\"\ngoal = \"plus(X,Y,s(s(o)))\"\nmodes = [\"conservative\", \"demand\"]\n",
    );
    let csv = d.path().join("out.csv");
    let o = pl2flc(&["bench", s(d.path()), "--csv", s(&csv)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("program"));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(
        text,
        "program,mode,engine,answers,steps,status\nplus,-,sld,3,5,exhausted\nplus,conservative,narrow,3,20,exhausted\nplus,demand,narrow,3,15,exhausted\n"
    );
}

#[test]
fn bench_without_manifest_exits_with_one() {
    let d = TempDir::new().unwrap();
    let o = pl2flc(&["bench", s(d.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bench.toml"));
}
