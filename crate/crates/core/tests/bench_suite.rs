use std::collections::BTreeMap;
use std::path::PathBuf;

use pl2flc_core::harness::{run_suite, write_csv, BenchRow, Verdict};

fn suite() -> Vec<BenchRow> {
    run_suite(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../bench")).unwrap()
}

fn by_program(rows: &[BenchRow]) -> BTreeMap<&str, Vec<&BenchRow>> {
    let mut out: BTreeMap<&str, Vec<&BenchRow>> = BTreeMap::new();
    for r in rows {
        out.entry(r.program.as_str()).or_default().push(r);
    }
    out
}

fn peano(n: u64) -> String {
    (0..n).fold("o".to_string(), |acc, _| format!("s({acc})"))
}

// Brute-force Ackermann on unary numbers: a number is its count of `s`.
fn ackermann(m: u64, n: u64) -> u64 {
    match (m, n) {
        (0, n) => n + 1,
        (m, 0) => ackermann(m - 1, 1),
        (m, n) => ackermann(m - 1, ackermann(m, n - 1)),
    }
}

// Takeuchi with `x <= y` as the base case, as in the Peano program.
fn tak(x: u64, y: u64, z: u64) -> u64 {
    if x <= y {
        z
    } else {
        tak(tak(x - 1, y, z), tak(y - 1, z, x), tak(z - 1, x, y))
    }
}

#[test]
fn engines_agree_on_the_table_programs() {
    let rows = suite();
    let groups = by_program(&rows);
    for name in ["rev64", "takPeano", "ackermann"] {
        let g = &groups[name];
        assert_eq!(g.len(), 4, "{name}");
        for r in g {
            assert_eq!(r.status, "exhausted", "{name} {}", r.mode);
            assert_eq!(r.answers, 1);
            assert_eq!(r.answer_set, g[0].answer_set, "{name} {}", r.mode);
            if r.engine == "narrow" {
                assert_eq!(r.verdict, Some(Verdict::Equal));
            }
        }
    }
    assert_eq!(ackermann(3, 2), 29);
    assert_eq!(groups["ackermann"][0].answer_set, vec![format!("{{V -> {}}}", peano(29))]);
    assert_eq!(groups["takPeano"][0].answer_set, vec![format!("{{A -> {}}}", peano(tak(4, 2, 1)))]);
    let reversed: Vec<String> = (1..=64).rev().map(|i| i.to_string()).collect();
    assert_eq!(groups["rev64"][0].answer_set, vec![format!("{{R -> [{}]}}", reversed.join(","))]);
}

#[test]
fn demand_needs_fewer_steps_than_conservative() {
    let rows = suite();
    for g in by_program(&rows).values() {
        let steps = |mode: &str| g.iter().find(|r| r.mode == mode).unwrap().steps;
        if g[0].status == "exhausted" {
            assert!(steps("demand") <= steps("conservative"), "{}", g[0].program);
        }
    }
}

#[test]
fn dup_row_contrasts_the_engines() {
    let rows = suite();
    let g = &by_program(&rows)["dup"];
    let sld = g.iter().find(|r| r.engine == "sld").unwrap();
    let demand = g.iter().find(|r| r.mode == "demand").unwrap();
    assert_eq!(sld.status, "step-limit");
    assert_eq!(demand.status, "exhausted");
    assert_eq!(sld.answer_set, vec!["{Z -> 1}", "{Z -> 2}"]);
    assert_eq!(demand.answer_set, sld.answer_set);
}

#[test]
fn csv_has_the_fixed_columns() {
    let rows = suite();
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("program,mode,engine,answers,steps,status"));
    assert_eq!(lines.count(), rows.len());
}
