//! Cross-engine comparison and the benchmark suite runner.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{infer_respos, ResPosMap};
use crate::ast::{is_fresh_name, Goal, LogicProgram, Term};
use crate::flc::Expr;
use crate::frontend::{parse_goal, parse_program_file};
use crate::narrow::{NarrowOutcome, NarrowProgram};
use crate::sld::{Limits, SearchOutcome, SldProgram, Status, Strategy};
use crate::transform::{transform_program, GoalQuery, Mode, TransformMode};

/// One answer with every visible goal variable bound, variables renamed
/// in order of first occurrence.
pub type CanonAnswer = Vec<(String, Term)>;

pub fn render_answer(a: &CanonAnswer) -> String {
    let items: Vec<String> = a.iter().map(|(v, t)| format!("{v} -> {t}")).collect();
    format!("{{{}}}", items.join(", "))
}

pub fn canonical(items: Vec<(String, Term)>) -> CanonAnswer {
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    for (_, t) in &items {
        for v in t.vars() {
            let k = map.len() + 1;
            map.entry(v).or_insert_with(|| format!("_{k}"));
        }
    }
    items.into_iter().map(|(n, t)| (n, t.rename(&map))).collect()
}

/// Visible variables of a goal, sorted by name.
pub fn goal_vars(goal: &Goal) -> Vec<String> {
    let mut vs: Vec<String> = goal.vars().into_iter().filter(|v| !is_fresh_name(v)).collect();
    vs.sort();
    vs.dedup();
    vs
}

pub fn sld_answers(out: &SearchOutcome, vars: &[String]) -> Vec<CanonAnswer> {
    out.answers
        .iter()
        .map(|a| canonical(vars.iter().map(|v| (v.clone(), a.subst.apply(&Term::var(v.clone())))).collect()))
        .collect()
}

/// Narrowing results of a translated goal mapped back to source terms.
pub fn narrow_answers(out: &NarrowOutcome, q: &GoalQuery, vars: &[String]) -> Vec<CanonAnswer> {
    let target_of: BTreeMap<&String, &String> = q.vars.iter().map(|(t, s)| (s, t)).collect();
    out.results
        .iter()
        .map(|r| {
            let items = vars
                .iter()
                .map(|v| {
                    let term = match target_of.get(v) {
                        Some(tv) => {
                            let e = r.subst.iter().find(|(n, _)| n == *tv).map(|(_, e)| e.clone()).unwrap_or_else(|| Expr::var(tv.as_str()));
                            q.source_term(&e).unwrap_or_else(|| Term::atom(format!("<{e}>")))
                        }
                        None => Term::var(v.clone()),
                    };
                    (v.clone(), term)
                })
                .collect();
            canonical(items)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Equal,
    SldLimit,
    NarrowLimit,
    Mismatch,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Equal => "EQUAL",
            Verdict::SldLimit => "SLD-LIMIT",
            Verdict::NarrowLimit => "NARROW-LIMIT",
            Verdict::Mismatch => "MISMATCH",
        })
    }
}

/// Complete searches must agree; a search cut short by a limit must not
/// have produced anything the complete one lacks.
pub fn verdict(sld: &BTreeSet<CanonAnswer>, sld_status: Status, nar: &BTreeSet<CanonAnswer>, nar_status: Status) -> Verdict {
    let sld_done = sld_status == Status::Exhausted;
    let nar_done = nar_status == Status::Exhausted;
    match (sld_done, nar_done) {
        (true, true) if sld == nar => Verdict::Equal,
        (true, true) => Verdict::Mismatch,
        (false, true) if sld.is_subset(nar) => Verdict::SldLimit,
        (true, false) if nar.is_subset(sld) => Verdict::NarrowLimit,
        (false, false) => Verdict::SldLimit,
        _ => Verdict::Mismatch,
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{0}")]
    Parse(#[from] crate::frontend::ParseError),
    #[error("{0}")]
    Transform(#[from] crate::transform::TransformError),
    #[error("{0}")]
    Sld(#[from] crate::sld::SldError),
    #[error("{0}")]
    Narrow(#[from] crate::narrow::NarrowError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub query: Expr,
    pub sld: SearchOutcome,
    pub narrow: NarrowOutcome,
    pub sld_answers: BTreeSet<CanonAnswer>,
    pub narrow_answers: BTreeSet<CanonAnswer>,
    pub verdict: Verdict,
}

impl Comparison {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let list = |out: &mut String, title: &str, set: &mut dyn Iterator<Item = &CanonAnswer>| {
            out.push_str(title);
            out.push('\n');
            for a in set {
                out.push_str("  ");
                out.push_str(&render_answer(a));
                out.push('\n');
            }
        };
        out.push_str(&format!("query: {}\n", self.query));
        list(&mut out, "sld answers:", &mut self.sld_answers.iter());
        list(&mut out, "narrowing answers:", &mut self.narrow_answers.iter());
        list(&mut out, "only sld:", &mut self.sld_answers.difference(&self.narrow_answers));
        list(&mut out, "only narrowing:", &mut self.narrow_answers.difference(&self.sld_answers));
        out.push_str(&format!("sld: status={} steps={}\n", self.sld.status, self.sld.total_steps));
        out.push_str(&format!("narrowing: status={} steps={}\n", self.narrow.status, self.narrow.total_steps));
        out.push_str(&format!("verdict: {}\n", self.verdict));
        out
    }
}

/// Result-position map a mode uses by default: inferred positions, or none
/// for the conservative transformation.
pub fn default_respos(p: &LogicProgram, mode: Mode) -> ResPosMap {
    let r = infer_respos(p);
    if mode == Mode::Conservative {
        r.cleared()
    } else {
        r
    }
}

/// Runs the goal with SLD resolution and its translation with narrowing.
pub fn compare(p: &LogicProgram, goal: &Goal, respos: &ResPosMap, mode: TransformMode, limits: Limits) -> Result<Comparison, HarnessError> {
    let sld = SldProgram::new(p).solve(goal, limits, Strategy::IterativeDeepening)?;
    compare_with_sld(p, goal, respos, mode, limits, sld)
}

fn compare_with_sld(
    p: &LogicProgram,
    goal: &Goal,
    respos: &ResPosMap,
    mode: TransformMode,
    limits: Limits,
    sld: SearchOutcome,
) -> Result<Comparison, HarnessError> {
    let t = transform_program(p, respos, mode)?;
    let q = t.translate_goal(goal, &[])?;
    let narrow = NarrowProgram::new(&t.program)?.narrow(&q.expr, limits, Strategy::IterativeDeepening)?;
    let vars = goal_vars(goal);
    let sld_answers: BTreeSet<CanonAnswer> = sld_answers(&sld, &vars).into_iter().collect();
    let narrow_answers: BTreeSet<CanonAnswer> = narrow_answers(&narrow, &q, &vars).into_iter().collect();
    let verdict = verdict(&sld_answers, sld.status, &narrow_answers, narrow.status);
    Ok(Comparison { query: q.expr, sld, narrow, sld_answers, narrow_answers, verdict })
}

/// Maps `f` over `items`, in parallel when the `parallel` feature is on.
pub fn batch_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    #[cfg(feature = "parallel")]
    {
        map_parallel(items, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_sequential(items, f)
    }
}

pub fn map_sequential<T, R>(items: &[T], f: impl Fn(&T) -> R) -> Vec<R> {
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_parallel<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

pub const MANIFEST: &str = "bench.toml";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(rename = "entry")]
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub name: String,
    pub program: PathBuf,
    pub goal: String,
    #[serde(default = "all_modes")]
    pub modes: Vec<String>,
    #[serde(default)]
    pub max_steps: Option<u64>,
    #[serde(default)]
    pub max_depth: Option<u64>,
    #[serde(default)]
    pub max_answers: Option<usize>,
}

fn all_modes() -> Vec<String> {
    vec!["conservative".into(), "functional".into(), "demand".into()]
}

impl Entry {
    pub fn limits(&self) -> Limits {
        let d = Limits::default();
        Limits {
            max_steps: self.max_steps.unwrap_or(d.max_steps),
            max_depth: self.max_depth.unwrap_or(d.max_depth),
            max_answers: self.max_answers.unwrap_or(d.max_answers),
        }
    }
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, HarnessError> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| HarnessError::Manifest { path: path.clone(), message: e.to_string() })?;
    let m: Manifest = toml::from_str(&text).map_err(|e| HarnessError::Manifest { path: path.clone(), message: e.to_string() })?;
    for e in &m.entries {
        for mode in &e.modes {
            mode.parse::<Mode>().map_err(|_| HarnessError::Manifest { path: path.clone(), message: format!("entry `{}`: unknown mode `{mode}`", e.name) })?;
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BenchRow {
    pub program: String,
    pub mode: String,
    pub engine: String,
    pub answers: usize,
    pub steps: u64,
    pub status: String,
    #[serde(skip)]
    pub verdict: Option<Verdict>,
    #[serde(skip)]
    pub answer_set: Vec<String>,
}

struct Loaded {
    entry: Entry,
    program: LogicProgram,
    goal: Goal,
}

fn load(dir: &Path, e: &Entry) -> Result<Loaded, HarnessError> {
    let program = parse_program_file(&dir.join(&e.program))?;
    let goal = parse_goal(&e.goal)?;
    Ok(Loaded { entry: e.clone(), program, goal })
}

/// Runs every entry of the suite in `dir`: one SLD row per entry, and one
/// narrowing row per entry and mode carrying the cross-engine verdict.
pub fn run_suite(dir: &Path) -> Result<Vec<BenchRow>, HarnessError> {
    let m = read_manifest(dir)?;
    let loaded: Vec<Loaded> = m.entries.iter().map(|e| load(dir, e)).collect::<Result<_, _>>()?;
    let sld: Vec<Result<SearchOutcome, HarnessError>> = batch_map(&loaded, |l| {
        Ok(SldProgram::new(&l.program).solve(&l.goal, l.entry.limits(), Strategy::IterativeDeepening)?)
    });
    let sld: Vec<SearchOutcome> = sld.into_iter().collect::<Result<_, _>>()?;
    let jobs: Vec<(usize, Mode)> = loaded
        .iter()
        .enumerate()
        .flat_map(|(i, l)| l.entry.modes.iter().map(move |m| (i, m.parse::<Mode>().unwrap())))
        .collect();
    let compared: Vec<Result<Comparison, HarnessError>> = batch_map(&jobs, |&(i, mode)| {
        let l = &loaded[i];
        let respos = default_respos(&l.program, mode);
        compare_with_sld(&l.program, &l.goal, &respos, TransformMode::new(mode), l.entry.limits(), sld[i].clone())
    });
    let mut rows = Vec::new();
    let mut compared = compared.into_iter();
    for (i, l) in loaded.iter().enumerate() {
        let vars = goal_vars(&l.goal);
        let answers: BTreeSet<CanonAnswer> = sld_answers(&sld[i], &vars).into_iter().collect();
        rows.push(BenchRow {
            program: l.entry.name.clone(),
            mode: "-".into(),
            engine: "sld".into(),
            answers: answers.len(),
            steps: sld[i].total_steps,
            status: sld[i].status.to_string(),
            verdict: None,
            answer_set: answers.iter().map(render_answer).collect(),
        });
        for mode in &l.entry.modes {
            let c = compared.next().expect("one comparison per mode")?;
            rows.push(BenchRow {
                program: l.entry.name.clone(),
                mode: mode.clone(),
                engine: "narrow".into(),
                answers: c.narrow_answers.len(),
                steps: c.narrow.total_steps,
                status: c.narrow.status.to_string(),
                verdict: Some(c.verdict),
                answer_set: c.narrow_answers.iter().map(render_answer).collect(),
            });
        }
    }
    Ok(rows)
}

pub fn render_table(rows: &[BenchRow]) -> String {
    let header = ["program", "mode", "engine", "answers", "steps", "status", "verdict"];
    let cells: Vec<[String; 7]> = rows
        .iter()
        .map(|r| {
            [
                r.program.clone(),
                r.mode.clone(),
                r.engine.clone(),
                r.answers.to_string(),
                r.steps.to_string(),
                r.status.clone(),
                r.verdict.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
            ]
        })
        .collect();
    let mut width = header.map(str::len);
    for row in &cells {
        for (w, c) in width.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let line = |items: &[String]| -> String {
        let parts: Vec<String> = items.iter().zip(&width).map(|(c, w)| format!("{c:<w$}")).collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(&header.map(String::from));
    for row in &cells {
        out.push_str(&line(row));
    }
    out
}

pub fn write_csv<W: std::io::Write>(rows: &[BenchRow], w: W) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;

    const PLUS: &str = "plus(o,Y,Y).\nplus(s(X),Y,s(Z)) :- plus(X,Y,Z).";

    #[test]
    fn canonical_names_follow_first_occurrence() {
        let a = canonical(vec![("X".into(), Term::comp("f", vec![Term::var("B"), Term::var("A")])), ("Y".into(), Term::var("B"))]);
        assert_eq!(render_answer(&a), "{X -> f(_1,_2), Y -> _1}");
    }

    #[test]
    fn verdicts() {
        let a: BTreeSet<CanonAnswer> = [vec![("X".into(), Term::atom("o"))]].into_iter().collect();
        let e = BTreeSet::new();
        assert_eq!(verdict(&a, Status::Exhausted, &a, Status::Exhausted), Verdict::Equal);
        assert_eq!(verdict(&a, Status::Exhausted, &e, Status::Exhausted), Verdict::Mismatch);
        assert_eq!(verdict(&e, Status::StepLimit, &a, Status::Exhausted), Verdict::SldLimit);
        assert_eq!(verdict(&a, Status::StepLimit, &e, Status::Exhausted), Verdict::Mismatch);
        assert_eq!(verdict(&a, Status::Exhausted, &e, Status::StepLimit), Verdict::NarrowLimit);
    }

    #[test]
    fn plus_compares_equal_in_every_mode() {
        let p = parse_program(PLUS).unwrap();
        let g = parse_goal("plus(s(o),o,Z)").unwrap();
        for mode in [Mode::Conservative, Mode::Functional, Mode::Demand] {
            let c = compare(&p, &g, &default_respos(&p, mode), TransformMode::new(mode), Limits::default()).unwrap();
            assert_eq!(c.verdict, Verdict::Equal, "{mode}\n{}", c.render());
            assert_eq!(c.narrow_answers.iter().map(render_answer).collect::<Vec<_>>(), vec!["{Z -> s(o)}"]);
        }
    }

    #[test]
    fn csv_columns() {
        let row = BenchRow {
            program: "p".into(),
            mode: "-".into(),
            engine: "sld".into(),
            answers: 1,
            steps: 2,
            status: "exhausted".into(),
            verdict: None,
            answer_set: Vec::new(),
        };
        let mut buf = Vec::new();
        write_csv(&[row], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "program,mode,engine,answers,steps,status\np,-,sld,1,2,exhausted\n");
    }
}
