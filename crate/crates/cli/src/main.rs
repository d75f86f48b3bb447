use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pl2flc_core::analysis::{directive_respos, infer_respos, ResPosMap};
use pl2flc_core::codegen::{emit_program, EmitOptions};
use pl2flc_core::frontend::{parse_goal, parse_program_file};
use pl2flc_core::harness::{compare, render_table, run_suite, write_csv, HarnessError, Verdict};
use pl2flc_core::narrow::NarrowProgram;
use pl2flc_core::reader::{read_program, read_query};
use pl2flc_core::sld::{Limits, SldProgram, Strategy};
use pl2flc_core::transform::{transform_program, Mode, TransformMode};

#[derive(Parser)]
#[command(name = "pl2flc", version, about = "Transform logic programs into functional logic programs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Emit the functional logic version of a Prolog program
    Transform {
        file: PathBuf,
        #[arg(long, default_value = "demand")]
        mode: Mode,
        /// Use `=:=` instead of local bindings in demand mode
        #[arg(long)]
        no_let: bool,
        /// Only use result positions given by `:- function` directives
        #[arg(long)]
        no_infer: bool,
        /// Print the result-position analysis to stderr
        #[arg(long)]
        explain: bool,
        #[arg(short = 'o', long = "output")]
        out: Option<PathBuf>,
    },
    /// Run a goal with SLD resolution or an expression with narrowing
    Run {
        #[arg(long, value_parser = ["sld", "narrow"])]
        engine: String,
        #[arg(long, default_value = "id")]
        strategy: Strategy,
        #[command(flatten)]
        limits: LimitArgs,
        file: PathBuf,
        query: String,
    },
    /// Run a goal under both engines and compare the answer sets
    Compare {
        #[arg(long, default_value = "demand")]
        mode: Mode,
        #[command(flatten)]
        limits: LimitArgs,
        file: PathBuf,
        goal: String,
    },
    /// Run every entry of a suite directory's bench.toml
    Bench {
        dir: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Args)]
struct LimitArgs {
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long)]
    max_depth: Option<u64>,
    #[arg(long)]
    max_answers: Option<usize>,
}

impl LimitArgs {
    fn limits(&self) -> Limits {
        let d = Limits::default();
        Limits {
            max_steps: self.max_steps.unwrap_or(d.max_steps),
            max_depth: self.max_depth.unwrap_or(d.max_depth),
            max_answers: self.max_answers.unwrap_or(d.max_answers),
        }
    }
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Failure {
        Failure(e.to_string())
    }
}

fn respos_for(p: &pl2flc_core::ast::LogicProgram, mode: Mode, infer: bool) -> ResPosMap {
    let r = if infer { infer_respos(p) } else { directive_respos(p) };
    if mode == Mode::Conservative {
        r.cleared()
    } else {
        r
    }
}

fn located<E: std::fmt::Display>(path: &Path) -> impl Fn(E) -> Failure + '_ {
    move |e| Failure(format!("{}: {e}", path.display()))
}

fn transform(file: &Path, mode: Mode, no_let: bool, no_infer: bool, explain: bool, out: Option<&Path>) -> Result<(), Failure> {
    let p = parse_program_file(file)?;
    let respos = respos_for(&p, mode, !no_infer);
    if explain {
        eprint!("{}", respos.report());
    }
    let tm = TransformMode { use_let: !no_let, ..TransformMode::new(mode) };
    let t = transform_program(&p, &respos, tm).map_err(located(file))?;
    let text = emit_program(&t.program, &EmitOptions::default());
    match out {
        Some(path) => std::fs::write(path, text).map_err(located(path))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(engine: &str, strategy: Strategy, limits: Limits, file: &Path, query: &str) -> Result<(), Failure> {
    if engine == "sld" {
        let p = parse_program_file(file)?;
        let g = parse_goal(query)?;
        let out = SldProgram::new(&p).solve(&g, limits, strategy)?;
        print!("{}", out.render());
        return Ok(());
    }
    let program = if file.extension().is_some_and(|e| e == "pl") {
        let p = parse_program_file(file)?;
        transform_program(&p, &infer_respos(&p), TransformMode::demand()).map_err(located(file))?.program
    } else {
        let src = std::fs::read_to_string(file).map_err(located(file))?;
        read_program(&src).map_err(located(file))?
    };
    let e = read_query(query, &program).map_err(|e| Failure(format!("query: {e}")))?;
    let out = NarrowProgram::new(&program)?.narrow(&e, limits, strategy)?;
    print!("{}", out.render());
    Ok(())
}

fn compare_cmd(mode: Mode, limits: Limits, file: &Path, goal: &str) -> Result<bool, Failure> {
    let p = parse_program_file(file)?;
    let g = parse_goal(goal)?;
    let respos = respos_for(&p, mode, true);
    let c = compare(&p, &g, &respos, TransformMode::new(mode), limits)?;
    print!("{}", c.render());
    Ok(c.verdict != Verdict::Mismatch)
}

fn bench(dir: &Path, csv: Option<&Path>) -> Result<bool, Failure> {
    let rows = run_suite(dir).map_err(|e| match e {
        HarnessError::Manifest { .. } => Failure(e.to_string()),
        e => Failure(format!("{}: {e}", dir.display())),
    })?;
    print!("{}", render_table(&rows));
    if let Some(path) = csv {
        let f = std::fs::File::create(path).map_err(located(path))?;
        write_csv(&rows, f)?;
    }
    Ok(rows.iter().all(|r| r.verdict != Some(Verdict::Mismatch)))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Transform { file, mode, no_let, no_infer, explain, out } => {
            transform(file, *mode, *no_let, *no_infer, *explain, out.as_deref()).map(|_| true)
        }
        Cmd::Run { engine, strategy, limits, file, query } => run(engine, *strategy, limits.limits(), file, query).map(|_| true),
        Cmd::Compare { mode, limits, file, goal } => compare_cmd(*mode, limits.limits(), file, goal),
        Cmd::Bench { dir, csv } => bench(dir, csv.as_deref()),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
