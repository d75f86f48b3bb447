use std::path::PathBuf;

use pl2flc_core::codegen::{emit_program, EmitOptions};
use pl2flc_core::frontend::parse_program_file;
use pl2flc_core::harness::default_respos;
use pl2flc_core::transform::{transform_program, Mode, TransformMode};

pub struct Case {
    pub golden: &'static str,
    pub source: &'static str,
    pub mode: Mode,
    pub paper: &'static str,
}

// Program text as displayed in the paper, for the whitespace-insensitive check.
pub const CASES: &[Case] = &[
    Case {
        golden: "example2",
        source: "example1.pl",
        mode: Mode::Demand,
        paper: "app []     ys = ys
app (x:xs) ys = x : app xs ys
app3 xs ys zs = app (app xs ys) zs
dup xs | xs =:= app3 _ (z:_) (z:_)
       = z",
    },
    Case {
        golden: "plus_conservative",
        source: "plus.pl",
        mode: Mode::Conservative,
        paper: "plus O y y = True
plus (S x) y (S z) | plus x y z = True",
    },
    Case {
        golden: "plus_functional_3",
        source: "plus.pl",
        mode: Mode::Functional,
        paper: "plus O y = y
plus (S x) y | z =:= plus x y = S z",
    },
    Case {
        golden: "plus_functional_12",
        source: "plus12.pl",
        mode: Mode::Functional,
        paper: "plus y = (O, y)
plus (S z) | (x,y) =:= plus z = (S x, y)",
    },
    Case {
        golden: "plus_demand",
        source: "plus.pl",
        mode: Mode::Demand,
        paper: "plus O     y = y
plus (S x) y = S (plus x y)",
    },
    Case {
        golden: "app_rev",
        source: "app_rev.pl",
        mode: Mode::Demand,
        paper: "app []     ys = ys
app (x:xs) ys = x : app xs ys
rev []     = []
rev (x:xs) = app (rev xs) [x]",
    },
    Case {
        golden: "app3",
        source: "app3.pl",
        mode: Mode::Demand,
        paper: "app []     ys = ys
app (x:xs) ys = x : app xs ys
app3 xs ys zs = app (app xs ys) zs",
    },
    Case {
        golden: "length",
        source: "length.pl",
        mode: Mode::Demand,
        paper: "length []     = 0
length (x:xs) = length xs + 1",
    },
    Case {
        golden: "fac",
        source: "fac.pl",
        mode: Mode::Demand,
        paper: "fac n = if n == 0 then 1 else fac (n - 1) * n",
    },
    Case {
        golden: "two",
        source: "two.pl",
        mode: Mode::Demand,
        paper: "two = S (S O)",
    },
];

pub fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("goldens")
}

pub fn render(c: &Case) -> String {
    let p = parse_program_file(&dir().join(c.source)).unwrap();
    let t = transform_program(&p, &default_respos(&p, c.mode), TransformMode::new(c.mode)).unwrap();
    emit_program(&t.program, &EmitOptions { prologue: false, data_decl: false })
}

pub fn expected(c: &Case) -> String {
    std::fs::read_to_string(dir().join(format!("{}.curry", c.golden))).unwrap()
}

pub fn squeeze(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}
