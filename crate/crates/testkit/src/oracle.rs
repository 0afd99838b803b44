//! Random formulas and a direct recursive interpreter for them.
//!
//! Formulas are generated as a private tree, rendered to text, and evaluated
//! here without going through the engine's parser or evaluator. The engine
//! parses the rendered text; both results must agree.

use std::collections::{BTreeSet, HashMap};

use gridmesh_core::{ComputedValue, ErrorCode};
use rand::seq::SliceRandom;
use rand::Rng;

/// 1-based `(col, row)`, like the grid.
pub type Pos = (u32, u32);

#[derive(Debug, Clone)]
pub enum GenExpr {
    Num(f64),
    Str(String),
    Ref(Pos),
    /// Text of a reference outside the grid.
    BadRef(&'static str),
    Neg(Box<GenExpr>),
    Bin(&'static str, Box<GenExpr>, Box<GenExpr>),
    Call(String, Vec<GenArg>),
}

#[derive(Debug, Clone)]
pub enum GenArg {
    Expr(GenExpr),
    Range(Pos, Pos),
}

const OPS: [&str; 11] = ["+", "-", "*", "/", "^", "=", "<>", "<", "<=", ">", ">="];
const FUNCS: [&str; 8] = ["SUM", "AVERAGE", "MIN", "MAX", "COUNT", "COUNTIF", "IF", "FOO"];

pub fn label(mut col: u32) -> String {
    let mut out = Vec::new();
    while col > 0 {
        let digit = (col - 1) % 26;
        out.push(b'A' + digit as u8);
        col = (col - 1) / 26;
    }
    out.reverse();
    String::from_utf8(out).unwrap()
}

/// Generates formulas over the block `A1` .. `(cols, rows)`.
pub struct FormulaGen {
    pub cols: u32,
    pub rows: u32,
    pub max_depth: u32,
}

impl FormulaGen {
    fn pos(&self, rng: &mut impl Rng) -> Pos {
        (rng.gen_range(1..=self.cols), rng.gen_range(1..=self.rows))
    }

    fn leaf(&self, rng: &mut impl Rng) -> GenExpr {
        match rng.gen_range(0..20) {
            0..=6 => GenExpr::Num(*[0.0, 1.0, 2.0, 3.0, 0.5, 10.0, 0.1, 7.0, 1e300].choose(rng).unwrap()),
            7..=9 => GenExpr::Str(["", "a", "b", "P", "x\"y"].choose(rng).unwrap().to_string()),
            10 => GenExpr::BadRef(["A0", "ZZZ1", "B100001"].choose(rng).unwrap()),
            _ => GenExpr::Ref(self.pos(rng)),
        }
    }

    pub fn expr(&self, rng: &mut impl Rng, depth: u32) -> GenExpr {
        if depth >= self.max_depth || rng.gen_bool(0.3) {
            return self.leaf(rng);
        }
        match rng.gen_range(0..10) {
            0 => GenExpr::Neg(Box::new(self.expr(rng, depth + 1))),
            1..=5 => GenExpr::Bin(
                OPS.choose(rng).unwrap(),
                Box::new(self.expr(rng, depth + 1)),
                Box::new(self.expr(rng, depth + 1)),
            ),
            _ => self.call(rng, depth),
        }
    }

    fn range(&self, rng: &mut impl Rng) -> GenArg {
        GenArg::Range(self.pos(rng), self.pos(rng))
    }

    fn arg(&self, rng: &mut impl Rng, depth: u32) -> GenArg {
        if rng.gen_bool(0.4) {
            self.range(rng)
        } else {
            GenArg::Expr(self.expr(rng, depth + 1))
        }
    }

    fn call(&self, rng: &mut impl Rng, depth: u32) -> GenExpr {
        let name = *FUNCS.choose(rng).unwrap();
        let well_formed = rng.gen_bool(0.85);
        let args = match (name, well_formed) {
            ("COUNTIF", true) => {
                let target = if rng.gen_bool(0.8) { self.range(rng) } else { GenArg::Expr(GenExpr::Ref(self.pos(rng))) };
                let criterion = match rng.gen_range(0..3) {
                    0 => GenExpr::Num(*[0.0, 1.0, 2.0, 3.0].choose(rng).unwrap()),
                    1 => GenExpr::Str(["a", "P", ""].choose(rng).unwrap().to_string()),
                    _ => self.expr(rng, depth + 1),
                };
                vec![target, GenArg::Expr(criterion)]
            }
            ("IF", true) => (0..3).map(|_| GenArg::Expr(self.expr(rng, depth + 1))).collect(),
            (_, true) => (0..rng.gen_range(1..=3)).map(|_| self.arg(rng, depth)).collect(),
            (_, false) => (0..rng.gen_range(0..=4)).map(|_| self.arg(rng, depth)).collect(),
        };
        let name = if rng.gen_bool(0.2) { name.to_lowercase() } else { name.to_string() };
        GenExpr::Call(name, args)
    }
}

fn render_pos((c, r): Pos) -> String {
    format!("{}{}", label(c), r)
}

pub fn render(e: &GenExpr) -> String {
    match e {
        GenExpr::Num(n) => format!("{n}"),
        GenExpr::Str(s) => format!("\"{}\"", s.replace('"', "\"\"")),
        GenExpr::Ref(p) => render_pos(*p),
        GenExpr::BadRef(t) => t.to_string(),
        GenExpr::Neg(x) => format!("-({})", render(x)),
        GenExpr::Bin(op, l, r) => format!("({}){op}({})", render(l), render(r)),
        GenExpr::Call(name, args) => {
            let args: Vec<String> = args
                .iter()
                .map(|a| match a {
                    GenArg::Expr(x) => render(x),
                    GenArg::Range(a, b) => format!("{}:{}", render_pos(*a), render_pos(*b)),
                })
                .collect();
            format!("{name}({})", args.join(","))
        }
    }
}

/// Reference interpreter. Records every cell it reads.
pub struct Oracle<'a> {
    pub cells: &'a HashMap<Pos, ComputedValue>,
    pub touched: BTreeSet<Pos>,
}

fn fin(n: f64) -> ComputedValue {
    if !n.is_finite() {
        ComputedValue::Err(ErrorCode::Value)
    } else if n == 0.0 {
        ComputedValue::Num(0.0)
    } else {
        ComputedValue::Num(n)
    }
}

enum Operand {
    Cell(ComputedValue),
    Scalar(ComputedValue),
}

impl<'a> Oracle<'a> {
    pub fn new(cells: &'a HashMap<Pos, ComputedValue>) -> Self {
        Self { cells, touched: BTreeSet::new() }
    }

    fn read(&mut self, p: Pos) -> Option<ComputedValue> {
        self.touched.insert(p);
        self.cells.get(&p).cloned()
    }

    fn read_range(&mut self, a: Pos, b: Pos) -> Vec<ComputedValue> {
        let mut out = Vec::new();
        for row in a.1.min(b.1)..=a.1.max(b.1) {
            for col in a.0.min(b.0)..=a.0.max(b.0) {
                out.extend(self.read((col, row)));
            }
        }
        out
    }

    pub fn eval(&mut self, e: &GenExpr) -> ComputedValue {
        use ComputedValue::{Err, Num, Str};
        match e {
            GenExpr::Num(n) => Num(*n),
            GenExpr::Str(s) => Str(s.clone()),
            GenExpr::Ref(p) => self.read(*p).unwrap_or(Num(0.0)),
            GenExpr::BadRef(_) => Err(ErrorCode::Ref),
            GenExpr::Neg(x) => match self.eval(x) {
                Num(n) => fin(-n),
                Str(_) => Err(ErrorCode::Value),
                err => err,
            },
            GenExpr::Bin(op, l, r) => {
                let (l, r) = (self.eval(l), self.eval(r));
                binary(op, l, r)
            }
            GenExpr::Call(name, args) => self.call(&name.to_uppercase(), args),
        }
    }

    fn arg_scalar(&mut self, a: &GenArg) -> ComputedValue {
        match a {
            GenArg::Expr(x) => self.eval(x),
            GenArg::Range(p, q) => {
                let vals = self.read_range(*p, *q);
                let first_err = vals.into_iter().find(|v| matches!(v, ComputedValue::Err(_)));
                first_err.unwrap_or(ComputedValue::Err(ErrorCode::Value))
            }
        }
    }

    fn operands(&mut self, a: &GenArg) -> Vec<Operand> {
        match a {
            GenArg::Range(p, q) => self.read_range(*p, *q).into_iter().map(Operand::Cell).collect(),
            GenArg::Expr(GenExpr::Ref(p)) => self.read(*p).into_iter().map(Operand::Cell).collect(),
            GenArg::Expr(x) => vec![Operand::Scalar(self.eval(x))],
        }
    }

    fn call(&mut self, name: &str, args: &[GenArg]) -> ComputedValue {
        use ComputedValue::{Err, Num, Str};
        let aggregate = matches!(name, "SUM" | "AVERAGE" | "MIN" | "MAX" | "COUNT");
        if aggregate && !args.is_empty() {
            let ops: Vec<Operand> = args.iter().flat_map(|a| self.operands(a)).collect();
            let mut nums = Vec::new();
            for op in ops {
                match op {
                    Operand::Cell(Err(e)) | Operand::Scalar(Err(e)) => return Err(e),
                    Operand::Cell(Num(n)) | Operand::Scalar(Num(n)) => nums.push(n),
                    Operand::Cell(Str(_)) => {}
                    Operand::Scalar(Str(_)) if name == "COUNT" => {}
                    Operand::Scalar(Str(_)) => return Err(ErrorCode::Value),
                }
            }
            let sum = nums.iter().fold(0.0, |acc, n| acc + n);
            return match name {
                "SUM" => fin(sum),
                "AVERAGE" if nums.is_empty() => Err(ErrorCode::Div0),
                "AVERAGE" => fin(sum / nums.len() as f64),
                "MIN" if nums.is_empty() => Num(0.0),
                "MIN" => fin(nums.iter().cloned().fold(f64::INFINITY, f64::min)),
                "MAX" if nums.is_empty() => Num(0.0),
                "MAX" => fin(nums.iter().cloned().fold(f64::NEG_INFINITY, f64::max)),
                _ => Num(nums.len() as f64),
            };
        }
        match (name, args) {
            ("COUNTIF", [target @ (GenArg::Range(..) | GenArg::Expr(GenExpr::Ref(_))), criterion]) => {
                let criterion = self.arg_scalar(criterion);
                let cells: Vec<ComputedValue> = match target {
                    GenArg::Range(p, q) => self.read_range(*p, *q),
                    GenArg::Expr(GenExpr::Ref(p)) => self.read(*p).into_iter().collect(),
                    _ => unreachable!(),
                };
                if let Some(e) = cells.iter().find(|v| matches!(v, Err(_))) {
                    return e.clone();
                }
                let hits = cells
                    .iter()
                    .filter(|v| match (&criterion, v) {
                        (Num(c), Num(n)) => c == n,
                        (Str(c), Str(s)) => c == s,
                        _ => false,
                    })
                    .count();
                match criterion {
                    Err(e) => Err(e),
                    _ => Num(hits as f64),
                }
            }
            ("IF", [c, t, f]) => {
                let (c, t, f) = (self.arg_scalar(c), self.arg_scalar(t), self.arg_scalar(f));
                match c {
                    Num(n) if n != 0.0 => t,
                    Num(_) => f,
                    _ => Err(ErrorCode::Value),
                }
            }
            _ => {
                let vals: Vec<ComputedValue> = args.iter().map(|a| self.arg_scalar(a)).collect();
                let known = matches!(name, "SUM" | "AVERAGE" | "MIN" | "MAX" | "COUNT" | "COUNTIF" | "IF");
                vals.into_iter()
                    .find(|v| matches!(v, Err(_)))
                    .unwrap_or(Err(if known { ErrorCode::Value } else { ErrorCode::Name }))
            }
        }
    }
}

fn binary(op: &str, l: ComputedValue, r: ComputedValue) -> ComputedValue {
    use ComputedValue::{Err, Num, Str};
    let truth = |b: bool| Num(if b { 1.0 } else { 0.0 });
    match (l, r) {
        (Err(e), _) | (_, Err(e)) => Err(e),
        (Num(a), Num(b)) => match op {
            "+" => fin(a + b),
            "-" => fin(a - b),
            "*" => fin(a * b),
            "/" if b == 0.0 => Err(ErrorCode::Div0),
            "/" => fin(a / b),
            "^" if a == 0.0 && b < 0.0 => Err(ErrorCode::Div0),
            "^" => fin(a.powf(b)),
            "=" => truth(a == b),
            "<>" => truth(a != b),
            "<" => truth(a < b),
            "<=" => truth(a <= b),
            ">" => truth(a > b),
            _ => truth(a >= b),
        },
        (Str(a), Str(b)) => match op {
            "=" => truth(a == b),
            "<>" => truth(a != b),
            "<" => truth(a < b),
            "<=" => truth(a <= b),
            ">" => truth(a > b),
            ">=" => truth(a >= b),
            _ => Err(ErrorCode::Value),
        },
        _ => match op {
            "=" => Num(0.0),
            "<>" => Num(1.0),
            _ => Err(ErrorCode::Value),
        },
    }
}

/// Exact for text and errors, relative `tol` for numbers.
pub fn values_agree(a: &ComputedValue, b: &ComputedValue, tol: f64) -> bool {
    match (a, b) {
        (ComputedValue::Num(x), ComputedValue::Num(y)) => {
            x == y || (x - y).abs() <= tol * x.abs().max(y.abs())
        }
        _ => a == b,
    }
}

/// A random evaluated cell: number, text, error, or (when `allow_empty`) nothing.
pub fn random_value(rng: &mut impl Rng, allow_empty: bool) -> Option<ComputedValue> {
    let roll = rng.gen_range(if allow_empty { 0 } else { 2 }..20);
    match roll {
        0..=1 => None,
        2..=11 => Some(ComputedValue::Num(*[0.0, 1.0, 2.0, -3.0, 0.5, 4.25, 1e300, 3.0].choose(rng).unwrap())),
        12..=17 => Some(ComputedValue::Str(["", "a", "b", "P"].choose(rng).unwrap().to_string())),
        _ => Some(ComputedValue::Err(*[ErrorCode::Div0, ErrorCode::Ref, ErrorCode::Value].choose(rng).unwrap())),
    }
}

/// Every cell `e` mentions, ranges expanded.
pub fn references(e: &GenExpr) -> BTreeSet<Pos> {
    fn walk(e: &GenExpr, out: &mut BTreeSet<Pos>) {
        match e {
            GenExpr::Ref(p) => {
                out.insert(*p);
            }
            GenExpr::Neg(x) => walk(x, out),
            GenExpr::Bin(_, l, r) => {
                walk(l, out);
                walk(r, out);
            }
            GenExpr::Call(_, args) => {
                for a in args {
                    match a {
                        GenArg::Expr(x) => walk(x, out),
                        GenArg::Range(p, q) => {
                            for row in p.1.min(q.1)..=p.1.max(q.1) {
                                for col in p.0.min(q.0)..=p.0.max(q.0) {
                                    out.insert((col, row));
                                }
                            }
                        }
                    }
                }
            }
            GenExpr::Num(_) | GenExpr::Str(_) | GenExpr::BadRef(_) => {}
        }
    }
    let mut out = BTreeSet::new();
    walk(e, &mut out);
    out
}
