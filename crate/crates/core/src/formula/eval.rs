//! Formula evaluation.
//!
//! Every argument of every call is evaluated (no short-circuiting), so a
//! formula reads exactly the cells [`extract_references`] reports. Errors
//! propagate left to right; the only place an error is dropped is the branch
//! of `IF` that was not chosen.
//!
//! [`extract_references`]: super::extract_references

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::ast::{BinaryOp, Expr, Function};
use crate::address::{CellAddress, CellRange};
use crate::value::{ComputedValue, ErrorCode};

/// Read access to evaluated cell values. `None` is an empty cell.
pub trait CellValues {
    fn value(&self, addr: CellAddress) -> Option<ComputedValue>;

    /// Calls `f` for each non-empty cell in `range`, row-major.
    fn for_each_in_range(&self, range: CellRange, f: &mut dyn FnMut(ComputedValue)) {
        for addr in range.iter() {
            if let Some(v) = self.value(addr) {
                f(v);
            }
        }
    }
}

impl<F> CellValues for F
where
    F: Fn(CellAddress) -> Option<ComputedValue>,
{
    fn value(&self, addr: CellAddress) -> Option<ComputedValue> {
        self(addr)
    }
}

/// A literal a `COUNTIF` compares cells against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Criterion {
    Num(f64),
    Str(String),
}

impl Criterion {
    fn matches(&self, v: &ComputedValue) -> bool {
        match (self, v) {
            (Criterion::Num(c), ComputedValue::Num(n)) => c == n,
            (Criterion::Str(c), ComputedValue::Str(s)) => c == s,
            _ => false,
        }
    }
}

/// Range aggregates shared by the formula functions and the analytics jobs.
#[derive(Debug, Clone, PartialEq)]
pub enum Aggregate {
    Sum,
    Average,
    Min,
    Max,
    Count,
    CountIf(Criterion),
}

/// Folds operands into an aggregate result.
///
/// Cells coming from ranges and references skip text; scalar text operands
/// are a `#VALUE!` for the numeric aggregates. The first error seen wins.
#[derive(Debug)]
pub struct Accumulator {
    kind: Aggregate,
    sum: f64,
    count: u64,
    min: f64,
    max: f64,
    error: Option<ErrorCode>,
}

impl Accumulator {
    pub fn new(kind: Aggregate) -> Self {
        Self { kind, sum: 0.0, count: 0, min: f64::INFINITY, max: f64::NEG_INFINITY, error: None }
    }

    fn take_number(&mut self, n: f64) {
        self.sum += n;
        self.count += 1;
        self.min = self.min.min(n);
        self.max = self.max.max(n);
    }

    /// A non-empty cell read through a range or reference.
    pub fn push_cell(&mut self, v: ComputedValue) {
        if self.error.is_some() {
            return;
        }
        match (&self.kind, v) {
            (_, ComputedValue::Err(e)) => self.error = Some(e),
            (Aggregate::CountIf(c), v) => {
                if c.matches(&v) {
                    self.count += 1;
                }
            }
            (_, ComputedValue::Num(n)) => self.take_number(n),
            (_, ComputedValue::Str(_)) => {}
        }
    }

    /// A value produced by an expression argument.
    pub fn push_scalar(&mut self, v: ComputedValue) {
        if self.error.is_some() {
            return;
        }
        match (&self.kind, v) {
            (_, ComputedValue::Err(e)) => self.error = Some(e),
            (_, ComputedValue::Num(n)) => self.take_number(n),
            (Aggregate::Count, ComputedValue::Str(_)) => {}
            (_, ComputedValue::Str(_)) => self.error = Some(ErrorCode::Value),
        }
    }

    pub fn finish(self) -> ComputedValue {
        if let Some(e) = self.error {
            return ComputedValue::Err(e);
        }
        match self.kind {
            Aggregate::Sum => ComputedValue::number(self.sum),
            Aggregate::Average if self.count == 0 => ComputedValue::Err(ErrorCode::Div0),
            Aggregate::Average => ComputedValue::number(self.sum / self.count as f64),
            Aggregate::Min if self.count == 0 => ComputedValue::Num(0.0),
            Aggregate::Min => ComputedValue::number(self.min),
            Aggregate::Max if self.count == 0 => ComputedValue::Num(0.0),
            Aggregate::Max => ComputedValue::number(self.max),
            Aggregate::Count | Aggregate::CountIf(_) => ComputedValue::Num(self.count as f64),
        }
    }
}

/// Evaluates `expr` against `cells`. Never fails; problems become error values.
pub fn evaluate_formula(expr: &Expr, cells: &dyn CellValues) -> ComputedValue {
    Evaluator { cells }.scalar(expr)
}

struct Evaluator<'a> {
    cells: &'a dyn CellValues,
}

fn err(e: ErrorCode) -> ComputedValue {
    ComputedValue::Err(e)
}

impl Evaluator<'_> {
    fn scalar(&self, expr: &Expr) -> ComputedValue {
        match expr {
            Expr::Num(n) => ComputedValue::Num(*n),
            Expr::Str(s) => ComputedValue::Str(s.clone()),
            Expr::Ref(a) => self.cells.value(*a).unwrap_or(ComputedValue::Num(0.0)),
            Expr::BadRef => err(ErrorCode::Ref),
            // A range outside an aggregate: read it, then reject it.
            Expr::Range(r) => {
                let mut first_err = None;
                self.cells.for_each_in_range(*r, &mut |v| {
                    if let (None, ComputedValue::Err(e)) = (first_err, v) {
                        first_err = Some(e);
                    }
                });
                err(first_err.unwrap_or(ErrorCode::Value))
            }
            Expr::Neg(inner) => match self.scalar(inner) {
                ComputedValue::Num(n) => ComputedValue::number(-n),
                ComputedValue::Str(_) => err(ErrorCode::Value),
                e => e,
            },
            Expr::Binary(op, l, r) => binary(*op, self.scalar(l), self.scalar(r)),
            Expr::Call(func, args) => self.call(func, args),
        }
    }

    fn call(&self, func: &Function, args: &[Expr]) -> ComputedValue {
        let aggregate = match func {
            Function::Sum => Some(Aggregate::Sum),
            Function::Average => Some(Aggregate::Average),
            Function::Min => Some(Aggregate::Min),
            Function::Max => Some(Aggregate::Max),
            Function::Count => Some(Aggregate::Count),
            _ => None,
        };
        match (func, args) {
            (_, []) if aggregate.is_some() => err(ErrorCode::Value),
            (_, _) if aggregate.is_some() => {
                let mut acc = Accumulator::new(aggregate.expect("checked"));
                for arg in args {
                    self.feed(&mut acc, arg);
                }
                acc.finish()
            }
            (Function::CountIf, [target @ (Expr::Range(_) | Expr::Ref(_)), criterion]) => {
                let criterion = self.scalar(criterion);
                let literal = match &criterion {
                    ComputedValue::Num(n) => Criterion::Num(*n),
                    ComputedValue::Str(s) => Criterion::Str(s.clone()),
                    // placeholder that matches nothing; the error is reported below
                    ComputedValue::Err(_) => Criterion::Num(f64::NAN),
                };
                let mut acc = Accumulator::new(Aggregate::CountIf(literal));
                self.feed(&mut acc, target);
                match (acc.finish(), criterion) {
                    (e @ ComputedValue::Err(_), _) => e,
                    (_, e @ ComputedValue::Err(_)) => e,
                    (count, _) => count,
                }
            }
            (Function::If, [cond, then, otherwise]) => {
                let (cond, then, otherwise) = (self.scalar(cond), self.scalar(then), self.scalar(otherwise));
                match cond {
                    ComputedValue::Num(n) if n != 0.0 => then,
                    ComputedValue::Num(_) => otherwise,
                    // a failed condition is reported as VALUE, not passed through
                    ComputedValue::Str(_) | ComputedValue::Err(_) => err(ErrorCode::Value),
                }
            }
            // Unknown names and wrong arities: evaluate everything, surface the
            // first error, otherwise report the call itself.
            (func, args) => {
                let first_err = args.iter().map(|a| self.scalar(a)).find(ComputedValue::is_err);
                first_err.unwrap_or(match func {
                    Function::Unknown(_) => err(ErrorCode::Name),
                    _ => err(ErrorCode::Value),
                })
            }
        }
    }

    fn feed(&self, acc: &mut Accumulator, arg: &Expr) {
        match arg {
            Expr::Range(r) => self.cells.for_each_in_range(*r, &mut |v| acc.push_cell(v)),
            Expr::Ref(a) => {
                if let Some(v) = self.cells.value(*a) {
                    acc.push_cell(v);
                }
            }
            other => acc.push_scalar(self.scalar(other)),
        }
    }
}

fn binary(op: BinaryOp, left: ComputedValue, right: ComputedValue) -> ComputedValue {
    use ComputedValue::{Num, Str};
    match (left, right) {
        (e @ ComputedValue::Err(_), _) | (_, e @ ComputedValue::Err(_)) => e,
        (Num(a), Num(b)) => match op {
            BinaryOp::Add => ComputedValue::number(a + b),
            BinaryOp::Sub => ComputedValue::number(a - b),
            BinaryOp::Mul => ComputedValue::number(a * b),
            BinaryOp::Div if b == 0.0 => err(ErrorCode::Div0),
            BinaryOp::Div => ComputedValue::number(a / b),
            BinaryOp::Pow if a == 0.0 && b < 0.0 => err(ErrorCode::Div0),
            BinaryOp::Pow => ComputedValue::number(a.powf(b)),
            cmp => compare(cmp, a.partial_cmp(&b).expect("finite")),
        },
        (Str(a), Str(b)) if op.is_comparison() => compare(op, a.cmp(&b)),
        // mixed kinds are never equal and cannot be ordered
        (_, _) => match op {
            BinaryOp::Eq => Num(0.0),
            BinaryOp::Ne => Num(1.0),
            _ => err(ErrorCode::Value),
        },
    }
}

fn compare(op: BinaryOp, ord: Ordering) -> ComputedValue {
    let truth = match op {
        BinaryOp::Lt => ord.is_lt(),
        BinaryOp::Le => ord.is_le(),
        BinaryOp::Gt => ord.is_gt(),
        BinaryOp::Ge => ord.is_ge(),
        BinaryOp::Eq => ord.is_eq(),
        BinaryOp::Ne => ord.is_ne(),
        _ => unreachable!("not a comparison"),
    };
    ComputedValue::Num(if truth { 1.0 } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::formula::parse_formula;

    fn eval_with(src: &str, cells: &[(&str, ComputedValue)]) -> ComputedValue {
        let map: HashMap<CellAddress, ComputedValue> =
            cells.iter().map(|(a, v)| (a.parse().unwrap(), v.clone())).collect();
        let lookup = |a: CellAddress| map.get(&a).cloned();
        evaluate_formula(&parse_formula(src).unwrap(), &lookup)
    }

    fn eval(src: &str) -> ComputedValue {
        eval_with(src, &[])
    }

    fn num(n: f64) -> ComputedValue {
        ComputedValue::Num(n)
    }

    fn s(t: &str) -> ComputedValue {
        ComputedValue::Str(t.into())
    }

    #[test]
    fn sum_over_range() {
        assert_eq!(eval_with("SUM(B1:B3)", &[("B1", num(1.0)), ("B2", num(2.0)), ("B3", num(3.0))]), num(6.0));
    }

    #[test]
    fn marks_percentage() {
        assert_eq!(eval("24/30*100"), num(80.0));
    }

    #[test]
    fn countif_attendance() {
        let column = [("C1", s("P")), ("C2", s("A")), ("C3", s("P")), ("C4", s("P")), ("C5", s("A"))];
        assert_eq!(eval_with("COUNTIF(C1:C5,\"P\")", &column), num(3.0));
        assert_eq!(eval_with("COUNTIF(C1:C5,\"A\")", &column), num(2.0));
        assert_eq!(eval_with("COUNTIF(C1:C5,\"p\")", &column), num(0.0));
    }

    #[test]
    fn error_values() {
        assert_eq!(eval("1/0"), err(ErrorCode::Div0));
        assert_eq!(eval("FOO(1)"), err(ErrorCode::Name));
        assert_eq!(eval("FOO(1/0)"), err(ErrorCode::Div0));
        assert_eq!(eval("\"a\"+1"), err(ErrorCode::Value));
        assert_eq!(eval("0^-1"), err(ErrorCode::Div0));
        assert_eq!(eval("(0-8)^0.5"), err(ErrorCode::Value));
        assert_eq!(eval("10^400"), err(ErrorCode::Value));
        assert_eq!(eval("A0"), err(ErrorCode::Ref));
        assert_eq!(eval("1/0+FOO()"), err(ErrorCode::Div0));
        assert_eq!(eval("FOO()+1/0"), err(ErrorCode::Name));
    }

    #[test]
    fn negation_and_power() {
        assert_eq!(eval("-2^2"), num(-4.0));
        assert_eq!(eval("2^3^2"), num(512.0));
        assert_eq!(eval("--3"), num(3.0));
    }

    #[test]
    fn comparisons() {
        assert_eq!(eval("1<2"), num(1.0));
        assert_eq!(eval("2<=1"), num(0.0));
        assert_eq!(eval("\"a\"<\"b\""), num(1.0));
        assert_eq!(eval("\"a\"=1"), num(0.0));
        assert_eq!(eval("\"a\"<>1"), num(1.0));
        assert_eq!(eval("\"a\"<1"), err(ErrorCode::Value));
        assert_eq!(eval("A1=0"), num(1.0));
    }

    #[test]
    fn empty_coerces_to_zero_but_is_skipped_by_aggregates() {
        assert_eq!(eval("A1+1"), num(1.0));
        assert_eq!(eval("A1"), num(0.0));
        assert_eq!(eval_with("COUNT(A1:A3)", &[("A2", num(4.0))]), num(1.0));
        assert_eq!(eval_with("AVERAGE(A1:A3)", &[("A2", num(4.0))]), num(4.0));
        assert_eq!(eval("AVERAGE(A1:A3)"), err(ErrorCode::Div0));
        assert_eq!(eval("COUNT(A1:A3)"), num(0.0));
        assert_eq!(eval("SUM(A1:A3)"), num(0.0));
    }

    #[test]
    fn text_in_ranges_is_skipped_but_text_scalars_are_not() {
        let cells = [("E2", num(24.0)), ("E3", s("NOT YET OUT")), ("E4", num(33.0))];
        assert_eq!(eval_with("AVERAGE(E2:E4)", &cells), num(28.5));
        assert_eq!(eval_with("SUM(E3)", &cells), num(0.0));
        assert_eq!(eval("SUM(\"x\")"), err(ErrorCode::Value));
        assert_eq!(eval("COUNT(\"x\",1,2)"), num(2.0));
        assert_eq!(eval_with("MIN(E2:E4)", &cells), num(24.0));
        assert_eq!(eval_with("MAX(E2:E4,40)", &cells), num(40.0));
        assert_eq!(eval("MAX(A1:A2)"), num(0.0));
    }

    #[test]
    fn errors_inside_ranges_propagate() {
        let cells = [("A1", num(1.0)), ("A2", err(ErrorCode::Ref)), ("A3", err(ErrorCode::Div0))];
        assert_eq!(eval_with("SUM(A1:A3)", &cells), err(ErrorCode::Ref));
        assert_eq!(eval_with("COUNTIF(A1:A3,1)", &cells), err(ErrorCode::Ref));
        assert_eq!(eval("COUNTIF(A1:A3,1/0)"), err(ErrorCode::Div0));
    }

    #[test]
    fn if_picks_a_branch() {
        assert_eq!(eval("IF(1,2,3)"), num(2.0));
        assert_eq!(eval("IF(0,2,3)"), num(3.0));
        assert_eq!(eval("IF(1,2,1/0)"), num(2.0));
        assert_eq!(eval("IF(\"x\",2,3)"), err(ErrorCode::Value));
        assert_eq!(eval("IF(1/0,2,3)"), err(ErrorCode::Value));
        assert_eq!(eval("IF(1,2)"), err(ErrorCode::Value));
        assert_eq!(eval("IF(A1:A2,1,2)"), err(ErrorCode::Value));
    }

    #[test]
    fn countif_argument_shapes() {
        assert_eq!(eval_with("COUNTIF(A1,5)", &[("A1", num(5.0))]), num(1.0));
        assert_eq!(eval("COUNTIF(5,5)"), err(ErrorCode::Value));
        assert_eq!(eval("COUNTIF(A1:A2)"), err(ErrorCode::Value));
        assert_eq!(eval("COUNTIF(A1:A2,0)"), num(0.0));
    }
}
