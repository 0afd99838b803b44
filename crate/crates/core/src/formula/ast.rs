use std::collections::BTreeSet;

use crate::address::{CellAddress, CellRange};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl BinaryOp {
    pub fn is_comparison(self) -> bool {
        matches!(self, BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge | BinaryOp::Eq | BinaryOp::Ne)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Eq => "=",
            BinaryOp::Ne => "<>",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Function {
    Sum,
    Average,
    Min,
    Max,
    Count,
    CountIf,
    If,
    /// Any other name, uppercased. Evaluates to `#NAME?`.
    Unknown(String),
}

impl Function {
    pub fn from_name(name: &str) -> Self {
        let upper = name.to_ascii_uppercase();
        match upper.as_str() {
            "SUM" => Function::Sum,
            "AVERAGE" => Function::Average,
            "MIN" => Function::Min,
            "MAX" => Function::Max,
            "COUNT" => Function::Count,
            "COUNTIF" => Function::CountIf,
            "IF" => Function::If,
            _ => Function::Unknown(upper),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Function::Sum => "SUM",
            Function::Average => "AVERAGE",
            Function::Min => "MIN",
            Function::Max => "MAX",
            Function::Count => "COUNT",
            Function::CountIf => "COUNTIF",
            Function::If => "IF",
            Function::Unknown(name) => name,
        }
    }
}

/// Parsed formula. `Range` only ever appears as a direct `Call` argument.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Str(String),
    Ref(CellAddress),
    Range(CellRange),
    /// A reference (or range endpoint) outside the grid.
    BadRef,
    Neg(Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Call(Function, Vec<Expr>),
}

impl Expr {
    /// Visits every direct reference and every range, without expanding ranges.
    pub fn visit_refs(&self, f: &mut impl FnMut(RefTarget)) {
        match self {
            Expr::Num(_) | Expr::Str(_) | Expr::BadRef => {}
            Expr::Ref(a) => f(RefTarget::Cell(*a)),
            Expr::Range(r) => f(RefTarget::Range(*r)),
            Expr::Neg(e) => e.visit_refs(f),
            Expr::Binary(_, l, r) => {
                l.visit_refs(f);
                r.visit_refs(f);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.visit_refs(f)),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum RefTarget {
    Cell(CellAddress),
    Range(CellRange),
}

/// Every address the formula reads, with ranges expanded.
pub fn extract_references(expr: &Expr) -> BTreeSet<CellAddress> {
    let mut out = BTreeSet::new();
    expr.visit_refs(&mut |target| match target {
        RefTarget::Cell(a) => {
            out.insert(a);
        }
        RefTarget::Range(r) => out.extend(r.iter()),
    });
    out
}
