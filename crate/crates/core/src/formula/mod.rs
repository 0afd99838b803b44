//! The formula language: parsing, evaluation and whole-sheet recalculation.

mod ast;
mod eval;
mod parser;
mod recalc;

pub use ast::{extract_references, BinaryOp, Expr, Function, RefTarget};
pub use eval::{evaluate_formula, Accumulator, Aggregate, CellValues, Criterion};
pub use parser::{parse_formula, ParseError};
pub use recalc::{recalculate_sheet, DependencyGraph, RecalcStats};
