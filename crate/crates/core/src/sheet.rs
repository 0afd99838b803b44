//! The cell grid.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::address::{CellAddress, CellRange};
use crate::formula::{parse_formula, Expr, ParseError};
use crate::value::ComputedValue;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SheetError {
    #[error("malformed formula {source_text:?}: {error}")]
    MalformedFormula { source_text: String, error: ParseError },
    #[error("numbers must be finite")]
    NonFiniteNumber,
    #[error("text must be a single line without control characters")]
    InvalidText,
    #[error("bad sheet name {0:?}: 1-64 characters, no whitespace")]
    BadName(String),
}

/// Names for sheets, groups, usernames and snapshots: 1-64 characters with
/// no whitespace or control characters.
pub fn is_valid_name(name: &str) -> bool {
    let len = name.chars().count();
    (1..=64).contains(&len) && !name.chars().any(|c| c.is_whitespace() || c.is_control())
}

/// Text payloads are single-line and free of control characters.
pub fn is_valid_text(text: &str) -> bool {
    !text.chars().any(char::is_control)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SheetName(String);

impl SheetName {
    pub fn new(name: impl Into<String>) -> Result<Self, SheetError> {
        let name = name.into();
        if is_valid_name(&name) {
            Ok(Self(name))
        } else {
            Err(SheetError::BadName(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Default for SheetName {
    fn default() -> Self {
        Self("sheet".to_string())
    }
}

impl fmt::Display for SheetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for SheetName {
    type Error = SheetError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<SheetName> for String {
    fn from(name: SheetName) -> Self {
        name.0
    }
}

/// A parsed formula and its last computed value.
///
/// Equality compares source and cached value; the parse tree is derived.
#[derive(Debug, Clone)]
pub struct Formula {
    source: String,
    expr: Arc<Expr>,
    cached: ComputedValue,
}

impl Formula {
    pub fn new(source: impl Into<String>) -> Result<Self, SheetError> {
        let source = source.into();
        if source.trim().is_empty() || !is_valid_text(&source) {
            return Err(SheetError::MalformedFormula {
                error: ParseError::Syntax { position: 0, message: "empty or multi-line formula".into() },
                source_text: source,
            });
        }
        match parse_formula(&source) {
            Ok(expr) => Ok(Self { source, expr: Arc::new(expr), cached: ComputedValue::Num(0.0) }),
            Err(error) => Err(SheetError::MalformedFormula { source_text: source, error }),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    /// The value as of the last recalculation.
    pub fn cached(&self) -> &ComputedValue {
        &self.cached
    }

    pub(crate) fn set_cached(&mut self, value: ComputedValue) {
        self.cached = value;
    }
}

impl PartialEq for Formula {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source && self.cached == other.cached
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum CellContent {
    #[default]
    Empty,
    Number(f64),
    Text(String),
    Formula(Formula),
}

impl CellContent {
    /// Parses `source` into formula content.
    pub fn formula(source: impl Into<String>) -> Result<Self, SheetError> {
        Formula::new(source).map(CellContent::Formula)
    }

    pub fn text(text: impl Into<String>) -> Self {
        CellContent::Text(text.into())
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, CellContent::Empty)
    }

    /// What the cell evaluates to, or `None` when empty.
    pub fn value(&self) -> Option<ComputedValue> {
        match self {
            CellContent::Empty => None,
            CellContent::Number(n) => Some(ComputedValue::Num(*n)),
            CellContent::Text(t) => Some(ComputedValue::Str(t.clone())),
            CellContent::Formula(f) => Some(f.cached.clone()),
        }
    }

    fn validate(&self) -> Result<(), SheetError> {
        match self {
            CellContent::Number(n) if !n.is_finite() => Err(SheetError::NonFiniteNumber),
            CellContent::Text(t) if !is_valid_text(t) => Err(SheetError::InvalidText),
            _ => Ok(()),
        }
    }
}

static EMPTY: CellContent = CellContent::Empty;

/// A named grid of cells. Empty cells are never stored.
///
/// Mutating a cell does not recalculate; use
/// [`recalculate_sheet`](crate::formula::recalculate_sheet) or apply a
/// [`Command`](crate::command::Command), which does.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sheet {
    name: SheetName,
    cells: BTreeMap<CellAddress, CellContent>,
}

impl Sheet {
    pub fn new(name: SheetName) -> Self {
        Self { name, cells: BTreeMap::new() }
    }

    pub fn name(&self) -> &SheetName {
        &self.name
    }

    pub fn set_name(&mut self, name: SheetName) {
        self.name = name;
    }

    pub fn get_cell(&self, addr: CellAddress) -> &CellContent {
        self.cells.get(&addr).unwrap_or(&EMPTY)
    }

    /// Replaces a cell. Setting `Empty` removes it.
    pub fn set_cell(&mut self, addr: CellAddress, content: CellContent) -> Result<(), SheetError> {
        content.validate()?;
        match content {
            CellContent::Empty => {
                self.cells.remove(&addr);
            }
            // -0 and 0 serialize differently; store one of them
            CellContent::Number(n) if n == 0.0 => {
                self.cells.insert(addr, CellContent::Number(0.0));
            }
            content => {
                self.cells.insert(addr, content);
            }
        }
        Ok(())
    }

    /// Non-empty cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (CellAddress, &CellContent)> {
        self.cells.iter().map(|(a, c)| (*a, c))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Smallest rectangle containing every non-empty cell.
    pub fn used_range(&self) -> Option<CellRange> {
        let first = self.cells.keys().next()?;
        let last = self.cells.keys().next_back()?;
        let min_col = self.cells.keys().map(|a| a.col()).min()?;
        let max_col = self.cells.keys().map(|a| a.col()).max()?;
        Some(CellRange::new(
            CellAddress::new(min_col, first.row())?,
            CellAddress::new(max_col, last.row())?,
        ))
    }

    pub(crate) fn cells_mut(&mut self) -> &mut BTreeMap<CellAddress, CellContent> {
        &mut self.cells
    }

    pub(crate) fn cell_map(&self) -> &BTreeMap<CellAddress, CellContent> {
        &self.cells
    }
}
