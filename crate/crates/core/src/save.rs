//! Save strings: the canonical text form of a sheet.
//!
//! ```text
//! socialcalc-save 1 <sheet-name>
//! cell <ADDR> value n <number>
//! cell <ADDR> text t <text-to-end-of-line>
//! cell <ADDR> formula <formula-source-to-end-of-line>
//! ```
//!
//! Cells are written in row-major order, every line ends in `\n`, and
//! numbers use the shortest decimal that reads back to the same value.

use std::fmt::Write as _;

use thiserror::Error;

use crate::address::CellAddress;
use crate::formula::recalculate_sheet;
use crate::sheet::{CellContent, Sheet, SheetName};

pub const HEADER_PREFIX: &str = "socialcalc-save 1 ";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SaveError {
    #[error("missing or malformed save-string header")]
    BadHeader,
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
}

/// Formats a finite number as its shortest round-trip decimal (`5`, `0.1`).
/// Negative zero prints as `0`.
pub fn format_number(n: f64) -> String {
    format!("{}", n + 0.0)
}

/// Parses a finite decimal number; rejects `inf`, `NaN` and overflow.
pub fn parse_number(text: &str) -> Option<f64> {
    let n: f64 = text.parse().ok()?;
    n.is_finite().then_some(n)
}

pub fn serialize_sheet(sheet: &Sheet) -> String {
    let mut out = String::with_capacity(24 + sheet.len() * 24);
    out.push_str(HEADER_PREFIX);
    out.push_str(sheet.name().as_str());
    out.push('\n');
    for (addr, content) in sheet.cells() {
        let _ = match content {
            CellContent::Number(n) => writeln!(out, "cell {addr} value n {}", format_number(*n)),
            CellContent::Text(t) => writeln!(out, "cell {addr} text t {t}"),
            CellContent::Formula(f) => writeln!(out, "cell {addr} formula {}", f.source()),
            CellContent::Empty => unreachable!("empty cells are never stored"),
        };
    }
    out
}

/// Parses a single `cell ...` line into its address and content.
pub(crate) fn parse_cell_line(line: &str) -> Result<(CellAddress, CellContent), String> {
    let rest = line.strip_prefix("cell ").ok_or("expected `cell`")?;
    let (addr, rest) = rest.split_once(' ').ok_or("missing cell kind")?;
    let addr: CellAddress = addr.parse().map_err(|e| format!("{e}"))?;
    let content = if let Some(n) = rest.strip_prefix("value n ") {
        CellContent::Number(parse_number(n).ok_or_else(|| format!("bad number {n:?}"))?)
    } else if let Some(t) = rest.strip_prefix("text t ") {
        CellContent::text(t)
    } else if let Some(f) = rest.strip_prefix("formula ") {
        CellContent::formula(f).map_err(|e| e.to_string())?
    } else {
        return Err(format!("unknown cell kind in {rest:?}"));
    };
    Ok((addr, content))
}

/// Parses a save string. Cell lines may come in any order; formulas are
/// recalculated after loading.
pub fn parse_save_string(text: &str) -> Result<Sheet, SaveError> {
    let mut lines = text.split_inclusive('\n').map(|l| l.strip_suffix('\n').unwrap_or(l));
    let header = lines.next().ok_or(SaveError::BadHeader)?;
    let name = header.strip_prefix(HEADER_PREFIX).ok_or(SaveError::BadHeader)?;
    let name = SheetName::new(name).map_err(|_| SaveError::BadHeader)?;
    let mut sheet = Sheet::new(name);
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let malformed = |reason: String| SaveError::MalformedLine { line: line_no, reason };
        let (addr, content) = parse_cell_line(line).map_err(malformed)?;
        if !sheet.get_cell(addr).is_empty() {
            return Err(malformed(format!("duplicate cell {addr}")));
        }
        sheet.set_cell(addr, content).map_err(|e| malformed(e.to_string()))?;
    }
    recalculate_sheet(&mut sheet);
    Ok(sheet)
}
