//! A1-style cell addressing.
//!
//! Columns use bijective base-26 labels (`A`..`Z`, `AA`..`ZZ`), rows are
//! 1-based decimal numbers. Parsing is case-insensitive; formatting always
//! produces uppercase labels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Highest column index (`ZZ`).
pub const MAX_COL: u32 = 702;
/// Highest row index.
pub const MAX_ROW: u32 = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed cell address {0:?}")]
pub struct MalformedAddress(pub String);

/// A cell position inside the grid. Always within `1..=MAX_COL` x `1..=MAX_ROW`.
///
/// Ordering is row-major: all of row 1 sorts before row 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellAddress {
    col: u32,
    row: u32,
}

impl CellAddress {
    pub fn new(col: u32, row: u32) -> Option<Self> {
        ((1..=MAX_COL).contains(&col) && (1..=MAX_ROW).contains(&row)).then_some(Self { col, row })
    }

    pub fn col(self) -> u32 {
        self.col
    }

    pub fn row(self) -> u32 {
        self.row
    }

    pub fn parse(text: &str) -> Result<Self, MalformedAddress> {
        match split_address(text) {
            Some((col, row)) => Self::new(col, row).ok_or_else(|| MalformedAddress(text.to_string())),
            None => Err(MalformedAddress(text.to_string())),
        }
    }
}

/// Splits `letters digits` into raw (unchecked) column and row numbers.
///
/// Returns `None` for anything that is not shaped like an address. Values that
/// overflow are clamped to `u32::MAX` so callers can still tell "address-shaped
/// but out of range" apart from "not an address at all".
pub(crate) fn split_address(text: &str) -> Option<(u32, u32)> {
    let letters = text.bytes().take_while(u8::is_ascii_alphabetic).count();
    let (label, digits) = text.split_at(letters);
    if letters == 0 || digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let col = label.bytes().fold(0u32, |acc, b| {
        acc.saturating_mul(26)
            .saturating_add(u32::from(b.to_ascii_uppercase() - b'A' + 1))
    });
    let row = digits.parse::<u32>().unwrap_or(u32::MAX);
    Some((col, row))
}

pub fn column_label(mut col: u32) -> String {
    let mut out = Vec::with_capacity(2);
    while col > 0 {
        let rem = (col - 1) % 26;
        out.push(b'A' + rem as u8);
        col = (col - 1) / 26;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

impl fmt::Display for CellAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", column_label(self.col), self.row)
    }
}

impl FromStr for CellAddress {
    type Err = MalformedAddress;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Ord for CellAddress {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.row, self.col).cmp(&(other.row, other.col))
    }
}

impl PartialOrd for CellAddress {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Serialize for CellAddress {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CellAddress {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// A normalized rectangle of cells (`start` is the top-left corner).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellRange {
    start: CellAddress,
    end: CellAddress,
}

impl CellRange {
    /// Builds the rectangle spanned by two corners, in either order.
    pub fn new(a: CellAddress, b: CellAddress) -> Self {
        let start = CellAddress { col: a.col.min(b.col), row: a.row.min(b.row) };
        let end = CellAddress { col: a.col.max(b.col), row: a.row.max(b.row) };
        Self { start, end }
    }

    pub fn start(&self) -> CellAddress {
        self.start
    }

    pub fn end(&self) -> CellAddress {
        self.end
    }

    pub fn is_single_column(&self) -> bool {
        self.start.col == self.end.col
    }

    pub fn contains(&self, addr: CellAddress) -> bool {
        (self.start.col..=self.end.col).contains(&addr.col)
            && (self.start.row..=self.end.row).contains(&addr.row)
    }

    pub fn len(&self) -> u64 {
        u64::from(self.end.col - self.start.col + 1) * u64::from(self.end.row - self.start.row + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Addresses in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = CellAddress> + '_ {
        let (c0, c1) = (self.start.col, self.end.col);
        (self.start.row..=self.end.row)
            .flat_map(move |row| (c0..=c1).map(move |col| CellAddress { col, row }))
    }

    pub fn parse(text: &str) -> Result<Self, MalformedAddress> {
        match text.split_once(':') {
            Some((a, b)) => Ok(Self::new(a.parse()?, b.parse()?)),
            None => {
                let single: CellAddress = text.parse()?;
                Ok(Self::new(single, single))
            }
        }
    }
}

impl fmt::Display for CellRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start, self.end)
    }
}

impl FromStr for CellRange {
    type Err = MalformedAddress;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Serialize for CellRange {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CellRange {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}
