use std::fmt;

use serde::{Deserialize, Serialize};

/// Error values a formula can produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ErrorCode {
    Div0,
    Ref,
    Circ,
    Name,
    Value,
}

impl ErrorCode {
    /// The display form shown in a grid, e.g. `#DIV/0!`.
    pub fn label(self) -> &'static str {
        match self {
            ErrorCode::Div0 => "#DIV/0!",
            ErrorCode::Ref => "#REF!",
            ErrorCode::Circ => "#CIRC!",
            ErrorCode::Name => "#NAME?",
            ErrorCode::Value => "#VALUE!",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The result of evaluating a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
pub enum ComputedValue {
    Num(f64),
    Str(String),
    Err(ErrorCode),
}

impl ComputedValue {
    /// Wraps an arithmetic result, mapping non-finite values to `#VALUE!`.
    pub(crate) fn number(n: f64) -> Self {
        if n.is_finite() {
            ComputedValue::Num(if n == 0.0 { 0.0 } else { n })
        } else {
            ComputedValue::Err(ErrorCode::Value)
        }
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            ComputedValue::Num(n) => Some(*n),
            _ => None,
        }
    }

    pub fn is_err(&self) -> bool {
        matches!(self, ComputedValue::Err(_))
    }
}

impl fmt::Display for ComputedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComputedValue::Num(n) => write!(f, "{n}"),
            ComputedValue::Str(s) => f.write_str(s),
            ComputedValue::Err(e) => write!(f, "{e}"),
        }
    }
}
