//! Converting foreign files into save strings.
//!
//! Every supported format implements [`FormatAdapter`]. [`Importer::convert`]
//! picks an adapter by file extension first and by sniffing the leading
//! bytes second.

mod csv;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::csv::import_csv;
use crate::save::{parse_save_string, SaveError, HEADER_PREFIX};
use crate::sheet::{CellContent, SheetName};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ImportError {
    #[error("input is not valid UTF-8")]
    BadEncoding,
    #[error("line {0}: unbalanced quote")]
    UnbalancedQuote(usize),
    #[error("line {0}: line breaks inside a field are not supported")]
    EmbeddedNewline(usize),
    #[error("line {0}: field contains control characters")]
    InvalidField(usize),
    #[error("{0} columns exceeds the grid width")]
    TooManyColumns(usize),
    #[error("{0} rows exceeds the grid height")]
    TooManyRows(usize),
    #[error("delimiter must be a printable ASCII character other than a quote")]
    BadDelimiter,
    #[error("no importer for extension {0:?}")]
    NoAdapter(String),
    #[error("invalid save string: {0}")]
    BadSaveString(#[from] SaveError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImportOptions {
    pub delimiter: char,
    pub has_header: bool,
    pub sheet_name: SheetName,
}

impl Default for ImportOptions {
    fn default() -> Self {
        Self { delimiter: ',', has_header: false, sheet_name: SheetName::default() }
    }
}

impl ImportOptions {
    fn validate(&self) -> Result<(), ImportError> {
        let d = self.delimiter;
        if d.is_ascii_graphic() && d != '"' || d == ' ' {
            Ok(())
        } else {
            Err(ImportError::BadDelimiter)
        }
    }
}

/// Guesses the content of one untyped field. Never produces a formula.
pub fn infer_cell_type(field: &str) -> CellContent {
    if field.is_empty() {
        return CellContent::Empty;
    }
    if looks_numeric(field) {
        if let Ok(n) = field.parse::<f64>() {
            if n.is_finite() {
                return CellContent::Number(n);
            }
        }
    }
    CellContent::Text(field.to_string())
}

/// `[+-]? (digits [. digits?] | . digits) ([eE] [+-]? digits)?`
fn looks_numeric(s: &str) -> bool {
    let b = s.as_bytes();
    let mut i = 0;
    let digits = |i: &mut usize| {
        let start = *i;
        while *i < b.len() && b[*i].is_ascii_digit() {
            *i += 1;
        }
        *i - start
    };
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let int_digits = digits(&mut i);
    let mut frac_digits = 0;
    if i < b.len() && b[i] == b'.' {
        i += 1;
        frac_digits = digits(&mut i);
    }
    if int_digits + frac_digits == 0 {
        return false;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        if digits(&mut i) == 0 {
            return false;
        }
    }
    i == b.len()
}

/// A file format that can be turned into a save string.
pub trait FormatAdapter: Send + Sync {
    fn name(&self) -> &str;

    /// Lowercase extensions handled, including the dot (`".csv"`).
    fn extensions(&self) -> &[&str];

    /// Whether the leading bytes identify this format.
    fn sniff(&self, _leading: &[u8]) -> bool {
        false
    }

    fn accepts(&self, filename: &str, leading: &[u8]) -> bool {
        self.extensions().contains(&extension(filename).as_str()) || self.sniff(leading)
    }

    fn convert(&self, bytes: &[u8], options: &ImportOptions) -> Result<String, ImportError>;
}

/// The lowercase extension of `filename` including the dot, or `""`.
pub fn extension(filename: &str) -> String {
    let base = filename.rsplit(['/', '\\']).next().unwrap_or(filename);
    match base.rfind('.') {
        Some(i) if i > 0 => base[i..].to_ascii_lowercase(),
        _ => String::new(),
    }
}

pub struct CsvAdapter;

impl FormatAdapter for CsvAdapter {
    fn name(&self) -> &str {
        "csv"
    }

    fn extensions(&self) -> &[&str] {
        &[".csv"]
    }

    fn convert(&self, bytes: &[u8], options: &ImportOptions) -> Result<String, ImportError> {
        import_csv(bytes, options)
    }
}

/// Save strings pass through unchanged once they parse.
pub struct SaveStringAdapter;

impl FormatAdapter for SaveStringAdapter {
    fn name(&self) -> &str {
        "scsave"
    }

    fn extensions(&self) -> &[&str] {
        &[".scsave"]
    }

    fn sniff(&self, leading: &[u8]) -> bool {
        leading.starts_with(HEADER_PREFIX.as_bytes())
    }

    fn convert(&self, bytes: &[u8], _options: &ImportOptions) -> Result<String, ImportError> {
        let text = std::str::from_utf8(bytes).map_err(|_| ImportError::BadEncoding)?;
        parse_save_string(text)?;
        Ok(text.to_string())
    }
}

pub struct Importer {
    adapters: Vec<Box<dyn FormatAdapter>>,
}

impl Default for Importer {
    fn default() -> Self {
        Self { adapters: vec![Box::new(CsvAdapter), Box::new(SaveStringAdapter)] }
    }
}

impl Importer {
    pub fn empty() -> Self {
        Self { adapters: Vec::new() }
    }

    pub fn register(&mut self, adapter: Box<dyn FormatAdapter>) {
        self.adapters.push(adapter);
    }

    pub fn adapter_for(&self, filename: &str, bytes: &[u8]) -> Option<&dyn FormatAdapter> {
        let ext = extension(filename);
        let leading = &bytes[..bytes.len().min(64)];
        self.adapters
            .iter()
            .find(|a| a.extensions().contains(&ext.as_str()))
            .or_else(|| self.adapters.iter().find(|a| a.sniff(leading)))
            .map(|a| a.as_ref())
    }

    pub fn convert(&self, filename: &str, bytes: &[u8], options: &ImportOptions) -> Result<String, ImportError> {
        match self.adapter_for(filename, bytes) {
            Some(adapter) => adapter.convert(bytes, options),
            None => Err(ImportError::NoAdapter(extension(filename))),
        }
    }
}

/// Converts with the built-in adapters.
pub fn convert(filename: &str, bytes: &[u8], options: &ImportOptions) -> Result<String, ImportError> {
    Importer::default().convert(filename, bytes, options)
}
