//! Strict CSV reading into save strings.

use super::{infer_cell_type, ImportError, ImportOptions};
use crate::address::{CellAddress, MAX_COL, MAX_ROW};
use crate::save::serialize_sheet;
use crate::sheet::{is_valid_text, CellContent, Sheet};

/// Splits CSV text into records of fields.
///
/// Quoted fields may contain delimiters and doubled quotes but never line
/// breaks. Both `\n` and `\r\n` end a record; a trailing line break does not
/// start another record.
pub(crate) fn read_records(text: &str, delimiter: char) -> Result<Vec<Vec<String>>, ImportError> {
    let mut records = Vec::new();
    let mut record = Vec::new();
    let mut field = String::new();
    let mut chars = text.chars().peekable();
    let mut line = 1;
    let mut at_field_start = true;
    loop {
        let Some(c) = chars.next() else {
            if !at_field_start || !record.is_empty() {
                record.push(std::mem::take(&mut field));
                records.push(std::mem::take(&mut record));
            }
            return Ok(records);
        };
        match c {
            '"' if at_field_start => {
                at_field_start = false;
                loop {
                    match chars.next() {
                        None => return Err(ImportError::UnbalancedQuote(line)),
                        Some('"') if chars.peek() == Some(&'"') => {
                            chars.next();
                            field.push('"');
                        }
                        Some('"') => break,
                        Some('\n' | '\r') => return Err(ImportError::EmbeddedNewline(line)),
                        Some(other) => field.push(other),
                    }
                }
                match chars.peek() {
                    None | Some('\n' | '\r') => {}
                    Some(&d) if d == delimiter => {}
                    Some(_) => return Err(ImportError::UnbalancedQuote(line)),
                }
            }
            c if c == delimiter => {
                record.push(std::mem::take(&mut field));
                at_field_start = true;
                // a trailing delimiter still opens one more (empty) field
                if matches!(chars.peek(), None | Some('\n' | '\r')) {
                    at_field_start = false;
                }
            }
            '\r' | '\n' => {
                if c == '\r' {
                    if chars.peek() != Some(&'\n') {
                        return Err(ImportError::EmbeddedNewline(line));
                    }
                    chars.next();
                }
                record.push(std::mem::take(&mut field));
                records.push(std::mem::take(&mut record));
                at_field_start = true;
                line += 1;
            }
            other => {
                at_field_start = false;
                field.push(other);
            }
        }
    }
}

/// Converts CSV bytes into a save string. Field `c` of record `r` lands in
/// column `c`, row `r`; a header record is dropped when requested.
pub fn import_csv(bytes: &[u8], options: &ImportOptions) -> Result<String, ImportError> {
    options.validate()?;
    let text = std::str::from_utf8(bytes).map_err(|_| ImportError::BadEncoding)?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut records = read_records(text, options.delimiter)?;
    // source line numbers for error reporting
    let skip = usize::from(options.has_header && !records.is_empty());
    records.drain(..skip);
    if records.len() > MAX_ROW as usize {
        return Err(ImportError::TooManyRows(records.len()));
    }
    let mut sheet = Sheet::new(options.sheet_name.clone());
    for (r, record) in records.into_iter().enumerate() {
        if record.len() > MAX_COL as usize {
            return Err(ImportError::TooManyColumns(record.len()));
        }
        for (c, field) in record.into_iter().enumerate() {
            let line = r + 1 + skip;
            if !is_valid_text(&field) {
                return Err(ImportError::InvalidField(line));
            }
            let content = infer_cell_type(&field);
            if content.is_empty() {
                continue;
            }
            let addr = CellAddress::new(c as u32 + 1, r as u32 + 1).expect("bounds checked above");
            debug_assert!(!matches!(content, CellContent::Formula(_)));
            sheet.set_cell(addr, content).map_err(|_| ImportError::InvalidField(line))?;
        }
    }
    Ok(serialize_sheet(&sheet))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::save::parse_save_string;

    fn import(text: &str) -> Result<String, ImportError> {
        import_csv(text.as_bytes(), &ImportOptions::default())
    }

    fn body(save: &str) -> String {
        save.split_once('\n').unwrap().1.to_string()
    }

    #[test]
    fn simple_grid() {
        assert_eq!(
            body(&import("1,hello\n2,world\n").unwrap()),
            "cell A1 value n 1\ncell B1 text t hello\ncell A2 value n 2\ncell B2 text t world\n"
        );
    }

    #[test]
    fn quoting() {
        assert_eq!(body(&import("\"a,b\",3\n").unwrap()), "cell A1 text t a,b\ncell B1 value n 3\n");
        assert_eq!(body(&import("\"say \"\"hi\"\"\"\n").unwrap()), "cell A1 text t say \"hi\"\n");
        assert_eq!(body(&import("a\"b\n").unwrap()), "cell A1 text t a\"b\n");
    }

    #[test]
    fn ragged_rows() {
        assert_eq!(
            body(&import("1,2\n3\n").unwrap()),
            "cell A1 value n 1\ncell B1 value n 2\ncell A2 value n 3\n"
        );
        assert_eq!(body(&import("1,,3\n\n,x").unwrap()), "cell A1 value n 1\ncell C1 value n 3\ncell B3 text t x\n");
    }

    #[test]
    fn crlf_bom_and_header() {
        let opts = ImportOptions { has_header: true, ..Default::default() };
        let out = import_csv("\u{feff}name,score\r\nann,9\r\n".as_bytes(), &opts).unwrap();
        assert_eq!(body(&out), "cell A1 text t ann\ncell B1 value n 9\n");
    }

    #[test]
    fn other_delimiter() {
        let opts = ImportOptions { delimiter: ';', ..Default::default() };
        let out = import_csv(b"1;a,b\n", &opts).unwrap();
        assert_eq!(body(&out), "cell A1 value n 1\ncell B1 text t a,b\n");
    }

    #[test]
    fn errors() {
        assert_eq!(import("\"open\n"), Err(ImportError::EmbeddedNewline(1)));
        assert_eq!(import("ok\n\"open"), Err(ImportError::UnbalancedQuote(2)));
        assert_eq!(import("\"a\"b\n"), Err(ImportError::UnbalancedQuote(1)));
        assert_eq!(import("a\rb\n"), Err(ImportError::EmbeddedNewline(1)));
        assert_eq!(import("a\tb\n"), Err(ImportError::InvalidField(1)));
        assert_eq!(import_csv(&[0xff, 0xfe], &ImportOptions::default()), Err(ImportError::BadEncoding));
        let wide = vec!["1"; 703].join(",");
        assert_eq!(import(&wide), Err(ImportError::TooManyColumns(703)));
        let tall = "1\n".repeat(100_001);
        assert_eq!(import(&tall), Err(ImportError::TooManyRows(100_001)));
    }

    #[test]
    fn never_yields_formulas() {
        let out = import("=SUM(A1:A2),=1/0\n").unwrap();
        assert_eq!(body(&out), "cell A1 text t =SUM(A1:A2)\ncell B1 text t =1/0\n");
        parse_save_string(&out).unwrap();
    }

    #[test]
    fn empty_input() {
        assert_eq!(import("").unwrap(), "socialcalc-save 1 sheet\n");
    }
}
