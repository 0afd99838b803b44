//! Random sheets, command logs and CSV files.

use gridmesh_core::{CellAddress, CellContent, Command, Sheet, SheetName};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::oracle::{render, FormulaGen};

const TEXTS: [&str; 10] = ["P", "A", "hello world", " padded ", "ünïcode ✓", "x\"y", "=SUM(A1)", "1e5x", "", "tab\u{a0}nbsp"];

pub fn random_number(rng: &mut impl Rng) -> f64 {
    match rng.gen_range(0..6) {
        0 => rng.gen_range(-1000..1000) as f64,
        1 => rng.gen_range(-1.0..1.0),
        2 => rng.gen::<f64>() * 10f64.powi(rng.gen_range(-300..300)),
        3 => 0.1 + 0.2,
        4 => *[0.0, -0.0, f64::MAX, f64::MIN_POSITIVE, 5e-324].choose(rng).unwrap(),
        _ => rng.gen_range(0..100) as f64 / 4.0,
    }
}

/// Random non-empty content for a cell inside a `cols x rows` block.
pub fn random_content(rng: &mut impl Rng, cols: u32, rows: u32) -> CellContent {
    match rng.gen_range(0..10) {
        0..=3 => CellContent::Number(random_number(rng)),
        4..=6 => CellContent::text(*TEXTS.choose(rng).unwrap()),
        _ => {
            let gen = FormulaGen { cols, rows, max_depth: 3 };
            CellContent::formula(render(&gen.expr(rng, 0))).expect("generated formulas parse")
        }
    }
}

pub fn random_address(rng: &mut impl Rng, cols: u32, rows: u32) -> CellAddress {
    CellAddress::new(rng.gen_range(1..=cols), rng.gen_range(1..=rows)).unwrap()
}

/// A recalculated sheet with up to `max_cells` cells in a `cols x rows` block.
pub fn random_sheet(rng: &mut impl Rng, cols: u32, rows: u32, max_cells: usize) -> Sheet {
    let mut sheet = Sheet::new(SheetName::new(format!("s{}", rng.gen_range(0..1000))).unwrap());
    for _ in 0..rng.gen_range(0..=max_cells) {
        let addr = random_address(rng, cols, rows);
        let content = random_content(rng, cols, rows);
        sheet.set_cell(addr, content).unwrap();
    }
    gridmesh_core::formula::recalculate_sheet(&mut sheet);
    sheet
}

pub fn random_command(rng: &mut impl Rng, cols: u32, rows: u32) -> Command {
    let addr = random_address(rng, cols, rows);
    if rng.gen_bool(0.1) {
        Command::SetEmpty(addr)
    } else {
        Command::set(addr, random_content(rng, cols, rows))
    }
}

pub fn random_log(rng: &mut impl Rng, len: usize, cols: u32, rows: u32) -> Vec<Command> {
    (0..len).map(|_| random_command(rng, cols, rows)).collect()
}

/// Well-formed CSV text: ragged records, quoted fields, CRLF or LF endings.
pub fn random_csv(rng: &mut impl Rng) -> String {
    const FIELDS: [&str; 12] = ["", "1", "-2.5", "3e2", "P", "a,b", "say \"hi\"", " x ", "ünï", "24.08.2010", "=1+1", "0x1"];
    let newline = if rng.gen_bool(0.5) { "\n" } else { "\r\n" };
    let mut out = String::new();
    for _ in 0..rng.gen_range(1..12) {
        let fields: Vec<String> = (0..rng.gen_range(1..7))
            .map(|_| {
                let f = *FIELDS.choose(rng).unwrap();
                if f.contains([',', '"']) || rng.gen_bool(0.1) {
                    format!("\"{}\"", f.replace('"', "\"\""))
                } else {
                    f.to_string()
                }
            })
            .collect();
        out.push_str(&fields.join(","));
        out.push_str(newline);
    }
    if rng.gen_bool(0.3) {
        out.truncate(out.len() - newline.len());
    }
    out
}

/// Arbitrary bytes biased toward CSV metacharacters.
pub fn random_bytes(rng: &mut impl Rng) -> Vec<u8> {
    const ALPHABET: &[u8] = b"a1.,\"\r\n \t-e\xff\xc3\xa9\x00";
    (0..rng.gen_range(0..64)).map(|_| *ALPHABET.choose(rng).unwrap()).collect()
}
