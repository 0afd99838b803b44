//! Command strings: the only way a sheet changes.
//!
//! ```text
//! set <ADDR> value n <number>
//! set <ADDR> text t <payload...>
//! set <ADDR> formula <payload...>
//! set <ADDR> empty
//! ```
//!
//! Each command overwrites exactly one cell, so applying a log in order gives
//! last-writer-wins per cell.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::address::CellAddress;
use crate::formula::recalculate_sheet;
use crate::save::{format_number, parse_number};
use crate::sheet::{is_valid_text, CellContent, Formula, Sheet, SheetName};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed command {text:?}: {reason}")]
pub struct MalformedCommand {
    pub text: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    SetNumber(CellAddress, f64),
    SetText(CellAddress, String),
    SetFormula(CellAddress, Formula),
    SetEmpty(CellAddress),
}

impl Command {
    pub fn target(&self) -> CellAddress {
        match self {
            Command::SetNumber(a, _) | Command::SetText(a, _) | Command::SetFormula(a, _) | Command::SetEmpty(a) => *a,
        }
    }

    /// The command that writes `content` into `addr`.
    pub fn set(addr: CellAddress, content: CellContent) -> Self {
        match content {
            CellContent::Empty => Command::SetEmpty(addr),
            CellContent::Number(n) => Command::SetNumber(addr, n),
            CellContent::Text(t) => Command::SetText(addr, t),
            CellContent::Formula(f) => Command::SetFormula(addr, f),
        }
    }

    pub fn content(&self) -> CellContent {
        match self {
            Command::SetNumber(_, n) => CellContent::Number(*n),
            Command::SetText(_, t) => CellContent::Text(t.clone()),
            Command::SetFormula(_, f) => CellContent::Formula(f.clone()),
            Command::SetEmpty(_) => CellContent::Empty,
        }
    }
}

pub fn parse_command(text: &str) -> Result<Command, MalformedCommand> {
    let fail = |reason: &str| MalformedCommand { text: text.to_string(), reason: reason.to_string() };
    let rest = text.strip_prefix("set ").ok_or_else(|| fail("unknown verb"))?;
    let (addr, rest) = rest.split_once(' ').unwrap_or((rest, ""));
    let addr: CellAddress = addr.parse().map_err(|_| fail("bad address"))?;
    if let Some(n) = rest.strip_prefix("value n ") {
        let n = parse_number(n).ok_or_else(|| fail("bad number"))?;
        Ok(Command::SetNumber(addr, if n == 0.0 { 0.0 } else { n }))
    } else if let Some(t) = rest.strip_prefix("text t ") {
        if !is_valid_text(t) {
            return Err(fail("text must be a single line without control characters"));
        }
        Ok(Command::SetText(addr, t.to_string()))
    } else if let Some(f) = rest.strip_prefix("formula ") {
        let formula = Formula::new(f).map_err(|e| fail(&e.to_string()))?;
        Ok(Command::SetFormula(addr, formula))
    } else if rest == "empty" {
        Ok(Command::SetEmpty(addr))
    } else {
        Err(fail("unknown cell kind"))
    }
}

pub fn serialize_command(cmd: &Command) -> String {
    match cmd {
        Command::SetNumber(a, n) => format!("set {a} value n {}", format_number(*n)),
        Command::SetText(a, t) => format!("set {a} text t {t}"),
        Command::SetFormula(a, f) => format!("set {a} formula {}", f.source()),
        Command::SetEmpty(a) => format!("set {a} empty"),
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_command(self))
    }
}

impl FromStr for Command {
    type Err = MalformedCommand;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_command(s)
    }
}

fn write_cell(sheet: &mut Sheet, cmd: &Command) {
    sheet
        .set_cell(cmd.target(), cmd.content())
        .expect("commands only carry valid content");
}

/// Applies one command and recalculates.
pub fn apply_command(sheet: &mut Sheet, cmd: &Command) {
    write_cell(sheet, cmd);
    recalculate_sheet(sheet);
}

/// Applies several commands, recalculating once at the end.
pub fn apply_commands<'a>(sheet: &mut Sheet, cmds: impl IntoIterator<Item = &'a Command>) {
    for cmd in cmds {
        write_cell(sheet, cmd);
    }
    recalculate_sheet(sheet);
}

/// Replays a log from the empty sheet.
pub fn replay_log<'a>(name: SheetName, cmds: impl IntoIterator<Item = &'a Command>) -> Sheet {
    let mut sheet = Sheet::new(name);
    apply_commands(&mut sheet, cmds);
    sheet
}
