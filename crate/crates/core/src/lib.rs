//! Core of the gridmesh collaborative spreadsheet.
//!
//! A [`Sheet`] is only ever changed through [`Command`]s, one-line command
//! strings that every replica applies in the same server-assigned order.
//! Sheets travel as save strings (see [`save`]), a line-oriented text form
//! that doubles as the persistence and import format.

pub mod address;
pub mod autopilot;
pub mod clock;
pub mod command;
pub mod formula;
pub mod import;
pub mod rpc;
pub mod save;
pub mod sheet;
pub mod templates;
pub mod value;

pub use address::{CellAddress, CellRange, MalformedAddress};
pub use command::{apply_command, parse_command, replay_log, serialize_command, Command, MalformedCommand};
pub use save::{parse_save_string, serialize_sheet, SaveError};
pub use sheet::{CellContent, Formula, Sheet, SheetError, SheetName};
pub use value::{ComputedValue, ErrorCode};
