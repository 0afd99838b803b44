//! The gridmesh guide's code examples, compiled as doctests.
//!
//! Each module includes one chapter of `book/`, so `cargo test` runs every
//! snippet in the book against the current crates.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}
#[doc = include_str!("../../../book/src/sheets.md")]
mod sheets {}
#[doc = include_str!("../../../book/src/formulas.md")]
mod formulas {}
#[doc = include_str!("../../../book/src/save-strings.md")]
mod save_strings {}
#[doc = include_str!("../../../book/src/server.md")]
mod server {}
#[doc = include_str!("../../../book/src/sync.md")]
mod sync {}
#[doc = include_str!("../../../book/src/import.md")]
mod import {}
#[doc = include_str!("../../../book/src/autopilot.md")]
mod autopilot {}
#[doc = include_str!("../../../book/src/templates.md")]
mod templates {}
