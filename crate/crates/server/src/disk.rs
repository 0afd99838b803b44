//! On-disk layout.
//!
//! ```text
//! <data-dir>/meta.json                          accounts, sheet registry, jobs
//! <data-dir>/sheets/<author>/<group>/log        "<seq> <origin>\t<command>" lines
//! <data-dir>/sheets/<author>/<group>/chat       one JSON chat message per line
//! <data-dir>/sheets/<author>/<group>/snapshots/<name>.scsave
//! ```
//!
//! Path components are percent-encoded, so any valid name is a safe file name.
//! Appends are fsynced before they are acknowledged. A final line without its
//! newline was never acknowledged and is cut off on load.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use gridmesh_core::autopilot::Scheduler;
use gridmesh_core::clock::Millis;
use gridmesh_core::rpc::{ChatMessage, SheetKey};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct AccountRecord {
    pub password_hash: String,
    pub created_at: Millis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct SheetRecord {
    pub key: SheetKey,
    pub secret_hash: String,
    pub created_at: Millis,
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub(crate) struct Meta {
    pub accounts: BTreeMap<String, AccountRecord>,
    pub sheets: Vec<SheetRecord>,
    pub jobs: Scheduler,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct LogEntry {
    pub origin: String,
    pub command: String,
}

impl LogEntry {
    pub fn line(&self, seq: u64) -> String {
        format!("{seq} {}\t{}\n", self.origin, self.command)
    }
}

fn invalid(path: &Path, line: usize, why: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, format!("{}:{line}: {why}", path.display()))
}

/// Percent-encodes everything except `[A-Za-z0-9_-]` and non-leading dots.
pub(crate) fn encode_component(name: &str) -> String {
    let mut out = String::new();
    for (i, b) in name.bytes().enumerate() {
        if b.is_ascii_alphanumeric() || b == b'_' || b == b'-' || (b == b'.' && i > 0) {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

pub(crate) fn decode_component(text: &str) -> Option<String> {
    let bytes = text.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = text.get(i + 1..i + 3)?;
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).ok()
}

pub(crate) fn author_dir(data_dir: &Path, author: &str) -> PathBuf {
    data_dir.join("sheets").join(encode_component(author))
}

pub(crate) fn sheet_dir(data_dir: &Path, key: &SheetKey) -> PathBuf {
    author_dir(data_dir, &key.author).join(encode_component(&key.group))
}

pub(crate) fn snapshot_path(sheet_dir: &Path, name: &str) -> PathBuf {
    sheet_dir.join("snapshots").join(format!("{}.scsave", encode_component(name)))
}

fn sync_dir(dir: &Path) -> io::Result<()> {
    File::open(dir)?.sync_all()
}

/// Replaces `path` with `bytes` via a synced temporary file and a rename.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().expect("file paths have a parent");
    let tmp = dir.join(format!(".{}.tmp", path.file_name().unwrap().to_string_lossy()));
    {
        let mut file = File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    sync_dir(dir)
}

pub(crate) fn read_meta(data_dir: &Path) -> io::Result<Meta> {
    let path = data_dir.join("meta.json");
    match fs::read(&path) {
        Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| invalid(&path, 0, &e.to_string())),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Meta::default()),
        Err(e) => Err(e),
    }
}

pub(crate) fn write_meta(data_dir: &Path, meta: &Meta) -> io::Result<()> {
    let json = serde_json::to_vec_pretty(meta).expect("meta serializes");
    write_atomic(&data_dir.join("meta.json"), &json)
}

/// An append-only file whose writes are durable when `append` returns.
#[derive(Debug)]
pub(crate) struct Appender {
    file: File,
}

impl Appender {
    pub fn open(path: &Path) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { file })
    }

    /// Writes all of `bytes` or, on failure, tries to leave the file as it was.
    pub fn append(&mut self, bytes: &[u8]) -> io::Result<()> {
        let before = self.file.metadata()?.len();
        let result = self.file.write_all(bytes).and_then(|()| self.file.sync_data());
        if result.is_err() {
            let _ = self.file.set_len(before);
        }
        result
    }
}

/// Complete lines of `path`; a torn final line is removed from the file.
fn read_lines(path: &Path) -> io::Result<Vec<String>> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    if complete < bytes.len() {
        OpenOptions::new().write(true).open(path)?.set_len(complete as u64)?;
    }
    let text = std::str::from_utf8(&bytes[..complete]).map_err(|_| invalid(path, 0, "not UTF-8"))?;
    Ok(text.lines().map(str::to_string).collect())
}

pub(crate) fn read_log(path: &Path) -> io::Result<Vec<LogEntry>> {
    let mut entries = Vec::new();
    for (i, line) in read_lines(path)?.into_iter().enumerate() {
        let (head, command) = line.split_once('\t').ok_or_else(|| invalid(path, i + 1, "missing tab"))?;
        let (seq, origin) = head.split_once(' ').ok_or_else(|| invalid(path, i + 1, "missing origin"))?;
        if seq.parse::<usize>().ok() != Some(i + 1) {
            return Err(invalid(path, i + 1, "sequence numbers are not dense"));
        }
        entries.push(LogEntry { origin: origin.to_string(), command: command.to_string() });
    }
    Ok(entries)
}

pub(crate) fn read_chat(path: &Path) -> io::Result<Vec<ChatMessage>> {
    let mut messages = Vec::new();
    for (i, line) in read_lines(path)?.into_iter().enumerate() {
        let msg: ChatMessage = serde_json::from_str(&line).map_err(|e| invalid(path, i + 1, &e.to_string()))?;
        if msg.chat_seq != i as u64 + 1 {
            return Err(invalid(path, i + 1, "chat sequence numbers are not dense"));
        }
        messages.push(msg);
    }
    Ok(messages)
}

pub(crate) fn read_snapshots(sheet_dir: &Path) -> io::Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let dir = sheet_dir.join("snapshots");
    let entries = match fs::read_dir(&dir) {
        Ok(e) => e,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(out),
        Err(e) => return Err(e),
    };
    for entry in entries {
        let path = entry?.path();
        let Some(stem) = path.file_name().and_then(|n| n.to_str()).and_then(|n| n.strip_suffix(".scsave")) else {
            continue;
        };
        if let Some(name) = decode_component(stem) {
            out.insert(name, fs::read_to_string(&path)?);
        }
    }
    Ok(out)
}
