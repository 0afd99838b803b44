//! All server state and every operation on it.
//!
//! Locks are taken in a fixed order: registry, then one sheet, then sessions.
//! A sheet's mutex covers log append, cache update and the durable write, so
//! each sheet has a single writer while different sheets proceed in parallel.
//! Readers of the materialized sheet clone an `Arc` and never block writers.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io;
use std::path::PathBuf;
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use gridmesh_core::autopilot::{self, append_result_row, JobError, JobResult, JobSpec, Scheduler};
use gridmesh_core::clock::{Clock, Millis, SystemClock};
use gridmesh_core::command::apply_commands;
use gridmesh_core::import::{ImportError, Importer};
use gridmesh_core::rpc::*;
use gridmesh_core::sheet::is_valid_name;
use gridmesh_core::templates::TemplatePack;
use gridmesh_core::{
    parse_command, parse_save_string, serialize_command, serialize_sheet, CellAddress, CellContent, Command, Sheet,
    SheetName,
};
use parking_lot::{Mutex, RwLock};

use crate::auth::{self, HashCost};
use crate::disk::{self, AccountRecord, Appender, LogEntry, Meta, SheetRecord};

pub const MIN_PASSWORD_LEN: usize = 8;
pub const MAX_CHAT_LEN: usize = 2000;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// Where state is persisted; `None` keeps everything in memory.
    pub data_dir: Option<PathBuf>,
    pub presence_window_ms: Millis,
    /// Sessions expire after this long without a successful call.
    pub session_ttl_ms: Millis,
    pub hash_cost: HashCost,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            data_dir: None,
            presence_window_ms: 10_000,
            session_ttl_ms: 24 * 3600 * 1000,
            hash_cost: HashCost::Standard,
        }
    }
}

type Result<T> = std::result::Result<T, RpcError>;

fn fail<T>(code: RpcErrorCode, message: impl Into<String>) -> Result<T> {
    Err(RpcError::new(code, message))
}

fn internal(e: io::Error) -> RpcError {
    RpcError::new(RpcErrorCode::Internal, format!("storage failure: {e}"))
}

struct Session {
    username: String,
    last_seen: Millis,
}

struct SheetFiles {
    dir: PathBuf,
    log: Appender,
    chat: Appender,
}

struct SheetState {
    key: SheetKey,
    log: Vec<LogEntry>,
    materialized: Arc<Sheet>,
    chat: Vec<ChatMessage>,
    /// Session token to time of last open/poll.
    members: HashMap<String, Millis>,
    snapshots: BTreeMap<String, String>,
    files: Option<SheetFiles>,
}

impl SheetState {
    fn require_member(&self, token: &str) -> Result<()> {
        if self.members.contains_key(token) {
            Ok(())
        } else {
            fail(RpcErrorCode::NotMember, format!("open {} first", self.key))
        }
    }

    fn last_seq(&self) -> u64 {
        self.log.len() as u64
    }

    /// Durably appends a batch, then applies it. Nothing changes on failure.
    fn append(&mut self, origin: &str, commands: &[Command]) -> Result<SendCommandsResult> {
        let first_seq = self.last_seq() + 1;
        let entries: Vec<LogEntry> = commands
            .iter()
            .map(|c| LogEntry { origin: origin.to_string(), command: serialize_command(c) })
            .collect();
        if let Some(files) = &mut self.files {
            let text: String = entries.iter().zip(first_seq..).map(|(e, seq)| e.line(seq)).collect();
            files.log.append(text.as_bytes()).map_err(internal)?;
        }
        apply_commands(Arc::make_mut(&mut self.materialized), commands);
        self.log.extend(entries);
        Ok(SendCommandsResult { first_seq, last_seq: self.last_seq() })
    }

    fn store_snapshot(&mut self, name: &str, text: String) -> Result<()> {
        if let Some(files) = &self.files {
            let path = disk::snapshot_path(&files.dir, name);
            disk::write_atomic(&path, text.as_bytes()).map_err(internal)?;
        }
        self.snapshots.insert(name.to_string(), text);
        Ok(())
    }
}

struct SheetHandle {
    secret_hash: String,
    created_at: Millis,
    state: Mutex<SheetState>,
}

#[derive(Default)]
struct Registry {
    accounts: BTreeMap<String, AccountRecord>,
    sheets: BTreeMap<SheetKey, Arc<SheetHandle>>,
    scheduler: Scheduler,
}

pub struct Store {
    config: ServerConfig,
    clock: Arc<dyn Clock>,
    registry: RwLock<Registry>,
    sessions: Mutex<HashMap<String, Session>>,
    importer: Importer,
}

fn materialize(key: &SheetKey, log: &[LogEntry]) -> io::Result<Sheet> {
    let name = SheetName::new(key.group.clone()).expect("group names are valid sheet names");
    let mut commands = Vec::with_capacity(log.len());
    for (i, entry) in log.iter().enumerate() {
        let cmd = parse_command(&entry.command)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{key} seq {}: {e}", i + 1)))?;
        commands.push(cmd);
    }
    Ok(gridmesh_core::replay_log(name, &commands))
}

fn same_content(a: &CellContent, b: &CellContent) -> bool {
    match (a, b) {
        (CellContent::Formula(x), CellContent::Formula(y)) => x.source() == y.source(),
        _ => a == b,
    }
}

impl Store {
    pub fn new(config: ServerConfig) -> io::Result<Self> {
        Self::with_clock(config, Arc::new(SystemClock))
    }

    /// Opens the store, replaying every persisted log.
    pub fn with_clock(config: ServerConfig, clock: Arc<dyn Clock>) -> io::Result<Self> {
        let mut registry = Registry::default();
        if let Some(dir) = &config.data_dir {
            fs::create_dir_all(dir.join("sheets"))?;
            let meta = disk::read_meta(dir)?;
            registry.accounts = meta.accounts;
            registry.scheduler = meta.jobs;
            for record in meta.sheets {
                let sheet_dir = disk::sheet_dir(dir, &record.key);
                fs::create_dir_all(sheet_dir.join("snapshots"))?;
                let log = disk::read_log(&sheet_dir.join("log"))?;
                let state = SheetState {
                    materialized: Arc::new(materialize(&record.key, &log)?),
                    key: record.key.clone(),
                    log,
                    chat: disk::read_chat(&sheet_dir.join("chat"))?,
                    members: HashMap::new(),
                    snapshots: disk::read_snapshots(&sheet_dir)?,
                    files: Some(SheetFiles {
                        log: Appender::open(&sheet_dir.join("log"))?,
                        chat: Appender::open(&sheet_dir.join("chat"))?,
                        dir: sheet_dir,
                    }),
                };
                let handle = SheetHandle {
                    secret_hash: record.secret_hash,
                    created_at: record.created_at,
                    state: Mutex::new(state),
                };
                registry.sheets.insert(record.key, Arc::new(handle));
            }
        }
        Ok(Self {
            config,
            clock,
            registry: RwLock::new(registry),
            sessions: Mutex::new(HashMap::new()),
            importer: Importer::default(),
        })
    }

    pub fn config(&self) -> &ServerConfig {
        &self.config
    }

    pub fn now(&self) -> Millis {
        self.clock.now()
    }

    fn persist_meta(&self, reg: &Registry) -> Result<()> {
        let Some(dir) = &self.config.data_dir else { return Ok(()) };
        let meta = Meta {
            accounts: reg.accounts.clone(),
            sheets: reg
                .sheets
                .iter()
                .map(|(key, h)| SheetRecord {
                    key: key.clone(),
                    secret_hash: h.secret_hash.clone(),
                    created_at: h.created_at,
                })
                .collect(),
            jobs: reg.scheduler.clone(),
        };
        disk::write_meta(dir, &meta).map_err(internal)
    }

    /// Resolves a live session to its username.
    fn authenticate(&self, token: &str) -> Result<String> {
        let now = self.now();
        match self.sessions.lock().get(token) {
            Some(s) if now.saturating_sub(s.last_seen) <= self.config.session_ttl_ms => Ok(s.username.clone()),
            _ => fail(RpcErrorCode::AuthRequired, "unknown or expired session"),
        }
    }

    /// Runs `op` as the session's user; only success refreshes the session.
    fn authed<T>(&self, token: &str, op: impl FnOnce(&str) -> Result<T>) -> Result<T> {
        let user = self.authenticate(token)?;
        let out = op(&user)?;
        let now = self.now();
        if let Some(s) = self.sessions.lock().get_mut(token) {
            s.last_seen = now;
        }
        Ok(out)
    }

    fn sheet(&self, key: &SheetKey) -> Result<Arc<SheetHandle>> {
        match self.registry.read().sheets.get(key) {
            Some(h) => Ok(h.clone()),
            None => fail(RpcErrorCode::NoSuchSheet, format!("no sheet {key}")),
        }
    }

    pub fn create_account(&self, creds: &Credentials) -> Result<()> {
        if !is_valid_name(&creds.username) {
            return fail(RpcErrorCode::BadUsername, "usernames are 1-64 characters without whitespace");
        }
        if creds.password.chars().count() < MIN_PASSWORD_LEN {
            return fail(RpcErrorCode::WeakPassword, format!("passwords need at least {MIN_PASSWORD_LEN} characters"));
        }
        if self.registry.read().accounts.contains_key(&creds.username) {
            return fail(RpcErrorCode::UsernameTaken, "username taken");
        }
        let password_hash = auth::hash_secret(&creds.password, self.config.hash_cost);
        let mut reg = self.registry.write();
        if reg.accounts.contains_key(&creds.username) {
            return fail(RpcErrorCode::UsernameTaken, "username taken");
        }
        let record = AccountRecord { password_hash, created_at: self.now() };
        reg.accounts.insert(creds.username.clone(), record);
        if let Err(e) = self.persist_meta(&reg) {
            reg.accounts.remove(&creds.username);
            return Err(e);
        }
        Ok(())
    }

    pub fn login(&self, creds: &Credentials) -> Result<LoginResult> {
        let hash = self.registry.read().accounts.get(&creds.username).map(|a| a.password_hash.clone());
        let Some(_) = hash.filter(|h| auth::verify_secret(&creds.password, h)) else {
            return fail(RpcErrorCode::BadCredentials, "wrong username or password");
        };
        let session = auth::new_token();
        let now = self.now();
        self.sessions.lock().insert(session.clone(), Session { username: creds.username.clone(), last_seen: now });
        Ok(LoginResult { origin: auth::origin_of(&session), session })
    }

    pub fn logout(&self, token: &str) -> Result<()> {
        self.authenticate(token)?;
        self.sessions.lock().remove(token);
        Ok(())
    }

    pub fn update_account(&self, token: &str, params: &UpdateAccountParams) -> Result<()> {
        let user = self.authenticate(token)?;
        if params.new_username.is_none() && params.new_password.is_none() {
            return fail(RpcErrorCode::BadParams, "nothing to change");
        }
        if let Some(name) = &params.new_username {
            if !is_valid_name(name) {
                return fail(RpcErrorCode::BadUsername, "usernames are 1-64 characters without whitespace");
            }
        }
        if let Some(pw) = &params.new_password {
            if pw.chars().count() < MIN_PASSWORD_LEN {
                return fail(RpcErrorCode::WeakPassword, format!("passwords need at least {MIN_PASSWORD_LEN} characters"));
            }
        }
        let new_hash = params.new_password.as_ref().map(|pw| auth::hash_secret(pw, self.config.hash_cost));

        let mut reg = self.registry.write();
        let new_name = params.new_username.clone().filter(|n| *n != user);
        if let Some(name) = &new_name {
            if reg.accounts.contains_key(name) {
                return fail(RpcErrorCode::UsernameTaken, "username taken");
            }
        }
        let Some(mut account) = reg.accounts.get(&user).cloned() else {
            return fail(RpcErrorCode::AuthRequired, "account no longer exists");
        };
        let name = new_name.clone().unwrap_or_else(|| user.clone());
        if let Some(hash) = new_hash {
            account.password_hash = hash;
        }

        // Move the author's sheet directories before touching memory, so a
        // failure leaves everything as it was.
        let moved_dir = match (&new_name, &self.config.data_dir) {
            (Some(to), Some(dir)) => {
                let (from, to) = (disk::author_dir(dir, &user), disk::author_dir(dir, to));
                if from.exists() {
                    fs::rename(&from, &to).map_err(internal)?;
                    Some((from, to))
                } else {
                    None
                }
            }
            _ => None,
        };
        let previous = (reg.accounts.clone(), reg.sheets.clone(), reg.scheduler.clone());
        reg.accounts.remove(&user);
        reg.accounts.insert(name.clone(), account);
        if new_name.is_some() {
            let owned: Vec<SheetKey> = reg.sheets.keys().filter(|k| k.author == user).cloned().collect();
            for old in owned {
                let new = SheetKey::new(name.clone(), old.group.clone());
                let handle = reg.sheets.remove(&old).expect("listed above");
                reg.scheduler.rekey(&old, &new);
                reg.sheets.insert(new, handle);
            }
        }
        if let Err(e) = self.persist_meta(&reg) {
            (reg.accounts, reg.sheets, reg.scheduler) = previous;
            if let Some((from, to)) = moved_dir {
                let _ = fs::rename(to, from);
            }
            return Err(e);
        }
        // Commit the in-memory side effects that cannot fail.
        if new_name.is_some() {
            for (key, handle) in reg.sheets.iter().filter(|(k, _)| k.author == name) {
                let mut state = handle.state.lock();
                state.key = key.clone();
                if let (Some(files), Some(dir)) = (&mut state.files, &self.config.data_dir) {
                    files.dir = disk::sheet_dir(dir, key);
                }
            }
        }
        let now = self.now();
        let mut sessions = self.sessions.lock();
        if params.new_password.is_some() {
            sessions.retain(|t, s| s.username != user || t == token);
        }
        for s in sessions.values_mut().filter(|s| s.username == user) {
            s.username = name.clone();
        }
        if let Some(s) = sessions.get_mut(token) {
            s.last_seen = now;
        }
        Ok(())
    }

    fn insert_sheet(&self, reg: &mut Registry, key: &SheetKey, secret_hash: String) -> Result<Arc<SheetHandle>> {
        let files = match &self.config.data_dir {
            Some(dir) => {
                let sheet_dir = disk::sheet_dir(dir, key);
                let open = || -> io::Result<SheetFiles> {
                    fs::create_dir_all(sheet_dir.join("snapshots"))?;
                    // a leftover directory from an earlier failed attempt is reset
                    fs::write(sheet_dir.join("log"), "")?;
                    fs::write(sheet_dir.join("chat"), "")?;
                    Ok(SheetFiles {
                        log: Appender::open(&sheet_dir.join("log"))?,
                        chat: Appender::open(&sheet_dir.join("chat"))?,
                        dir: sheet_dir.clone(),
                    })
                };
                Some(open().map_err(internal)?)
            }
            None => None,
        };
        let name = SheetName::new(key.group.clone()).expect("validated group name");
        let state = SheetState {
            key: key.clone(),
            log: Vec::new(),
            materialized: Arc::new(Sheet::new(name)),
            chat: Vec::new(),
            members: HashMap::new(),
            snapshots: BTreeMap::new(),
            files,
        };
        let handle = Arc::new(SheetHandle { secret_hash, created_at: self.now(), state: Mutex::new(state) });
        reg.sheets.insert(key.clone(), handle.clone());
        if let Err(e) = self.persist_meta(reg) {
            reg.sheets.remove(key);
            return Err(e);
        }
        Ok(handle)
    }

    pub fn create_sheet(&self, token: &str, params: &CreateSheetParams) -> Result<SheetKey> {
        self.authed(token, |user| {
            if !is_valid_name(&params.group) {
                return fail(RpcErrorCode::BadGroupName, "group names are 1-64 characters without whitespace");
            }
            let key = SheetKey::new(user, params.group.clone());
            if self.registry.read().sheets.contains_key(&key) {
                return fail(RpcErrorCode::SheetExists, format!("{key} already exists"));
            }
            let secret_hash = auth::hash_secret(&params.secret, self.config.hash_cost);
            let mut reg = self.registry.write();
            if reg.sheets.contains_key(&key) {
                return fail(RpcErrorCode::SheetExists, format!("{key} already exists"));
            }
            let handle = self.insert_sheet(&mut reg, &key, secret_hash)?;
            handle.state.lock().members.insert(token.to_string(), self.now());
            Ok(key)
        })
    }

    fn check_secret(&self, handle: &SheetHandle, secret: &str) -> Result<()> {
        if auth::verify_secret(secret, &handle.secret_hash) {
            Ok(())
        } else {
            fail(RpcErrorCode::AuthDenied, "wrong sheet id")
        }
    }

    pub fn open_sheet(&self, token: &str, params: &OpenSheetParams) -> Result<OpenSheetResult> {
        self.authed(token, |_| {
            let handle = self.sheet(&params.key)?;
            self.check_secret(&handle, &params.secret)?;
            let mut state = handle.state.lock();
            state.members.insert(token.to_string(), self.now());
            Ok(OpenSheetResult { snapshot: serialize_sheet(&state.materialized), last_seq: state.last_seq() })
        })
    }

    pub fn send_commands(&self, token: &str, params: &SendCommandsParams) -> Result<SendCommandsResult> {
        self.authed(token, |_| {
            let handle = self.sheet(&params.key)?;
            if params.commands.is_empty() {
                return fail(RpcErrorCode::BadParams, "empty batch");
            }
            let mut commands = Vec::with_capacity(params.commands.len());
            for (i, text) in params.commands.iter().enumerate() {
                match parse_command(text) {
                    Ok(c) => commands.push(c),
                    Err(e) => {
                        let mut error = RpcError::new(RpcErrorCode::MalformedCommand, format!("command {i}: {e}"));
                        error.index = Some(i);
                        return Err(error);
                    }
                }
            }
            let mut state = handle.state.lock();
            state.require_member(token)?;
            state.append(&auth::origin_of(token), &commands)
        })
    }

    pub fn poll_changes(&self, token: &str, params: &PollChangesParams) -> Result<PollChangesResult> {
        self.authed(token, |_| {
            let handle = self.sheet(&params.key)?;
            let mut state = handle.state.lock();
            state.require_member(token)?;
            if params.since_seq > state.last_seq() {
                return fail(RpcErrorCode::BadSeq, format!("since_seq beyond last seq {}", state.last_seq()));
            }
            let changes = state.log[params.since_seq as usize..]
                .iter()
                .zip(params.since_seq + 1..)
                .map(|(e, seq)| CommandEnvelope {
                    seq,
                    origin: e.origin.clone(),
                    command: e.command.clone(),
                    sheet: state.key.clone(),
                })
                .collect();
            state.members.insert(token.to_string(), self.now());
            Ok(PollChangesResult { changes, last_seq: state.last_seq() })
        })
    }

    pub fn list_active(&self, token: &str, params: &SheetParams) -> Result<ListActiveResult> {
        self.authed(token, |_| {
            let handle = self.sheet(&params.key)?;
            let state = handle.state.lock();
            state.require_member(token)?;
            let now = self.now();
            let sessions = self.sessions.lock();
            let users: BTreeSet<String> = state
                .members
                .iter()
                .filter(|(_, seen)| now.saturating_sub(**seen) <= self.config.presence_window_ms)
                .filter_map(|(t, _)| sessions.get(t))
                .filter(|s| now.saturating_sub(s.last_seen) <= self.config.session_ttl_ms)
                .map(|s| s.username.clone())
                .collect();
            Ok(ListActiveResult { users: users.into_iter().collect() })
        })
    }

    pub fn send_chat(&self, token: &str, params: &SendChatParams) -> Result<SendChatResult> {
        self.authed(token, |user| {
            let handle = self.sheet(&params.key)?;
            if params.text.trim().is_empty() {
                return fail(RpcErrorCode::EmptyMessage, "message is empty");
            }
            if params.text.chars().count() > MAX_CHAT_LEN || params.text.chars().any(char::is_control) {
                return fail(RpcErrorCode::BadMessage, format!("messages are one line of at most {MAX_CHAT_LEN} characters"));
            }
            let mut state = handle.state.lock();
            state.require_member(token)?;
            let message = ChatMessage {
                chat_seq: state.chat.len() as u64 + 1,
                username: user.to_string(),
                text: params.text.clone(),
                timestamp: self.now(),
            };
            if let Some(files) = &mut state.files {
                let mut line = serde_json::to_string(&message).expect("chat serializes");
                line.push('\n');
                files.chat.append(line.as_bytes()).map_err(internal)?;
            }
            let chat_seq = message.chat_seq;
            state.chat.push(message);
            Ok(SendChatResult { chat_seq })
        })
    }

    pub fn poll_chat(&self, token: &str, params: &PollChatParams) -> Result<PollChatResult> {
        self.authed(token, |_| {
            let handle = self.sheet(&params.key)?;
            let mut state = handle.state.lock();
            state.require_member(token)?;
            let last = state.chat.len() as u64;
            if params.since_chat_seq > last {
                return fail(RpcErrorCode::BadSeq, format!("since_chat_seq beyond last chat seq {last}"));
            }
            let messages = state.chat[params.since_chat_seq as usize..].to_vec();
            state.members.insert(token.to_string(), self.now());
            Ok(PollChatResult { messages, last_chat_seq: last })
        })
    }

    pub fn save_snapshot(&self, token: &str, params: &SnapshotParams) -> Result<()> {
        self.authed(token, |_| {
            let handle = self.sheet(&params.key)?;
            if !is_valid_name(&params.name) {
                return fail(RpcErrorCode::BadName, "snapshot names are 1-64 characters without whitespace");
            }
            let mut state = handle.state.lock();
            state.require_member(token)?;
            let text = serialize_sheet(&state.materialized);
            state.store_snapshot(&params.name, text)
        })
    }

    pub fn load_snapshot(&self, token: &str, params: &SnapshotParams) -> Result<LoadSnapshotResult> {
        self.authed(token, |_| {
            let handle = self.sheet(&params.key)?;
            if !is_valid_name(&params.name) {
                return fail(RpcErrorCode::BadName, "snapshot names are 1-64 characters without whitespace");
            }
            let state = handle.state.lock();
            state.require_member(token)?;
            match state.snapshots.get(&params.name) {
                Some(s) => Ok(LoadSnapshotResult { snapshot: s.clone() }),
                None => fail(RpcErrorCode::NoSuchSnapshot, format!("no snapshot {:?}", params.name)),
            }
        })
    }

    /// Replaces the sheet's content with an imported file, as one logged batch.
    pub fn import(&self, token: &str, params: &ImportParams) -> Result<ImportResult> {
        self.authed(token, |_| {
            let handle = self.sheet(&params.key)?;
            self.check_secret(&handle, &params.secret)?;
            let Ok(bytes) = STANDARD.decode(&params.content_base64) else {
                return fail(RpcErrorCode::BadParams, "content_base64 is not valid base64");
            };
            let saved = match self.importer.convert(&params.filename, &bytes, &params.options) {
                Ok(s) => s,
                Err(ImportError::NoAdapter(ext)) => return fail(RpcErrorCode::NoAdapter, format!("cannot import {ext:?} files")),
                Err(e) => return fail(RpcErrorCode::ImportFailed, e.to_string()),
            };
            let imported = parse_save_string(&saved).expect("importers produce valid save strings");
            let mut state = handle.state.lock();
            let current = state.materialized.clone();
            let targets: BTreeSet<CellAddress> =
                current.cells().map(|(a, _)| a).chain(imported.cells().map(|(a, _)| a)).collect();
            let commands: Vec<Command> = targets
                .into_iter()
                .filter(|a| !same_content(current.get_cell(*a), imported.get_cell(*a)))
                .map(|a| Command::set(a, imported.get_cell(a).clone()))
                .collect();
            let seqs = if commands.is_empty() { None } else { Some(state.append(&auth::origin_of(token), &commands)?) };
            state.members.insert(token.to_string(), self.now());
            Ok(ImportResult { snapshot: serialize_sheet(&state.materialized), seqs })
        })
    }

    pub fn schedule_job(&self, token: &str, params: &ScheduleJobParams) -> Result<()> {
        self.authed(token, |user| {
            self.sheet(&params.key)?;
            if params.key.author != user {
                return fail(RpcErrorCode::NotAuthor, "only the sheet author schedules jobs");
            }
            let spec = JobSpec {
                id: params.id.clone(),
                key: params.key.clone(),
                range: params.range,
                kind: params.kind.clone(),
                period_ms: params.period_ms,
                output_snapshot: params.output_snapshot.clone(),
            };
            self.add_job(spec)
        })
    }

    fn add_job(&self, spec: JobSpec) -> Result<()> {
        let now = self.now();
        let mut reg = self.registry.write();
        let key = spec.key.clone();
        let id = spec.id.clone();
        match reg.scheduler.schedule(spec, now) {
            Ok(()) => {}
            Err(JobError::Exists(id)) => return fail(RpcErrorCode::JobExists, format!("job {id:?} already exists")),
            Err(e) => return fail(RpcErrorCode::BadJob, e.to_string()),
        }
        if let Err(e) = self.persist_meta(&reg) {
            reg.scheduler.cancel(&key, &id);
            return Err(e);
        }
        Ok(())
    }

    pub fn list_jobs(&self, token: &str, params: &SheetParams) -> Result<ListJobsResult> {
        self.authed(token, |_| {
            let handle = self.sheet(&params.key)?;
            handle.state.lock().require_member(token)?;
            let reg = self.registry.read();
            let jobs = reg
                .scheduler
                .jobs()
                .filter(|j| j.spec.key == params.key)
                .map(|j| JobInfo {
                    id: j.spec.id.clone(),
                    range: j.spec.range,
                    kind: j.spec.kind.clone(),
                    period_ms: j.spec.period_ms,
                    output_snapshot: j.spec.output_snapshot.clone(),
                    next_due: j.next_due,
                    runs: j.runs,
                    last_result: j.last_result.clone(),
                })
                .collect();
            Ok(ListJobsResult { jobs })
        })
    }

    pub fn cancel_job(&self, token: &str, params: &CancelJobParams) -> Result<()> {
        self.authed(token, |user| {
            self.sheet(&params.key)?;
            if params.key.author != user {
                return fail(RpcErrorCode::NotAuthor, "only the sheet author cancels jobs");
            }
            let mut reg = self.registry.write();
            let Some(job) = reg.scheduler.cancel(&params.key, &params.id) else {
                return fail(RpcErrorCode::NoSuchJob, format!("no job {:?}", params.id));
            };
            if let Err(e) = self.persist_meta(&reg) {
                let spec = job.spec.clone();
                let _ = reg.scheduler.schedule(spec, job.next_due);
                return Err(e);
            }
            Ok(())
        })
    }

    /// Runs every job that is due now. Each reads one consistent snapshot of
    /// its sheet and appends a row to the sheet's output snapshot.
    pub fn run_due_jobs(&self) -> Vec<JobResult> {
        let now = self.now();
        let due = self.registry.write().scheduler.take_due(now);
        if due.is_empty() {
            return Vec::new();
        }
        let mut results = Vec::new();
        for spec in due {
            let handle = self.registry.read().sheets.get(&spec.key).cloned();
            let snapshot = handle.as_ref().map(|h| h.state.lock().materialized.clone());
            let result = autopilot::execute(&spec, now, snapshot.as_deref());
            if let Some(handle) = handle {
                let mut state = handle.state.lock();
                let mut out = match state.snapshots.get(&spec.output_snapshot).map(|s| parse_save_string(s)) {
                    Some(Ok(sheet)) => sheet,
                    _ => Sheet::new(SheetName::new(spec.output_snapshot.clone()).expect("validated snapshot name")),
                };
                append_result_row(&mut out, &result);
                // a storage failure here loses one row; the job still advances
                let _ = state.store_snapshot(&spec.output_snapshot, serialize_sheet(&out));
            }
            results.push((spec.key.clone(), result));
        }
        let mut reg = self.registry.write();
        for (key, result) in &results {
            reg.scheduler.note_result(key, result);
        }
        let _ = self.persist_meta(&reg);
        results.into_iter().map(|(_, r)| r).collect()
    }

    /// Forgets expired sessions.
    pub fn sweep_sessions(&self) -> usize {
        let now = self.now();
        let ttl = self.config.session_ttl_ms;
        let mut sessions = self.sessions.lock();
        let before = sessions.len();
        sessions.retain(|_, s| now.saturating_sub(s.last_seen) <= ttl);
        before - sessions.len()
    }

    /// Creates `author`'s sheet for a template, fills it and schedules its jobs.
    pub fn install_template(&self, author: &str, pack: &TemplatePack, secret: &str) -> Result<SheetKey> {
        let key = SheetKey::new(author, pack.name.clone());
        let secret_hash = auth::hash_secret(secret, self.config.hash_cost);
        let handle = {
            let mut reg = self.registry.write();
            if !reg.accounts.contains_key(author) {
                return fail(RpcErrorCode::NoSuchUser, format!("no account {author:?}"));
            }
            if reg.sheets.contains_key(&key) {
                return fail(RpcErrorCode::SheetExists, format!("{key} already exists"));
            }
            self.insert_sheet(&mut reg, &key, secret_hash)?
        };
        let commands: Vec<Command> = pack.sheet().cells().map(|(a, c)| Command::set(a, c.clone())).collect();
        handle.state.lock().append("template", &commands)?;
        for job in &pack.jobs {
            self.add_job(job.bind(key.clone()))?;
        }
        Ok(key)
    }

    /// The current materialized sheet, for tests and tools.
    pub fn materialized(&self, key: &SheetKey) -> Option<Arc<Sheet>> {
        let handle = self.registry.read().sheets.get(key).cloned()?;
        let sheet = handle.state.lock().materialized.clone();
        Some(sheet)
    }

    /// A snapshot sheet's stored save string.
    pub fn snapshot(&self, key: &SheetKey, name: &str) -> Option<String> {
        let handle = self.registry.read().sheets.get(key).cloned()?;
        let text = handle.state.lock().snapshots.get(name).cloned();
        text
    }

    pub fn sheet_keys(&self) -> Vec<SheetKey> {
        self.registry.read().sheets.keys().cloned().collect()
    }

    /// Replays the sheet's log from scratch and serializes the result.
    pub fn replayed(&self, key: &SheetKey) -> Option<String> {
        let handle = self.registry.read().sheets.get(key).cloned()?;
        let state = handle.state.lock();
        Some(serialize_sheet(&materialize(key, &state.log).expect("logged commands parse")))
    }

    /// SHA-256 over every piece of state, including sessions and presence.
    pub fn state_digest(&self) -> String {
        let reg = self.registry.read();
        let mut text = String::new();
        for (name, a) in &reg.accounts {
            text += &format!("account {name} {} {}\n", a.password_hash, a.created_at);
        }
        for (key, handle) in &reg.sheets {
            let state = handle.state.lock();
            text += &format!("sheet {key} {} {} {}\n", handle.secret_hash, handle.created_at, state.key);
            for (seq, e) in (1..).zip(&state.log) {
                text += &e.line(seq);
            }
            for m in &state.chat {
                text += &serde_json::to_string(m).expect("chat serializes");
                text.push('\n');
            }
            for (name, snap) in &state.snapshots {
                text += &format!("snapshot {name}\n{snap}");
            }
            let members: BTreeMap<String, Millis> =
                state.members.iter().map(|(t, seen)| (auth::origin_of(t), *seen)).collect();
            text += &format!("members {members:?}\n");
            text += &serialize_sheet(&state.materialized);
        }
        text += &serde_json::to_string(&reg.scheduler).expect("scheduler serializes");
        let sessions: BTreeMap<String, (String, Millis)> = self
            .sessions
            .lock()
            .iter()
            .map(|(t, s)| (auth::origin_of(t), (s.username.clone(), s.last_seen)))
            .collect();
        text += &format!("\nsessions {sessions:?}\n");
        auth::sha256_hex(text.as_bytes())
    }
}
