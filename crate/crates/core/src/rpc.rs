//! JSON envelopes and method payloads for the `POST /api` endpoint.
//!
//! Requests look like `{"method": "...", "session": "...", "params": {...}}`.
//! Responses are `{"ok": true, "result": ...}` or
//! `{"ok": false, "error": {"code": "...", "message": "..."}}`.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::address::CellRange;
use crate::autopilot::{JobKind, JobResult};
use crate::clock::Millis;
use crate::import::ImportOptions;

/// Identifies a collaborative sheet: its author and group name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SheetKey {
    pub author: String,
    pub group: String,
}

impl SheetKey {
    pub fn new(author: impl Into<String>, group: impl Into<String>) -> Self {
        Self { author: author.into(), group: group.into() }
    }
}

impl fmt::Display for SheetKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.author, self.group)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpcRequest {
    pub method: String,
    #[serde(default)]
    pub session: String,
    #[serde(default)]
    pub params: Value,
}

impl RpcRequest {
    pub fn new(method: impl Into<String>, session: impl Into<String>, params: impl Serialize) -> Self {
        Self {
            method: method.into(),
            session: session.into(),
            params: serde_json::to_value(params).expect("params serialize"),
        }
    }
}

/// Application-level error names carried in `error.code`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RpcErrorCode {
    AuthRequired,
    BadCredentials,
    NoSuchUser,
    UsernameTaken,
    BadUsername,
    WeakPassword,
    SheetExists,
    BadGroupName,
    NoSuchSheet,
    AuthDenied,
    NotMember,
    NotAuthor,
    MalformedCommand,
    BadSeq,
    EmptyMessage,
    BadMessage,
    NoSuchSnapshot,
    BadName,
    BadParams,
    UnknownMethod,
    ImportFailed,
    NoAdapter,
    BadJob,
    JobExists,
    NoSuchJob,
    Internal,
}

impl fmt::Display for RpcErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpcError {
    pub code: RpcErrorCode,
    pub message: String,
    /// Position of the offending command in a rejected batch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
}

impl RpcError {
    pub fn new(code: RpcErrorCode, message: impl Into<String>) -> Self {
        Self { code, message: message.into(), index: None }
    }
}

impl fmt::Display for RpcError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for RpcError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpcResponse {
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<RpcError>,
}

impl RpcResponse {
    pub fn success(result: Value) -> Self {
        Self { ok: true, result: Some(result), error: None }
    }

    pub fn failure(error: RpcError) -> Self {
        Self { ok: false, result: None, error: Some(error) }
    }

    pub fn into_result(self) -> Result<Value, RpcError> {
        match (self.ok, self.error) {
            (true, _) => Ok(self.result.unwrap_or(Value::Null)),
            (false, Some(e)) => Err(e),
            (false, None) => Err(RpcError::new(RpcErrorCode::Internal, "error response without details")),
        }
    }
}

pub mod methods {
    pub const CREATE_ACCOUNT: &str = "create_account";
    pub const LOGIN: &str = "login";
    pub const LOGOUT: &str = "logout";
    pub const UPDATE_ACCOUNT: &str = "update_account";
    pub const CREATE_SHEET: &str = "create_sheet";
    pub const OPEN_SHEET: &str = "open_sheet";
    pub const SEND_COMMANDS: &str = "send_commands";
    pub const POLL_CHANGES: &str = "poll_changes";
    pub const LIST_ACTIVE: &str = "list_active";
    pub const SEND_CHAT: &str = "send_chat";
    pub const POLL_CHAT: &str = "poll_chat";
    pub const SAVE_SNAPSHOT: &str = "save_snapshot";
    pub const LOAD_SNAPSHOT: &str = "load_snapshot";
    pub const IMPORT: &str = "import";
    pub const SCHEDULE_JOB: &str = "schedule_job";
    pub const LIST_JOBS: &str = "list_jobs";
    pub const CANCEL_JOB: &str = "cancel_job";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Credentials {
    pub username: String,
    pub password: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoginResult {
    pub session: String,
    /// The id this session's commands carry in the change feed.
    pub origin: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateAccountParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_username: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_password: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSheetParams {
    pub group: String,
    pub secret: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenSheetParams {
    #[serde(flatten)]
    pub key: SheetKey,
    pub secret: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenSheetResult {
    pub snapshot: String,
    pub last_seq: u64,
}

/// Parameters naming just a sheet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheetParams {
    #[serde(flatten)]
    pub key: SheetKey,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SendCommandsParams {
    #[serde(flatten)]
    pub key: SheetKey,
    pub commands: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SendCommandsResult {
    pub first_seq: u64,
    pub last_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PollChangesParams {
    #[serde(flatten)]
    pub key: SheetKey,
    pub since_seq: u64,
}

/// A sequenced command as delivered by the change feed.
///
/// `origin` is an opaque id derived from the sending session, never the
/// session token itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandEnvelope {
    pub seq: u64,
    pub origin: String,
    pub command: String,
    pub sheet: SheetKey,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PollChangesResult {
    pub changes: Vec<CommandEnvelope>,
    pub last_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListActiveResult {
    pub users: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SendChatParams {
    #[serde(flatten)]
    pub key: SheetKey,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SendChatResult {
    pub chat_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PollChatParams {
    #[serde(flatten)]
    pub key: SheetKey,
    pub since_chat_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub chat_seq: u64,
    pub username: String,
    pub text: String,
    pub timestamp: Millis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PollChatResult {
    pub messages: Vec<ChatMessage>,
    pub last_chat_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotParams {
    #[serde(flatten)]
    pub key: SheetKey,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSnapshotResult {
    pub snapshot: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportParams {
    #[serde(flatten)]
    pub key: SheetKey,
    pub secret: String,
    pub filename: String,
    pub content_base64: String,
    #[serde(default)]
    pub options: ImportOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportResult {
    pub snapshot: String,
    /// Seq range of the replacing batch, absent when nothing changed.
    pub seqs: Option<SendCommandsResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleJobParams {
    #[serde(flatten)]
    pub key: SheetKey,
    pub id: String,
    pub range: CellRange,
    pub kind: JobKind,
    pub period_ms: u64,
    pub output_snapshot: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobInfo {
    pub id: String,
    pub range: CellRange,
    pub kind: JobKind,
    pub period_ms: u64,
    pub output_snapshot: String,
    pub next_due: Millis,
    pub runs: u64,
    pub last_result: Option<JobResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListJobsResult {
    pub jobs: Vec<JobInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CancelJobParams {
    #[serde(flatten)]
    pub key: SheetKey,
    pub id: String,
}
