//! Optimistic local edits over a server-confirmed base.
//!
//! `confirmed` is the replay of every envelope seen from the feed, in seq
//! order. `pending` holds this client's own commands not yet seen there. The
//! display is `pending` applied on top of `confirmed`.
//!
//! Own commands must reach the server in `pending` order, or FIFO echo
//! matching would fail. So a new edit is only sent right away when everything
//! before it has been acknowledged; otherwise it waits for the next tick,
//! which polls first (popping anything that landed despite a lost response)
//! and then resends whatever is still unsent as one batch.

use std::collections::VecDeque;

use gridmesh_core::command::apply_commands;
use gridmesh_core::import::infer_cell_type;
use gridmesh_core::rpc::*;
use gridmesh_core::{
    apply_command, parse_command, parse_save_string, serialize_command, serialize_sheet, CellAddress, CellContent,
    Command, Sheet,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::transport::{Transport, TransportError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClientError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Rpc(#[from] RpcError),
    #[error("could not connect: {0}")]
    ConnectFailed(String),
    #[error("malformed formula: {0}")]
    MalformedFormula(String),
    #[error("invalid cell content: {0}")]
    InvalidContent(String),
    #[error("unexpected server reply: {0}")]
    BadReply(String),
}

#[derive(Debug, Clone, PartialEq)]
struct Pending {
    id: u64,
    command: Command,
    text: String,
    acked: bool,
}

pub struct SyncClient<T> {
    transport: T,
    session: String,
    origin: String,
    key: SheetKey,
    confirmed: Sheet,
    confirmed_seq: u64,
    pending: VecDeque<Pending>,
    applied: Vec<u64>,
    next_id: u64,
    poll_interval_ms: u64,
    last_tick_failed: bool,
    rng: StdRng,
}

/// One RPC over `transport`, decoded into `T`.
pub fn rpc<T: DeserializeOwned>(
    transport: &impl Transport,
    method: &str,
    session: &str,
    params: impl Serialize,
) -> Result<T, ClientError> {
    let resp = transport.call(&RpcRequest::new(method, session, params))?;
    let value = resp.into_result()?;
    serde_json::from_value(value).map_err(|e| ClientError::BadReply(e.to_string()))
}

/// Parses what a user typed into a cell: `=...` is a formula, numbers are
/// numbers, anything else is text.
pub fn parse_input(input: &str) -> Result<CellContent, ClientError> {
    match input.strip_prefix('=') {
        Some(src) => CellContent::formula(src).map_err(|e| ClientError::MalformedFormula(e.to_string())),
        None => Ok(infer_cell_type(input)),
    }
}

impl<T: Transport> SyncClient<T> {
    /// Logs in and opens the sheet.
    pub fn connect(
        transport: T,
        credentials: &Credentials,
        key: SheetKey,
        secret: &str,
        poll_interval_ms: u64,
        seed: u64,
    ) -> Result<Self, ClientError> {
        let login: LoginResult = rpc(&transport, methods::LOGIN, "", credentials).map_err(connect_failed)?;
        let params = OpenSheetParams { key: key.clone(), secret: secret.to_string() };
        let opened: OpenSheetResult =
            rpc(&transport, methods::OPEN_SHEET, &login.session, params).map_err(connect_failed)?;
        let confirmed = parse_save_string(&opened.snapshot).map_err(|e| ClientError::BadReply(e.to_string()))?;
        Ok(Self {
            transport,
            session: login.session,
            origin: login.origin,
            key,
            confirmed,
            confirmed_seq: opened.last_seq,
            pending: VecDeque::new(),
            applied: Vec::new(),
            next_id: 0,
            poll_interval_ms,
            last_tick_failed: false,
            rng: StdRng::seed_from_u64(seed),
        })
    }

    pub fn key(&self) -> &SheetKey {
        &self.key
    }

    pub fn session(&self) -> &str {
        &self.session
    }

    pub fn origin(&self) -> &str {
        &self.origin
    }

    pub fn confirmed(&self) -> &Sheet {
        &self.confirmed
    }

    pub fn confirmed_seq(&self) -> u64 {
        self.confirmed_seq
    }

    /// Own commands not yet seen in the feed.
    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// Seqs applied into `confirmed` since connecting, in application order.
    pub fn applied_seqs(&self) -> &[u64] {
        &self.applied
    }

    /// The sheet as this user sees it.
    pub fn display(&self) -> Sheet {
        let mut sheet = self.confirmed.clone();
        apply_commands(&mut sheet, self.pending.iter().map(|p| &p.command));
        sheet
    }

    pub fn display_string(&self) -> String {
        serialize_sheet(&self.display())
    }

    /// Queues an edit and, when nothing earlier is unacknowledged, sends it.
    ///
    /// Only invalid content is an error. A failed send keeps the command
    /// pending for the next tick.
    pub fn local_edit(&mut self, addr: CellAddress, content: CellContent) -> Result<u64, ClientError> {
        let command = Command::set(addr, content);
        let text = serialize_command(&command);
        if parse_command(&text).is_err() {
            return Err(ClientError::InvalidContent(text));
        }
        let may_send = self.pending.iter().all(|p| p.acked);
        let id = self.next_id;
        self.next_id += 1;
        self.pending.push_back(Pending { id, command, text, acked: false });
        if may_send {
            let _ = self.flush();
        }
        Ok(id)
    }

    /// Like [`local_edit`](Self::local_edit) for raw user input.
    pub fn edit_input(&mut self, addr: CellAddress, input: &str) -> Result<u64, ClientError> {
        let content = parse_input(input)?;
        self.local_edit(addr, content)
    }

    /// Sends every unacknowledged pending command as one batch.
    fn flush(&mut self) -> Result<(), ClientError> {
        let unsent: Vec<String> = self.pending.iter().filter(|p| !p.acked).map(|p| p.text.clone()).collect();
        if unsent.is_empty() {
            return Ok(());
        }
        let params = SendCommandsParams { key: self.key.clone(), commands: unsent };
        let _: SendCommandsResult = rpc(&self.transport, methods::SEND_COMMANDS, &self.session, params)?;
        for p in self.pending.iter_mut() {
            p.acked = true;
        }
        Ok(())
    }

    /// Polls the feed, then retries unsent edits. Returns how many envelopes
    /// were applied.
    ///
    /// The tick fails only if the poll does, and then nothing visible changes.
    /// A failed retry just leaves the edits queued; either failure makes the
    /// next delay back off.
    pub fn tick(&mut self) -> Result<usize, ClientError> {
        let polled = self.poll();
        let flushed = if polled.is_ok() { self.flush() } else { Ok(()) };
        self.last_tick_failed = polled.is_err() || flushed.is_err();
        polled
    }

    fn poll(&mut self) -> Result<usize, ClientError> {
        let params = PollChangesParams { key: self.key.clone(), since_seq: self.confirmed_seq };
        let feed: PollChangesResult = rpc(&self.transport, methods::POLL_CHANGES, &self.session, params)?;
        let mut applied = 0;
        for env in feed.changes {
            if env.seq <= self.confirmed_seq {
                continue;
            }
            if env.seq != self.confirmed_seq + 1 {
                break;
            }
            let command = parse_command(&env.command).map_err(|e| ClientError::BadReply(e.to_string()))?;
            apply_command(&mut self.confirmed, &command);
            self.confirmed_seq = env.seq;
            self.applied.push(env.seq);
            applied += 1;
            if env.origin == self.origin && self.pending.front().is_some_and(|p| p.text == env.command) {
                self.pending.pop_front();
            }
        }
        Ok(applied)
    }

    /// Delay before the next tick: the poll interval, or after a failure a
    /// random wait between one and two intervals.
    pub fn next_delay_ms(&mut self) -> u64 {
        if self.last_tick_failed {
            (self.poll_interval_ms as f64 * self.rng.gen_range(1.0..2.0)) as u64
        } else {
            self.poll_interval_ms
        }
    }

    pub fn poll_interval_ms(&self) -> u64 {
        self.poll_interval_ms
    }

    pub fn active_users(&self) -> Result<Vec<String>, ClientError> {
        let params = SheetParams { key: self.key.clone() };
        let r: ListActiveResult = rpc(&self.transport, methods::LIST_ACTIVE, &self.session, params)?;
        Ok(r.users)
    }

    pub fn send_chat(&self, text: &str) -> Result<u64, ClientError> {
        let params = SendChatParams { key: self.key.clone(), text: text.to_string() };
        let r: SendChatResult = rpc(&self.transport, methods::SEND_CHAT, &self.session, params)?;
        Ok(r.chat_seq)
    }

    pub fn poll_chat(&self, since_chat_seq: u64) -> Result<PollChatResult, ClientError> {
        let params = PollChatParams { key: self.key.clone(), since_chat_seq };
        rpc(&self.transport, methods::POLL_CHAT, &self.session, params)
    }

    /// Any other RPC, authenticated as this client's session.
    pub fn call<R: DeserializeOwned>(&self, method: &str, params: impl Serialize) -> Result<R, ClientError> {
        rpc(&self.transport, method, &self.session, params)
    }
}

fn connect_failed(e: ClientError) -> ClientError {
    match e {
        ClientError::Transport(t) => ClientError::ConnectFailed(t.0),
        other => other,
    }
}
