//! Routes JSON envelopes to [`Store`] operations.

use std::sync::Arc;

use gridmesh_core::rpc::{methods, RpcError, RpcErrorCode, RpcRequest, RpcResponse};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::store::Store;

#[derive(Clone)]
pub struct Service {
    store: Arc<Store>,
}

fn params<T: DeserializeOwned>(value: &Value) -> Result<T, RpcError> {
    serde_json::from_value(value.clone()).map_err(|e| RpcError::new(RpcErrorCode::BadParams, e.to_string()))
}

fn reply<T: Serialize>(result: Result<T, RpcError>) -> Result<Value, RpcError> {
    result.map(|v| serde_json::to_value(v).expect("results serialize"))
}

impl Service {
    pub fn new(store: Arc<Store>) -> Self {
        Self { store }
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn dispatch(&self, req: &RpcRequest) -> RpcResponse {
        match self.call(req) {
            Ok(v) => RpcResponse::success(v),
            Err(e) => RpcResponse::failure(e),
        }
    }

    fn call(&self, req: &RpcRequest) -> Result<Value, RpcError> {
        let s = &self.store;
        let t = req.session.as_str();
        let p = &req.params;
        match req.method.as_str() {
            methods::CREATE_ACCOUNT => reply(s.create_account(&params(p)?)),
            methods::LOGIN => reply(s.login(&params(p)?)),
            methods::LOGOUT => reply(s.logout(t)),
            methods::UPDATE_ACCOUNT => reply(s.update_account(t, &params(p)?)),
            methods::CREATE_SHEET => reply(s.create_sheet(t, &params(p)?)),
            methods::OPEN_SHEET => reply(s.open_sheet(t, &params(p)?)),
            methods::SEND_COMMANDS => reply(s.send_commands(t, &params(p)?)),
            methods::POLL_CHANGES => reply(s.poll_changes(t, &params(p)?)),
            methods::LIST_ACTIVE => reply(s.list_active(t, &params(p)?)),
            methods::SEND_CHAT => reply(s.send_chat(t, &params(p)?)),
            methods::POLL_CHAT => reply(s.poll_chat(t, &params(p)?)),
            methods::SAVE_SNAPSHOT => reply(s.save_snapshot(t, &params(p)?)),
            methods::LOAD_SNAPSHOT => reply(s.load_snapshot(t, &params(p)?)),
            methods::IMPORT => reply(s.import(t, &params(p)?)),
            methods::SCHEDULE_JOB => reply(s.schedule_job(t, &params(p)?)),
            methods::LIST_JOBS => reply(s.list_jobs(t, &params(p)?)),
            methods::CANCEL_JOB => reply(s.cancel_job(t, &params(p)?)),
            other => Err(RpcError::new(RpcErrorCode::UnknownMethod, format!("no method {other:?}"))),
        }
    }

    /// Parses and answers a raw request body. `None` means the body is not an
    /// envelope at all.
    pub fn handle_json(&self, body: &[u8]) -> Option<RpcResponse> {
        let req: RpcRequest = serde_json::from_slice(body).ok()?;
        Some(self.dispatch(&req))
    }
}
