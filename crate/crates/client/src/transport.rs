//! How requests reach a server.

use std::sync::{Arc, Mutex};
use std::time::Duration;

use gridmesh_core::rpc::{RpcRequest, RpcResponse};
use gridmesh_server::Service;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use thiserror::Error;

/// The request or its response was lost; the call may or may not have run.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("transport failure: {0}")]
pub struct TransportError(pub String);

pub trait Transport: Send + Sync {
    fn call(&self, req: &RpcRequest) -> Result<RpcResponse, TransportError>;
}

impl<T: Transport + ?Sized> Transport for Arc<T> {
    fn call(&self, req: &RpcRequest) -> Result<RpcResponse, TransportError> {
        (**self).call(req)
    }
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn call(&self, req: &RpcRequest) -> Result<RpcResponse, TransportError> {
        (**self).call(req)
    }
}

/// Calls a [`Service`] in the same process, still through the JSON wire form.
#[derive(Clone)]
pub struct InProcess {
    service: Service,
}

impl InProcess {
    pub fn new(service: Service) -> Self {
        Self { service }
    }
}

impl Transport for InProcess {
    fn call(&self, req: &RpcRequest) -> Result<RpcResponse, TransportError> {
        let body = serde_json::to_vec(req).expect("requests serialize");
        let resp = self.service.handle_json(&body).expect("a serialized request parses");
        let wire = serde_json::to_vec(&resp).expect("responses serialize");
        Ok(serde_json::from_slice(&wire).expect("responses parse"))
    }
}

/// `POST /api` over HTTP.
pub struct Http {
    agent: ureq::Agent,
    url: String,
}

impl Http {
    /// `server` is `host:port` or a full `http://` base URL.
    pub fn new(server: &str, timeout: Duration) -> Self {
        let base = if server.contains("://") { server.to_string() } else { format!("http://{server}") };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { agent, url: format!("{}/api", base.trim_end_matches('/')) }
    }
}

impl Transport for Http {
    fn call(&self, req: &RpcRequest) -> Result<RpcResponse, TransportError> {
        let mut resp = self.agent.post(&self.url).send_json(req).map_err(|e| TransportError(e.to_string()))?;
        if resp.status() != 200 {
            return Err(TransportError(format!("HTTP status {}", resp.status())));
        }
        resp.body_mut().read_json().map_err(|e| TransportError(e.to_string()))
    }
}

/// Loses requests and responses at random, for exercising retries.
///
/// Each call is dropped with probability `drop_rate`, half the time before the
/// server sees it and half the time after it has run.
pub struct Lossy<T> {
    inner: T,
    drop_rate: f64,
    rng: Mutex<StdRng>,
}

impl<T> Lossy<T> {
    pub fn new(inner: T, drop_rate: f64, seed: u64) -> Self {
        assert!((0.0..1.0).contains(&drop_rate), "drop rate must be in [0, 1)");
        Self { inner, drop_rate, rng: Mutex::new(StdRng::seed_from_u64(seed)) }
    }
}

impl<T: Transport> Transport for Lossy<T> {
    fn call(&self, req: &RpcRequest) -> Result<RpcResponse, TransportError> {
        let (drop, before) = {
            let mut rng = self.rng.lock().expect("rng lock");
            (rng.gen_bool(self.drop_rate), rng.gen_bool(0.5))
        };
        if drop && before {
            return Err(TransportError("request lost".into()));
        }
        let resp = self.inner.call(req)?;
        if drop {
            return Err(TransportError("response lost".into()));
        }
        Ok(resp)
    }
}
