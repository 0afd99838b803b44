//! The authoritative gridmesh server.
//!
//! [`Store`] owns accounts, sheets, their sequenced command logs, chat,
//! snapshots and scheduled jobs. [`Service`] maps RPC envelopes onto it and
//! [`http`] exposes that over `POST /api`.

pub mod auth;
mod disk;
pub mod http;
pub mod service;
pub mod store;

pub use auth::HashCost;
pub use http::{router, spawn_ticker, RunningServer};
pub use service::Service;
pub use store::{ServerConfig, Store};
