//! A polling client for gridmesh sheets.
//!
//! [`SyncClient`] keeps a sheet in step with the server by polling its change
//! feed at a fixed interval, showing local edits immediately and reconciling
//! them with the server's order when they come back. [`Transport`] decides how
//! requests travel: [`Http`] for a real server, [`InProcess`] for tests and
//! simulation, [`Lossy`] to inject failures.

mod client;
pub mod transport;

pub use client::{parse_input, rpc, ClientError, SyncClient};
pub use transport::{Http, InProcess, Lossy, Transport, TransportError};
