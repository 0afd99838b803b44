//! Binaries for running a gridmesh server and the convergence simulator.
//!
//! `gridmesh-server` serves the RPC API and the web client. `gridmesh-sim`
//! drives many clients against one sheet and checks they converge; its engine
//! lives in [`sim`] so tests can run it directly.

pub mod sim;
