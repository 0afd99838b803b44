//! Shared generators and reference implementations for gridmesh's test suites.

pub mod gen;
pub mod ols;
pub mod oracle;
