//! Topology laboratory for multi-layer satellite constellations.
//!
//! The crate builds Walker-delta layers, propagates them on a shared time
//! grid, enumerates feasible inter-layer connections (ILCs), deploys a
//! small ILC budget with several strategies, and measures the result:
//! average path length (exact breadth-first search and a closed-form
//! degree-moment model), throughput proxies, link handovers, and a
//! city-to-city traffic replay.

pub mod aplmodel;
pub mod constellation;
pub mod evaluation;
pub mod linkmodel;
pub mod optimizer;
pub mod topology;
pub mod traffic;

/// Crate version, for run manifests and reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
