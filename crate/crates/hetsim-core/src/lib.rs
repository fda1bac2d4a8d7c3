//! Spectrum-allocation engine and packet-level simulator for downlink
//! heterogeneous networks with one licensed and one unlicensed RAT.
//!
//! The crate solves two joint user-association / spectrum-allocation
//! problems over interference patterns (subsets of APs sharing a band):
//! a conservative formulation in which every AP of a pattern is assumed
//! to always transmit, and a utilization-dependent formulation in which
//! service rates adapt to the probabilistically-active AP set. Both are
//! validated by a discrete-event packet simulator.

pub mod baseline;
pub mod conservative;
pub mod model;
pub mod optim;
pub mod par;
pub mod queueing;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod utilization;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("pattern enumeration budget exceeded: n = {n} APs, supported range is 1..=12 (2^n patterns are materialized)")]
    PatternBudget { n: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("infeasible start: {0}")]
    InfeasibleStart(String),
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
