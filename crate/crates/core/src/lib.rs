//! Simulation and control library for stable online computation offloading
//! in a multi-device mobile-edge network.
//!
//! The per-frame decision combines a learned actor ([`actor`]) that proposes
//! binary offloading decisions with an exact resource-allocation solver
//! ([`resalloc`]) that scores them under Lyapunov weights ([`sched`]).
//! [`baselines`] holds the comparison policies, [`oracles`] independent
//! references for testing, and [`harness`] the experiment loops.

pub mod actor;
pub mod baselines;
pub mod config;
pub mod env;
pub mod error;
pub mod harness;
pub mod lambert;
pub mod oracles;
pub mod resalloc;
pub mod rng;
pub mod sched;

pub use config::SimConfig;
pub use error::{OffloadError, Result};
pub use resalloc::{OffloadDecision, ResourceAllocation};
