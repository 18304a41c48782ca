//! A desk-scale quantum task kernel.
//!
//! The crate schedules quantum tasks over simulated multi-qubit processors,
//! maps circuits onto processor topologies with a fidelity-aware pass,
//! co-executes disjoint circuits as transactions, and keeps processors above
//! quality thresholds with an online calibration service. A density-matrix
//! simulator provides the noisy backend.

pub mod calibration;
pub mod circuit;
pub mod harness;
pub mod linalg;
pub mod mapper;
pub mod noisy_sim;
pub mod qpu;
pub mod scheduler;
