//! Deterministic desk-scale simulator and analysis library for
//! semi-synchronous personalized federated learning over a modeled
//! wireless edge network.
//!
//! The crate is split along the moving parts of such a system:
//!
//! - [`wireless`]: uplink rates, channel draws, transmission and
//!   computation delays of the user equipments (UEs).
//! - [`bandwidth`]: the family of optimal per-round bandwidth
//!   allocations (rate/frequency equalization, Lambert-W lower bounds)
//!   and plan validity checks.
//! - [`scheduling`]: binary participation matrices, relative
//!   participation frequencies, the greedy scheduler and staleness
//!   window checks.
//! - [`analysis`]: convergence-bound calculus (smoothness/variance
//!   constants, stationarity bound, step-size condition, horizon
//!   estimators).
//! - [`learning`]: synthetic tasks (quadratic and label-skewed
//!   classification), exact and stochastic meta-gradients, global
//!   aggregation.
//! - [`engine`]: the discrete-event executor for semi-synchronous,
//!   synchronous and asynchronous training runs.
//!
//! Everything in this crate is deterministic given a master seed: all
//! randomness is derived through counter-based per-(round, UE) streams
//! (see [`rng`]), so results are independent of evaluation order and
//! worker count. The crate is `no_std`-compatible (with `alloc`); file
//! formats and orchestration live in the companion CLI crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analysis;
pub mod bandwidth;
pub mod engine;
pub mod error;
pub mod learning;
pub mod rng;
pub mod scheduling;
pub mod wireless;

pub use error::{Error, Result};
