//! Desk-scale simulator of an outdoor hexagonal LTE cluster with stochastic
//! network faults, together with three self-healing agents: uniform random,
//! first-in-first-out, and a deep Q-network trained online with experience
//! replay.
//!
//! The crate is organised bottom-up:
//!
//! - [`radio`]: cluster geometry, COST231-Hata link budget, SINR, mobility,
//!   equal-share throughput.
//! - [`fault`]: fault sampling, the alarm register and the radio effect of
//!   each fault.
//! - [`mdp`]: the fault-management MDP wrapped around the two modules above.
//! - [`nn`]: a small dense network with hand-written backprop and Adam.
//! - [`dqn`]: epsilon-greedy deep Q-learning over the MDP.
//! - [`baseline`]: the random and FIFO comparison policies.
//! - [`metrics`]: CDFs, percentiles and run summaries.
//! - [`config`] and [`experiment`]: configuration files and the experiment
//!   grid runner used by the `son-sim` binary.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod config;
pub mod dqn;
pub mod error;
pub mod experiment;
pub mod fault;
pub mod mdp;
pub mod metrics;
pub mod nn;
pub mod radio;
pub mod rng;

pub use error::{Error, Result};
