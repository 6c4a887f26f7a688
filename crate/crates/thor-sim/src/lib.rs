//! Desk-scale simulator of a value-dependent matrix-multiply timing channel.
//!
//! The TMUL unit of a recent server CPU skips multiplier lanes whose
//! operands are zero, and its power/frequency management makes that data
//! dependence visible to anyone who can time requests. This crate models
//! that microarchitecture ([`sim`]), a matmul service with a secret weight
//! sparsity mask ([`victim`]), a remote attacker that recovers the mask
//! from timing alone ([`attacker`]), a warm-keeper countermeasure with its
//! power cost ([`countermeasure`], [`power`]), and an experiment harness
//! that turns all of it into repeatable reports ([`harness`], [`report`]).
//!
//! Everything is deterministic given a config and a seed; there is no wall
//! clock anywhere, only simulated nanoseconds.

pub mod attacker;
pub mod config;
pub mod countermeasure;
pub mod error;
pub mod harness;
pub mod power;
pub mod report;
pub mod sim;
pub mod tile;
pub mod victim;

pub use config::FullConfig;
pub use error::{Result, ThorError};
pub use sim::{AmxSim, PerformanceState, TimingModel, TimingModelConfig};
pub use tile::{effective_sparsity, TilePattern};
pub use victim::{TimedEndpoint, Victim, VictimConfig};
