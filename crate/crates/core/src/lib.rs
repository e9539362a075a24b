//! Downlink transmit precoding for a LEO satellite serving ground users
//! with delayed channel state information.
//!
//! The crate is organised bottom-up:
//!
//! - [`orbits`]: circular-orbit constellation propagation, slant geometry and
//!   the distance-threshold serving-satellite handover rule.
//! - [`channel`]: time-correlated Rician UPA channels with Doppler and
//!   free-space path loss.
//! - [`rate`]: SINR and sum achievable rate, plus the LMMSE lower-bound
//!   machinery used as numerical oracles.
//! - [`env`]: the delayed-observation MDP with augmented observations and
//!   quantized rewards.
//! - [`nn`]: dense MLPs with hand-written backprop, Adam and Polyak averaging.
//! - [`agent`]: the DDPG training loop.
//! - [`baselines`]: zero-forcing, MRT and random precoders.
//! - [`config`], [`experiment`] and [`cli`]: run orchestration and CSV export.

pub mod agent;
pub mod baselines;
pub mod channel;
pub mod check;
pub mod cli;
pub mod config;
pub mod constants;
pub mod env;
mod error;
pub mod experiment;
pub mod linalg;
pub mod nn;
pub mod orbits;
pub mod output;
pub mod rate;
pub mod rng;

pub use error::{Error, Result};
