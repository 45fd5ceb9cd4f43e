//! Deterministic turn-based combat between two ragdolls.
//!
//! - [`sim`]: fixed-timestep physics, injury and dismemberment
//! - [`rules`]: match settings, turns, disqualification, replays
//! - [`proto`]: line protocol, TCP server and WebSocket gateway
//! - [`env`]: client, observations, rewards and task presets
//! - [`harness`]: agents, baseline search, self-play pools, cross-play
//!   and throughput benchmarks

pub mod env;
pub mod harness;
pub mod math;
pub mod proto;
pub mod rules;
pub mod sim;
