//! Simulator of over-the-air federated learning in a cell-free MIMO uplink.
//!
//! All user devices transmit their local ridge-regression models
//! simultaneously in the analog domain; distributed access points combine
//! the superimposed signal with receive beamformers and a central unit sums
//! the results into the next global model. The crate implements the joint
//! per-round design of the receive combiner (closed-form quadratic
//! minimizer) and the transmit powers (virtual-queue controller with a
//! closed-form depressed-cubic update), plus fixed, channel-inversion and
//! offline-Lagrangian power baselines and an MRC combiner baseline.
//!
//! Start from [`config::SimulationConfig`] and [`sim::World`]; see the
//! `examples/` directory for one runnable program per capability and the
//! `otafl` binary for the figure-reproduction presets.

pub mod beamforming;
pub mod channel;
pub mod config;
pub mod error;
pub mod ota;
pub mod power;
pub mod report;
pub mod ridge;
pub mod rng;
pub mod sim;
