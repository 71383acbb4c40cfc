// SPDX-License-Identifier: Apache-2.0

//! Discrete-event model of a 5G core control plane in which an SDN
//! controller replaces the service communication proxy.
//!
//! Time-carrying types are generic over [`Scalar`]. The aliases below fix
//! the two instantiations used in practice: exact rational time for the
//! signaling runs and `f64` for the queueing sweeps.

pub mod controller;
pub mod flow_engine;
pub mod nf_model;
pub mod scalar;
pub mod scenarios;
pub mod simulator;

pub use scalar::Scalar;

/// Exact simulated seconds.
pub type ExactSeconds = num_rational::Rational64;
/// Floating-point simulated seconds.
pub type Seconds = f64;

pub type ExactFlowTable = flow_engine::FlowTable<ExactSeconds>;
pub type ExactPacket = flow_engine::Packet<ExactSeconds>;
