//! Simulation engines and analytic tools for random-access channels.
//!
//! Two models are covered:
//!
//! * a finite population of unslotted ALOHA users with one-packet buffers,
//!   exponential arrivals and backoffs and variable packet lengths
//!   ([`finite`]);
//! * slotted ALOHA with unit packets and a random, fixed-over-time number of
//!   users ([`slotted`]).
//!
//! Around them sit exact evaluators for the power-law bound distributions
//! ([`bounds`]), empirical tail estimation ([`tail`]) and throughput stability
//! classification ([`stability`]).
//!
//! The crate is `no_std` and only needs `alloc`; IO, configuration and the
//! command line live in the companion `aloha` crate.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bounds;
pub mod dist;
pub mod error;
pub mod finite;
pub mod quad;
pub mod rng;
pub mod slotted;
pub mod special;
pub mod stability;
pub mod tail;

pub use dist::{PacketDistribution, UserCountDistribution};
pub use error::{Error, Result};
pub use finite::{DelayTrace, FiniteModelParams, Instrumentation, SimulationOptions, StopRule};
pub use rng::RandomStream;
pub use slotted::{SlottedModelParams, SlottedQuantity, SlottedSample};
pub use stability::{StabilityVerdict, Verdict};
pub use tail::{CcdfPoints, TailFit};
