//! Core algorithms for the "I Know How" (IKH) driving stack.
//!
//! The crate is split along the data flow of the system:
//!
//! * [`track`] — parametric centerline geometry (straights + arcs), lane-frame
//!   projection, sector bookkeeping and spawn sampling.
//! * [`sim`] — a kinematic bicycle simulator with scripted traffic, fixed-layout
//!   observations and a shaped lane/speed reward.
//! * [`net`] — a small MLP with hand-written backprop, Adam, soft target
//!   updates and a binary checkpoint codec.
//! * [`sac`] — soft actor-critic over a generic [`sac::Environment`] trait,
//!   with a FIFO replay buffer and a deterministic training driver.
//! * [`compose`] — the IKH layer: a frozen set of skill policies whose actions
//!   are blended by a learned master policy through a normalized weighted sum.
//! * [`eval`] — episode rollouts, sector-progress metrics, spawn heatmaps and
//!   weight traces.
//!
//! Everything here is `no_std + alloc`; file formats, configuration parsing
//! and the command-line front end live in the companion `ikh` crate.
//!
//! Determinism is a first-class requirement: all stochastic code draws from
//! explicitly seeded ChaCha8 streams (see [`rng`]), and repeated runs with the
//! same seeds produce bit-identical parameters, observations and logs.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod compose;
mod error;
pub mod eval;
pub(crate) mod math;
pub mod net;
pub mod rng;
pub mod sac;
pub mod sim;
pub mod track;

pub use error::Error;
