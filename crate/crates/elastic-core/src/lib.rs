//! Core library for a variable time-step reinforcement learning toolkit.
//!
//! A policy trained here picks, at every decision point, both a control vector
//! for a simulated car and the wall-clock duration that control is held. The
//! crate bundles everything needed to train and evaluate such policies:
//!
//! * [`net`], [`tape`], [`optim`]: dense networks, reverse-mode gradients and
//!   Adam-style optimization on flat `f64` parameter vectors,
//! * [`track`], [`car`], [`env`]: a deterministic kinematic car simulator over
//!   waypoint tracks with an elastic action duration,
//! * [`reward`], [`policy`], [`critic`], [`temp`], [`agent`]: the adaptive
//!   reward shaping and the soft actor-critic machinery built on top of it,
//! * [`replay`], [`trainer`], [`probe`]: the training loop, replay storage and
//!   a Lyapunov-style stability monitor,
//! * [`stats`], [`eval`]: evaluation rollouts and the paired statistics used
//!   to compare training methods.
//!
//! The crate is `no_std`-compatible (requires `alloc`); the default `std`
//! feature only switches float math from `libm` to the platform intrinsics.
//! Everything is deterministic given a seed: same inputs, same bits out.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(test)]
#[macro_use]
extern crate std;

pub mod agent;
pub mod car;
pub mod critic;
pub mod env;
pub mod eval;
pub(crate) mod math;
pub mod net;
pub mod optim;
pub mod policy;
pub mod probe;
pub mod replay;
pub mod reward;
pub mod rng;
pub mod stats;
pub mod tape;
pub mod temp;
pub mod track;
pub mod trainer;
