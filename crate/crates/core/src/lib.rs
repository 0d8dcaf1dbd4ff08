#![no_std]
//! Analysis workbench for action representations in policy-gradient RL.
//!
//! Everything in this crate is pure computation over `alloc` collections:
//! closed-form continuous-control environments ([`envs`]), the actuation layer
//! that turns normalized policy actions into torques ([`actuation`]), a
//! manually differentiated Gaussian MLP policy ([`policy`]), the PPO trainer
//! ([`ppo`]), random-direction optimization surfaces ([`landscape`]) and
//! gradient-estimate quality statistics ([`gradsim`]).
//!
//! File formats, plotting, threading and the command-line front end live in
//! the `actlab` crate.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod actuation;
pub mod envs;
pub mod error;
pub mod exec;
pub mod gradsim;
pub mod landscape;
pub mod math;
pub mod policy;
pub mod ppo;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use policy::FlatParams;
