//! Actor-critic agents whose actions are saturated onto state-dependent
//! bounds from expert rules, and a room temperature control benchmark to
//! compare them.
//!
//! * [`nn`]: small dense networks with hand-written backpropagation, Adam
//!   and finite-difference checks.
//! * [`rules`]: action boxes, clipping and the comfort rule.
//! * [`agents`]: TD3 in classical, efficient (bounded with a penalized actor
//!   gradient) and reward-shaping flavours.
//! * [`env`]: first-order thermal room with synthetic weather.
//! * [`harness`]: training, evaluation and multi-run comparison.

pub mod agents;
pub mod cli;
pub mod env;
pub mod error;
pub mod gradcheck;
pub mod harness;
pub mod nn;
pub mod rules;

pub use error::{Error, Result};
