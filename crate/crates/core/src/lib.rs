//! Map-free multi-agent LiDAR navigation: a small autodiff engine, the
//! recurrent attention policy, a perturbed 2D simulator with local replay,
//! heading-stability rewards, a PPO trainer, and an evaluation harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod env;
pub mod error;
pub mod eval;
pub mod net;
pub mod rewards;
pub mod sim;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
