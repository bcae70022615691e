//! Analysis, optimization and simulation of slotted random-access MAC
//! protocols whose users remember the last few slots.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod cli;
pub mod error;
pub mod markov;
pub mod model;
mod nelder_mead;
pub mod optimize;
pub mod protocols;
pub mod sim;
pub mod wlan;

pub use error::{Error, Result};
