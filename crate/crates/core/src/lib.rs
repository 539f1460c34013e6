#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod gate;
pub mod medium;
pub mod qber;
pub mod rng;
pub mod store;
pub mod transport;

pub use error::{Error, Result};
