//! Analysis and simulation of adaptive joint source-channel coding over
//! finite-alphabet two-way channels.

pub mod achievability;
pub mod coded;
pub mod error;
pub mod markov;
pub mod models;
pub mod prob;
pub mod rd;
pub mod region;
pub mod schema;
pub mod sim;

pub use error::{Error, Result};
