//! Finite-size guarantees and exact simulation for one-way hashing
//! entanglement distillation on Bell-diagonal inputs.

pub mod belldiag;
pub mod bounds;
pub mod codes;
pub mod entropy;
pub mod error;
pub mod gf2;
pub mod oracle;
mod par;
pub mod protocol;
pub mod simulator;

pub use error::{Error, Result};
