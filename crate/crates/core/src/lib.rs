//! Desk-scale leveled CKKS engine with secure arrays and encrypted
//! finite-difference advection solvers.
//!
//! The parameters used throughout are toy parameters: nothing in this crate
//! offers cryptographic security.

pub mod ckks;
mod error;
pub mod polyring;
pub mod secure;
pub mod solvers;

pub use error::{Error, Result};
