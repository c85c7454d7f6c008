//! Superhedging under proportional transaction costs in a multi-asset
//! Black–Scholes market, with exact rational polyhedral geometry.

pub mod config;
pub mod error;
pub mod fixtures;
pub mod market;
pub mod portfolio;
pub mod pricing;
pub mod solvency;
pub mod superhedge;

pub use error::{Error, Result};
