//! Two-player Hanabi with belief-based search.

pub mod belief;
pub mod cli;
pub mod engine;
pub mod learn;
pub mod error;
pub mod observe;
pub mod policy;
pub mod rng;
pub mod search;

pub use error::{Error, Result};
