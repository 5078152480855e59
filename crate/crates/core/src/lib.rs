//! Indoor localization from received signal strength differences, optionally assisted by
//! one time-difference-of-arrival measurement.

pub mod channel;
pub mod error;
pub mod fingerprint;
pub mod geometry;
pub mod harness;
pub mod mobility;
pub mod receiver;
pub mod search;
pub mod solver;

pub use error::{Error, Result};
