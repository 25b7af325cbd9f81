pub mod classify;
pub mod config;
pub mod enroll;
pub mod error;
pub mod eval;
pub mod features;
pub mod label;
pub mod pipeline;
pub mod seed;
pub mod simgen;
pub mod trace;
pub mod turns;

pub use error::{Error, Result};
