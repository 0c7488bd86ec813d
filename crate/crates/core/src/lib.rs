pub mod agent;
pub mod energy;
pub mod envs;
pub mod error;
pub mod harness;
pub mod per;
pub mod quat;
pub mod replay;

pub use error::{Error, Result};
