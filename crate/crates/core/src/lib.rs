pub mod error;
pub mod ddpg;
pub mod envs;
pub mod geometry;
pub mod harness;
pub mod nets;
pub mod policies;

pub use error::{Error, Result};
