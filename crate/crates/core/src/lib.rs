pub mod agmn;
pub mod assoc;
pub mod cli;
pub mod distance;
pub mod error;
pub mod eval;
pub mod features;
pub mod graph;
pub mod image;
pub mod nn;
pub mod runtime;
pub mod skeleton;
pub mod synth;

pub use error::{Error, Result};
