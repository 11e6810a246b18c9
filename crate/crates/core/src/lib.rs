pub mod arrangement;
pub mod combinatorics;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod gopt;
pub mod network;
pub mod verifier;

pub use error::{Error, Result};
