//! Extended target tracking with NURBS surface shape models.

pub mod error;
pub mod eval;
pub mod measurement;
pub mod motion;
pub mod nurbs;
pub mod shape;
pub mod sim;
pub mod tracker;
pub mod ukf;

pub use error::{Error, Result};
