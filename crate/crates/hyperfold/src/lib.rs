//! Numerical audit toolkit for oscillatory-integral estimates attached to
//! distance phases between geodesics in the hyperbolic upper half-space.

pub mod error;
pub mod halfspace;
pub mod harness;
pub mod kernel;
pub mod oscillatory;
pub mod phase;
pub mod special;

pub use error::{Error, Result};
