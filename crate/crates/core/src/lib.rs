//! Zero-smoothness Besov seminorms of functions sampled on dyadic grids,
//! Lorentz-space norms of their coefficient sequences, and the atomic
//! constructions used to compare the two.

pub mod analysis;
pub mod constructions;
pub mod error;
pub mod grid;
pub mod lorentz;
pub mod oracle;
pub mod smoothness;

pub use error::{Error, Result};
