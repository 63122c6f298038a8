//! Flatness-based robust reference generation.

pub mod brunovsky;
pub mod polymatrix;

pub use brunovsky::{DerivativePolicy, TransformedDisturbanceStack};
pub use polymatrix::{FlatParameterization, Normalization, PolyModel};
