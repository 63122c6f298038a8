//! Higher-order disturbance observers and flatness-based robust tracking
//! control for single-input LTI plants, with a two-mass-spring-damper
//! simulation harness.

pub mod acceptance;
pub mod controller;
pub mod error;
pub mod flat;
pub mod model;
pub mod observer;
pub mod plant;
pub mod reference;
pub mod rk4;

pub use error::{Error, Result};
