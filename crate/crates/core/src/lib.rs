//! Certified greedy reduced-basis model order reduction for affinely
//! parametric complex linear systems `A(μ) X(μ) = B(μ)`.

pub mod benchmarks;
pub mod error;
pub mod estimators;
pub mod greedy;
pub mod linalg;
pub mod report;
pub mod rom;
pub mod system;

pub use error::{Error, Result};
