//! Floating-point building blocks: compensated summation, double-double
//! arithmetic and the standard normal distribution.

mod compensated;
mod dd;
pub mod normal;

pub use compensated::{compensated_sum, NeumaierSum};
pub use dd::DoubleDouble;
