//! Lindstedt series for hyperbolic resonant tori: exact small-divisor
//! arithmetic, trigonometric-polynomial algebra, the direct order-by-order
//! recursion, the decorated-tree expansion with two resummation schemes,
//! Borel-transform machinery, and independent dynamical verification.

pub mod borel;
pub mod dressing;
pub mod fourier;
pub mod freq;
pub mod qi;
pub mod recursion;
pub mod trees;

pub use freq::{FrequencyVector, ScaleSequence};
pub use qi::{Qi, Rat};
