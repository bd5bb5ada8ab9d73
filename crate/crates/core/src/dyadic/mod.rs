//! Random shifted dyadic grids, good and bad cubes, stopping forests built
//! from an accretive system, and the adapted martingale differences.
//!
//! Everything is one-dimensional. Grid positions are exact integers in units
//! of the finest side, so goodness tests never round. Stopping forests and
//! martingale differences work on a fixed subdivision of a top cube `Q₀`
//! into `2^depth` leaves, with functions given by their leaf values.

mod grid;
mod martingale;
mod stopping;

pub use grid::*;
pub use martingale::*;
pub use stopping::*;

#[cfg(test)]
mod tests;
