//! Constructive objects for square functions on non-doubling measures.
//!
//! The crate materializes a four-child Cantor-type measure on `[0, 1]`, two
//! explicit square-function kernels (a band-limited bump kernel on the Cantor
//! measure and a log-product kernel on Lebesgue measure), exact-arithmetic
//! equally spaced set families, and random dyadic grid / stopping-time
//! machinery. Everything is truncated at a finite generation, and every
//! quantity that only has an asymptotic meaning is exposed as a series or a
//! measured constant.
//!
//! Module map:
//!
//! * [`measures`]: Cantor measure, Lebesgue and point-mass measures, exact mass queries.
//! * [`kernels`]: kernel abstraction, the two concrete kernels, condition samplers.
//! * [`sqfn`]: conical and vertical square functions, norm series, testing functionals.
//! * [`logproduct`]: the log-product function with exact rational set arithmetic.
//! * [`dyadic`]: shifted dyadic grids, goodness, stopping forests, martingale differences.
//! * [`experiments`]: named experiments, configuration and report emission.

pub mod dyadic;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod logproduct;
pub mod measures;
pub mod pinned;
pub mod quad;
pub mod rng;
pub mod sqfn;

pub use error::{Error, Result};
