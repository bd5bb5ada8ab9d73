//! Quadrature configuration and fixed Gauss-Legendre rules.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Resolution knobs shared by every square-function evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Gauss-Legendre panels per active t-band (log-t variable).
    pub t_steps_per_band: usize,
    /// Tree depth used for integrals against a measure.
    pub y_resolution_depth: usize,
    pub rel_tol: f64,
    /// Largest generation included in band sums.
    pub trunc_generation: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            t_steps_per_band: 16,
            y_resolution_depth: 10,
            rel_tol: 1e-3,
            trunc_generation: 40,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_steps_per_band == 0 || self.y_resolution_depth == 0 || self.trunc_generation == 0 {
            return Err(Error::InvalidParams(
                "quadrature step counts and depths must be positive".into(),
            ));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol <= 0.1) {
            return Err(Error::InvalidParams(format!(
                "rel_tol {} outside (0, 0.1]",
                self.rel_tol
            )));
        }
        Ok(())
    }
}

/// Five-point Gauss-Legendre nodes and weights on [-1, 1].
const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// Three-point rule, used on uniform leaves.
const GL3: [(f64, f64); 3] = [
    (0.0, 8.0 / 9.0),
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

pub fn gauss5<F: FnMut(f64) -> f64>(a: f64, b: f64, mut f: F) -> f64 {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    GL5.iter().map(|&(x, w)| w * f(c + h * x)).sum::<f64>() * h
}

pub fn gauss3<F: FnMut(f64) -> f64>(a: f64, b: f64, mut f: F) -> f64 {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    GL3.iter().map(|&(x, w)| w * f(c + h * x)).sum::<f64>() * h
}

/// Composite five-point rule over `panels` equal panels.
pub fn composite_gauss5<F: FnMut(f64) -> f64>(a: f64, b: f64, panels: usize, mut f: F) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let lo = a + h * i as f64;
            gauss5(lo, lo + h, &mut f)
        })
        .sum()
}

/// `∫_lo^hi g(t) dt/t` computed in the variable `s = ln t`.
pub fn log_t_integral<F: FnMut(f64) -> f64>(lo: f64, hi: f64, panels: usize, mut g: F) -> f64 {
    if !(lo > 0.0) || hi <= lo {
        return 0.0;
    }
    composite_gauss5(lo.ln(), hi.ln(), panels, |s| g(s.exp()))
}
