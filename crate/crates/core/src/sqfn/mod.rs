//! Conical and vertical square functions.
//!
//! `S_α f(x)² = ∬_{|y-x|<αt} |θ_t f(y)|² dμ(y) dt/t^{m+1}` and
//! `V f(x)² = ∫ |θ_t f(x)|² dt/t`, evaluated pointwise, as per-generation
//! norm series on the Cantor measure, and through the testing, L² and
//! weak-(1,1) functionals.
//!
//! For the Cantor kernel `θ_t f` is constant on each active region
//! `(I₂ ∪ I₃) × [L_I/2, L_I]`, so `S_α f(x)²` reduces to a sum over the
//! intervals containing `x` of `a_I² ∫ μ((I₂∪I₃) ∩ B(x, αt)) dt/t^{m+1}`.

mod functionals;
mod series;

pub use functionals::*;
pub use series::*;

use serde::{Deserialize, Serialize};

use crate::kernels::{bump, theta_in_band, Band, InputFn, KernelKind, KernelSpec, BUMP_LIPSCHITZ};
use crate::measures::{CantorMeasure, MeasureHandle, Node};
use crate::quad::{self, QuadratureConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub alpha: f64,
    pub m: f64,
}

impl ConeSpec {
    pub fn new(alpha: f64, m: f64) -> Result<Self> {
        let c = Self { alpha, m };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 1.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParams(format!("aperture {} must be at least 1", self.alpha)));
        }
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(Error::InvalidParams(format!("exponent m = {} must be positive", self.m)));
        }
        Ok(())
    }
}

/// Gauss panels for a `t`-band `[lo, hi]`: the configured count for one
/// octave plus one more per additional octave.
pub(crate) fn band_panels(lo: f64, hi: f64, quad: &QuadratureConfig) -> usize {
    let octaves = (hi / lo).log2().max(1.0).ceil() as usize;
    quad.t_steps_per_band + octaves - 1
}

/// Intervals `I` containing `x` that carry an active band, root first,
/// truncated at `trunc_generation`.
pub(crate) fn cantor_ancestors(mu: &CantorMeasure, x: f64, quad: &QuadratureConfig) -> Vec<Band> {
    let mut out = Vec::new();
    let mut node = mu.root();
    if !node.contains(x) {
        return out;
    }
    loop {
        let generation = mu.params.start_gen + node.level;
        if mu.is_leaf(&node) || generation > quad.trunc_generation {
            break;
        }
        let l = mu.level_geometry(node.level).outer_length * node.len;
        out.push(Band { lo: 0.5 * l, hi: l, node: Some(node), generation });
        match mu.children(&node).into_iter().find(|k| k.contains(x)) {
            Some(k) => node = k,
            None => break,
        }
    }
    out
}

/// `a_I = θ_t f` on the active region of `I`.
pub(crate) fn node_coefficient(
    kernel: &KernelSpec,
    measure: &MeasureHandle,
    f: &InputFn<'_>,
    band: &Band,
    quad: &QuadratureConfig,
) -> Result<f64> {
    let node = band.node.expect("cantor band without node");
    if let (KernelKind::Cantor(mu), MeasureHandle::Cantor(_)) = (&kernel.kind, measure) {
        let phi = |y: f64| bump((y - node.mid()) / node.len);
        let lip = BUMP_LIPSCHITZ / node.len;
        let tol = quad.rel_tol * 1e-3;
        let scale = node.len.powf(mu.m());
        match *f {
            InputFn::Constant(c) => return Ok(c * mu.integrate_lipschitz(&node, &phi, lip, tol) / scale),
            InputFn::CantorLeaves { level, values, .. } => {
                if level <= node.level {
                    let v = f.value(node.mid());
                    return Ok(v * mu.integrate_lipschitz(&node, &phi, lip, tol) / scale);
                }
                // leaves of `f` under `node`, in order
                let span = 4usize.pow((level - node.level) as u32);
                let first = leaf_index(mu, &node) * span;
                let mut leaves = vec![node];
                for _ in node.level..level {
                    leaves = leaves.iter().flat_map(|n| mu.children(n)).collect();
                }
                let total: f64 = leaves
                    .iter()
                    .enumerate()
                    .map(|(j, leaf)| {
                        let v = values.get(first + j).copied().unwrap_or(0.0);
                        if v == 0.0 { 0.0 } else { v * mu.integrate_lipschitz(leaf, &phi, lip, tol) }
                    })
                    .sum();
                return Ok(total / scale);
            }
            _ => {}
        }
    }
    theta_in_band(kernel, measure, f, band, band.hi, node.mid(), quad)
}

/// Left-to-right index of `node` among the intervals of its level.
pub(crate) fn leaf_index(mu: &CantorMeasure, node: &Node) -> usize {
    let mut index = 0usize;
    let mut cur = mu.root();
    let x = node.mid();
    while cur.level < node.level {
        let kids = mu.children(&cur);
        let j = kids.iter().position(|k| k.contains(x)).unwrap_or(0);
        index = index * 4 + j;
        cur = kids[j];
    }
    index
}

/// `∫_{L/2}^{L} μ((I₂∪I₃) ∩ B(x, αt)) dt/t^{m+1}` for one band.
pub(crate) fn cone_band_weight(mu: &CantorMeasure, band: &Band, x: f64, alpha: f64, m: f64, quad: &QuadratureConfig) -> f64 {
    let node = band.node.expect("cantor band without node");
    let kids = mu.children(&node);
    let (lo_edge, hi_edge) = (kids[1].left, kids[2].right());
    let dist = if x < lo_edge {
        lo_edge - x
    } else if x > hi_edge {
        x - hi_edge
    } else {
        0.0
    };
    if dist >= alpha * band.hi {
        return 0.0;
    }
    // ∫ μ(A ∩ B(x, αt)) dt/t^{m+1} = ∫_A w(|x - y|) dμ(y) with w in closed form
    let l = band.hi;
    let tol = quad.rel_tol * 1e-2 * series::band_weight(0.0, l, alpha, m);
    let c = series::Collapse { t: mu, l, alpha, m, tol };
    c.inner(&kids[1], x) + c.inner(&kids[2], x)
}

/// `S_α f(x)`.
pub fn conical_value(
    kernel: &KernelSpec,
    measure: &MeasureHandle,
    f: &InputFn<'_>,
    x: f64,
    cone: &ConeSpec,
    quad: &QuadratureConfig,
) -> Result<f64> {
    quad.validate()?;
    cone.validate()?;
    if f.is_zero() || kernel.is_zero() {
        return Ok(0.0);
    }
    if let KernelKind::Cantor(mu) = &kernel.kind {
        let mut total = 0.0;
        for band in cantor_ancestors(mu, x, quad) {
            let weight = cone_band_weight(mu, &band, x, cone.alpha, cone.m, quad);
            if weight == 0.0 {
                continue;
            }
            let a = node_coefficient(kernel, measure, f, &band, quad)?;
            total += a * a * weight;
        }
        return Ok(total.sqrt());
    }
    generic_conical_sq(kernel, measure, f, x, cone, quad).map(f64::sqrt)
}

/// Direct cone integral for kernels without a band structure in `y`; `t` is
/// resolved down to `2^{-trunc_generation}` times the largest active scale.
fn generic_conical_sq(
    kernel: &KernelSpec,
    measure: &MeasureHandle,
    f: &InputFn<'_>,
    x: f64,
    cone: &ConeSpec,
    quad: &QuadratureConfig,
) -> Result<f64> {
    let strips = kernel.strips();
    let Some(t_hi) = strips.iter().map(|s| s.t_hi).reduce(f64::max) else {
        return Ok(0.0);
    };
    let floor = t_hi * 2f64.powi(-(quad.trunc_generation.min(1000) as i32));
    let t_lo = strips.iter().map(|s| s.t_lo).fold(t_hi, f64::min).max(floor);
    let depth = quad.y_resolution_depth.min(8);
    let mut err = None;
    let v = quad::log_t_integral(t_lo, t_hi, band_panels(t_lo, t_hi, quad), |t| {
        let r = cone.alpha * t;
        let inner = measure.integrate(
            // failures surface as NaN and are reported below
            &|y| crate::kernels::eval_theta(kernel, measure, f, t, y, quad).map_or(f64::NAN, |v| v * v),
            x - r,
            x + r,
            depth,
        );
        if !inner.is_finite() {
            err = Some(Error::QuadratureBudgetExceeded(format!("cone integral at t={t}")));
        }
        inner * t.powf(-cone.m)
    });
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// `V f(x)`.
pub fn vertical_value(
    kernel: &KernelSpec,
    measure: &MeasureHandle,
    f: &InputFn<'_>,
    x: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    vertical_sq_below(kernel, measure, f, x, f64::INFINITY, quad).map(f64::sqrt)
}

/// `∫_{t <= t_max} |θ_t f(x)|² dt/t`.
pub(crate) fn vertical_sq_below(
    kernel: &KernelSpec,
    measure: &MeasureHandle,
    f: &InputFn<'_>,
    x: f64,
    t_max: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    quad.validate()?;
    if f.is_zero() || kernel.is_zero() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for band in kernel.bands(x) {
        if band.generation > quad.trunc_generation && band.node.is_some() {
            continue;
        }
        let hi = band.hi.min(t_max);
        if hi <= band.lo {
            continue;
        }
        if matches!(kernel.kind, KernelKind::Cantor(_)) {
            // θ is constant across a Cantor band
            let a = node_coefficient(kernel, measure, f, &band, quad)?;
            total += a * a * (hi / band.lo).ln();
            continue;
        }
        let mut err = None;
        total += quad::log_t_integral(band.lo, hi, band_panels(band.lo, hi, quad), |t| {
            match theta_in_band(kernel, measure, f, &band, t, x, quad) {
                Ok(v) => v * v,
                Err(e) => {
                    err = Some(e);
                    0.0
                }
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests;
