//! Kernels `s_t(x, y)` with declared exponents `(m, α)`, the two concrete
//! constructions, the `s̃_t` transform and samplers for the size and Hölder
//! conditions.
//!
//! A kernel is described band-wise: for a point `x`, [`KernelSpec::bands`]
//! lists the `t`-intervals where `s_t(x, ·)` may be nonzero, and
//! [`KernelSpec::eval_in`] evaluates inside one of them. Quadrature only ever
//! integrates over these bands.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::logproduct::LogProductFn;
use crate::measures::{CantorMeasure, MeasureHandle, Node};
use crate::quad::QuadratureConfig;
use crate::{rng, Result};

/// `φ(u) = cos²(πu)` on `[-1/2, 1/2]`.
pub fn bump(u: f64) -> f64 {
    if u.abs() >= 0.5 {
        0.0
    } else {
        let c = (PI * u).cos();
        c * c
    }
}

pub const BUMP_LIPSCHITZ: f64 = PI;

/// `φ_V`: 1 on `[-1, 1]`, smoothstep ramp `1 - 3s² + 2s³` (`s = |z| - 1`) on
/// `1 <= |z| <= 2`, 0 beyond.
pub fn v_bump(z: f64) -> f64 {
    let a = z.abs();
    if a <= 1.0 {
        1.0
    } else if a >= 2.0 {
        0.0
    } else {
        let s = a - 1.0;
        1.0 - 3.0 * s * s + 2.0 * s * s * s
    }
}

pub const V_BUMP_LIPSCHITZ: f64 = 1.5;

/// `∫_0^z φ_V`, odd in `z`; the full integral is 3.
pub fn v_bump_primitive(z: f64) -> f64 {
    let a = z.abs();
    let v = if a <= 1.0 {
        a
    } else if a >= 2.0 {
        1.5
    } else {
        let s = a - 1.0;
        1.0 + s - s.powi(3) + 0.5 * s.powi(4)
    };
    v.copysign(z)
}

/// `(strip, band)` region where a kernel is active, with its `y`-support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActiveStrip {
    pub x_lo: f64,
    pub x_hi: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

/// One active `t`-band at a fixed `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
    /// For the Cantor kernel: the node `I` whose middle children hold `x`.
    pub node: Option<Node>,
    /// Generation of `node` counted from the root of the full measure.
    pub generation: usize,
}

impl Band {
    pub fn contains(&self, t: f64) -> bool {
        t >= self.lo && t <= self.hi
    }
}

pub type KernelFn = dyn Fn(f64, f64, f64) -> f64 + Send + Sync;

/// A user-supplied kernel: evaluator plus fixed hints.
pub struct CustomKernel {
    pub eval: Box<KernelFn>,
    pub bands: Vec<(f64, f64)>,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// `y` locations where the sampler places adversarial pairs.
    pub y_breakpoints: Vec<f64>,
}

#[derive(Clone)]
pub enum KernelKind {
    Zero,
    Cantor(Arc<CantorMeasure>),
    LogProduct(Arc<LogProductFn>),
    Tilde { inner: Box<KernelSpec>, measure: MeasureHandle },
    Custom(Arc<CustomKernel>),
}

#[derive(Clone)]
pub struct KernelSpec {
    pub m: f64,
    pub alpha: f64,
    pub kind: KernelKind,
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            KernelKind::Zero => "zero",
            KernelKind::Cantor(_) => "cantor",
            KernelKind::LogProduct(_) => "logproduct",
            KernelKind::Tilde { .. } => "tilde",
            KernelKind::Custom(_) => "custom",
        };
        f.debug_struct("KernelSpec").field("m", &self.m).field("alpha", &self.alpha).field("kind", &kind).finish()
    }
}

pub fn zero_kernel(m: f64, alpha: f64) -> KernelSpec {
    KernelSpec { m, alpha, kind: KernelKind::Zero }
}

/// `s_t(x, y) = φ_I(y)/ℓ(I)^m` when `x` lies in a middle child of `I` and
/// `L_I/2 <= t <= L_I`; zero otherwise. Constant in `x` across each strip.
pub fn cantor_kernel(measure: Arc<CantorMeasure>) -> KernelSpec {
    KernelSpec { m: measure.m(), alpha: 1.0, kind: KernelKind::Cantor(measure) }
}

/// `s_t(x, y) = φ_{V,t}(x - y)` for `x ∈ [0, 1]`, `f(x) <= t <= 1`.
pub fn logproduct_kernel(f: Arc<LogProductFn>) -> KernelSpec {
    KernelSpec { m: 1.0, alpha: 1.0, kind: KernelKind::LogProduct(f) }
}

/// `s̃_t(x, y) = (μ(B(x, t))/t^m)^{1/2} s_t(x, y)`; exponents unchanged.
pub fn tilde_transform(kernel: &KernelSpec, measure: MeasureHandle) -> KernelSpec {
    KernelSpec {
        m: kernel.m,
        alpha: kernel.alpha,
        kind: KernelKind::Tilde { inner: Box::new(kernel.clone()), measure },
    }
}

pub fn custom_kernel(m: f64, alpha: f64, custom: CustomKernel) -> KernelSpec {
    KernelSpec { m, alpha, kind: KernelKind::Custom(Arc::new(custom)) }
}

fn cantor_bands(mu: &CantorMeasure, x: f64, first_only_t: Option<f64>) -> Vec<Band> {
    let mut out = Vec::new();
    let mut node = mu.root();
    if !node.contains(x) {
        return out;
    }
    while !mu.is_leaf(&node) {
        let g = mu.level_geometry(node.level);
        let l = g.outer_length * node.len;
        if let Some(t) = first_only_t {
            if t > l {
                break;
            }
        }
        let kids = mu.children(&node);
        if kids[1].contains(x) || kids[2].contains(x) {
            out.push(Band {
                lo: 0.5 * l,
                hi: l,
                node: Some(node),
                generation: mu.params.start_gen + node.level,
            });
        }
        match kids.iter().find(|k| k.contains(x)) {
            Some(k) => node = *k,
            None => break,
        }
    }
    out
}

impl KernelSpec {
    pub fn is_zero(&self) -> bool {
        matches!(self.kind, KernelKind::Zero)
    }

    pub fn cantor_measure(&self) -> Option<&Arc<CantorMeasure>> {
        match &self.kind {
            KernelKind::Cantor(mu) => Some(mu),
            KernelKind::Tilde { inner, .. } => inner.cantor_measure(),
            _ => None,
        }
    }

    /// Active `t`-bands at `x`.
    pub fn bands(&self, x: f64) -> Vec<Band> {
        match &self.kind {
            KernelKind::Zero => Vec::new(),
            KernelKind::Cantor(mu) => cantor_bands(mu, x, None),
            KernelKind::LogProduct(f) => {
                if !(0.0..=1.0).contains(&x) {
                    return Vec::new();
                }
                match f.eval_f64(x) {
                    Ok(v) => vec![Band { lo: v.value.max(f64::MIN_POSITIVE), hi: 1.0, node: None, generation: 0 }],
                    Err(_) => Vec::new(),
                }
            }
            KernelKind::Tilde { inner, .. } => inner.bands(x),
            KernelKind::Custom(c) => {
                if x < c.x_range.0 || x > c.x_range.1 {
                    return Vec::new();
                }
                c.bands.iter().map(|&(lo, hi)| Band { lo, hi, node: None, generation: 0 }).collect()
            }
        }
    }

    /// Kernel value inside an active band (`t` must lie in `band`).
    pub fn eval_in(&self, band: &Band, t: f64, x: f64, y: f64) -> f64 {
        match &self.kind {
            KernelKind::Zero => 0.0,
            KernelKind::Cantor(mu) => {
                let node = band.node.expect("cantor band without node");
                bump((y - node.mid()) / node.len) / node.len.powf(mu.m())
            }
            KernelKind::LogProduct(_) => v_bump((x - y) / t) / t,
            KernelKind::Tilde { inner, measure } => {
                let factor = (measure.mass_unchecked(x - t, x + t) / t.powf(self.m)).sqrt();
                factor * inner.eval_in(band, t, x, y)
            }
            KernelKind::Custom(c) => (c.eval)(t, x, y),
        }
    }

    pub fn eval(&self, t: f64, x: f64, y: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let bands = match &self.kind {
            KernelKind::Cantor(mu) => cantor_bands(mu, x, Some(t)),
            _ => self.bands(x),
        };
        bands
            .iter()
            .find(|b| b.contains(t))
            .map(|b| self.eval_in(b, t, x, y))
            .unwrap_or(0.0)
    }

    /// Interval containing the `y`-support of `s_t(x, ·)` inside `band`.
    pub fn y_support(&self, band: &Band, t: f64, x: f64) -> (f64, f64) {
        match &self.kind {
            KernelKind::Zero => (x, x),
            KernelKind::Cantor(_) => {
                let n = band.node.expect("cantor band without node");
                (n.left, n.right())
            }
            KernelKind::LogProduct(_) => (x - 2.0 * t, x + 2.0 * t),
            KernelKind::Tilde { inner, .. } => inner.y_support(band, t, x),
            KernelKind::Custom(c) => c.y_range,
        }
    }

    /// Points where `s_t(x, ·)` loses smoothness (support ends, ramp joints).
    pub fn y_breakpoints(&self, band: &Band, t: f64, x: f64) -> Vec<f64> {
        match &self.kind {
            KernelKind::Zero => Vec::new(),
            KernelKind::Cantor(_) => {
                let (a, b) = self.y_support(band, t, x);
                vec![a, 0.5 * (a + b), b]
            }
            KernelKind::LogProduct(_) => vec![x - 2.0 * t, x - t, x + t, x + 2.0 * t],
            KernelKind::Tilde { inner, .. } => inner.y_breakpoints(band, t, x),
            KernelKind::Custom(c) => c.y_breakpoints.clone(),
        }
    }

    /// Active regions, for stratified sampling.
    pub fn strips(&self) -> Vec<ActiveStrip> {
        match &self.kind {
            KernelKind::Zero => Vec::new(),
            KernelKind::Cantor(mu) => {
                let mut out = Vec::new();
                for level in 0..mu.depth() {
                    let l_rel = mu.level_geometry(level).outer_length;
                    for node in mu.nodes_at(level) {
                        let l = l_rel * node.len;
                        for kid in &mu.children(&node)[1..3] {
                            out.push(ActiveStrip {
                                x_lo: kid.left,
                                x_hi: kid.right(),
                                t_lo: 0.5 * l,
                                t_hi: l,
                                y_lo: node.left,
                                y_hi: node.right(),
                            });
                        }
                    }
                }
                out
            }
            KernelKind::LogProduct(_) => vec![ActiveStrip { x_lo: 0.0, x_hi: 1.0, t_lo: 0.0, t_hi: 1.0, y_lo: -2.0, y_hi: 3.0 }],
            KernelKind::Tilde { inner, .. } => inner.strips(),
            KernelKind::Custom(c) => c
                .bands
                .iter()
                .map(|&(lo, hi)| ActiveStrip {
                    x_lo: c.x_range.0,
                    x_hi: c.x_range.1,
                    t_lo: lo,
                    t_hi: hi,
                    y_lo: c.y_range.0,
                    y_hi: c.y_range.1,
                })
                .collect(),
        }
    }
}

/// Input functions for `θ_t`.
#[derive(Clone, Copy)]
pub enum InputFn<'a> {
    Constant(f64),
    Indicator { a: f64, b: f64, value: f64 },
    /// Piecewise constant on the Cantor nodes of `level`, left to right.
    CantorLeaves { measure: &'a CantorMeasure, level: usize, values: &'a [f64] },
    Closure(&'a (dyn Fn(f64) -> f64 + Sync)),
}

impl InputFn<'_> {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            InputFn::Constant(c) => *c,
            InputFn::Indicator { a, b, value } => {
                if x >= *a && x <= *b {
                    *value
                } else {
                    0.0
                }
            }
            InputFn::CantorLeaves { measure, level, values } => {
                let mut node = measure.root();
                let mut index = 0usize;
                for _ in 0..*level {
                    if measure.is_leaf(&node) {
                        break;
                    }
                    let kids = measure.children(&node);
                    let Some(j) = kids.iter().position(|k| k.contains(x)) else {
                        return 0.0;
                    };
                    node = kids[j];
                    index = index * 4 + j;
                }
                values.get(index).copied().unwrap_or(0.0)
            }
            InputFn::Closure(f) => f(x),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            InputFn::Constant(c) => *c == 0.0,
            InputFn::Indicator { value, .. } => *value == 0.0,
            InputFn::CantorLeaves { values, .. } => values.iter().all(|v| *v == 0.0),
            InputFn::Closure(_) => false,
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            InputFn::Indicator { a, b, .. } => vec![*a, *b],
            _ => Vec::new(),
        }
    }
}

/// `θ_t f(x) = ∫ s_t(x, y) f(y) dμ(y)`.
pub fn eval_theta(
    kernel: &KernelSpec,
    measure: &MeasureHandle,
    f: &InputFn<'_>,
    t: f64,
    x: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    if f.is_zero() || kernel.is_zero() || t <= 0.0 {
        return Ok(0.0);
    }
    let bands = match &kernel.kind {
        KernelKind::Cantor(mu) => cantor_bands(mu, x, Some(t)),
        _ => kernel.bands(x),
    };
    match bands.iter().find(|b| b.contains(t)) {
        Some(band) => theta_in_band(kernel, measure, f, band, t, x, quad),
        None => Ok(0.0),
    }
}

pub fn theta_in_band(
    kernel: &KernelSpec,
    measure: &MeasureHandle,
    f: &InputFn<'_>,
    band: &Band,
    t: f64,
    x: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    if f.is_zero() {
        return Ok(0.0);
    }
    if let (KernelKind::LogProduct(_), MeasureHandle::Lebesgue { a: lo, b: hi }) = (&kernel.kind, measure) {
        // piecewise-constant input against Lebesgue measure: exact via the primitive of φ_V
        let piece = match *f {
            InputFn::Constant(c) => Some((*lo, *hi, c)),
            InputFn::Indicator { a, b, value } => Some((a.max(*lo), b.min(*hi), value)),
            _ => None,
        };
        if let Some((a, b, c)) = piece {
            if b <= a {
                return Ok(0.0);
            }
            return Ok(c * (v_bump_primitive((x - a) / t) - v_bump_primitive((x - b) / t)));
        }
    }
    let (ya, yb) = kernel.y_support(band, t, x);
    let depth = band.node.map(|n| n.level).unwrap_or(0) + quad.y_resolution_depth;
    let mut cuts = kernel.y_breakpoints(band, t, x);
    cuts.extend(f.breakpoints());
    cuts.push(ya);
    cuts.push(yb);
    cuts.retain(|c| *c >= ya && *c <= yb);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let g = |y: f64| kernel.eval_in(band, t, x, y) * f.value(y);
    let depth = match measure {
        // Lebesgue panels are per piece; keep their count modest
        MeasureHandle::Lebesgue { .. } => quad.y_resolution_depth.min(6),
        _ => depth,
    };
    let value = match measure {
        MeasureHandle::Cantor(_) => measure.integrate(&g, ya, yb, depth),
        _ => cuts.windows(2).map(|w| measure.integrate(&g, w[0], w[1], depth)).sum(),
    };
    if !value.is_finite() {
        return Err(crate::Error::QuadratureBudgetExceeded(format!("non-finite θ at t={t}, x={x}")));
    }
    Ok(value)
}

/// `∫φ_I dμ / μ(I)` on the normalized measure of a node (a template).
pub fn bump_mass_ratio(template: &CantorMeasure, tol: f64) -> f64 {
    let root = template.root();
    template.integrate_lipschitz(&root, &|y| bump(y - 0.5), BUMP_LIPSCHITZ, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub worst_ratio: f64,
    /// `(t, x, y, z)`; `z = y` for the size condition.
    pub witness: (f64, f64, f64, f64),
    pub samples: usize,
}

fn sample_log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let lo = lo.max(1e-300);
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

fn sampled_points<R: Rng>(kernel: &KernelSpec, rng: &mut R, i: usize, strips: &[ActiveStrip]) -> Option<(Band, f64, f64, f64)> {
    let s = strips[i % strips.len()];
    let x = match i % 7 {
        0 => s.x_lo,
        1 => s.x_hi,
        _ => s.x_lo + rng.random::<f64>() * (s.x_hi - s.x_lo),
    };
    let bands = kernel.bands(x);
    let band = *bands
        .iter()
        .find(|b| b.lo <= s.t_hi && b.hi >= s.t_lo)
        .or(bands.first())?;
    let t = match i % 5 {
        0 => band.lo,
        1 => band.hi,
        _ => sample_log_uniform(rng, band.lo, band.hi),
    };
    let (ya, yb) = kernel.y_support(&band, t, x);
    let pad = 0.5 * (yb - ya);
    let y = ya - pad + rng.random::<f64>() * (yb - ya + 2.0 * pad);
    Some((band, t, x, y))
}

/// Worst `|s_t(x,y)|·(t+|x-y|)^{m+α}/t^α` over stratified samples.
pub fn check_size_condition(kernel: &KernelSpec, n_samples: usize, seed: u64) -> ConditionReport {
    let mut rep = ConditionReport { worst_ratio: 0.0, witness: (0.0, 0.0, 0.0, 0.0), samples: 0 };
    let strips = kernel.strips();
    if strips.is_empty() {
        return rep;
    }
    let mut rng = rng::stream(seed, "size-condition", 0);
    let (m, a) = (kernel.m, kernel.alpha);
    for i in 0..n_samples {
        let Some((band, t, x, mut y)) = sampled_points(kernel, &mut rng, i, &strips) else { continue };
        if i % 3 == 0 {
            y = x;
        }
        let s = kernel.eval_in(&band, t, x, y).abs();
        let ratio = s * (t + (x - y).abs()).powf(m + a) / t.powf(a);
        rep.samples += 1;
        if ratio > rep.worst_ratio {
            rep.worst_ratio = ratio;
            rep.witness = (t, x, y, y);
        }
    }
    rep
}

/// Worst `|s_t(x,y) - s_t(x,z)|·(t+|x-y|)^{m+α}/|y-z|^α` over samples with
/// `|y - z| < sep_fraction·t/2`; a third of the pairs straddle a kernel
/// breakpoint.
pub fn check_holder_condition_scaled(kernel: &KernelSpec, n_samples: usize, seed: u64, sep_fraction: f64) -> ConditionReport {
    let mut rep = ConditionReport { worst_ratio: 0.0, witness: (0.0, 0.0, 0.0, 0.0), samples: 0 };
    let strips = kernel.strips();
    if strips.is_empty() {
        return rep;
    }
    let mut rng = rng::stream(seed, "holder-condition", 0);
    let (m, a) = (kernel.m, kernel.alpha);
    for i in 0..n_samples {
        let Some((band, t, x, y0)) = sampled_points(kernel, &mut rng, i, &strips) else { continue };
        let delta = sep_fraction * 0.5 * t * (0.05 + 0.95 * rng.random::<f64>());
        let (y, z) = if i % 3 == 0 {
            let cuts = kernel.y_breakpoints(&band, t, x);
            if cuts.is_empty() {
                (y0, y0 + delta)
            } else {
                let c = cuts[rng.random_range(0..cuts.len())];
                (c - 0.5 * delta, c + 0.5 * delta)
            }
        } else {
            (y0, y0 + if rng.random::<bool>() { delta } else { -delta })
        };
        let sep = (y - z).abs();
        if sep == 0.0 {
            continue;
        }
        let diff = (kernel.eval_in(&band, t, x, y) - kernel.eval_in(&band, t, x, z)).abs();
        let ratio = diff * (t + (x - y).abs()).powf(m + a) / sep.powf(a);
        rep.samples += 1;
        if ratio > rep.worst_ratio {
            rep.worst_ratio = ratio;
            rep.witness = (t, x, y, z);
        }
    }
    rep
}

pub fn check_holder_condition(kernel: &KernelSpec, n_samples: usize, seed: u64) -> ConditionReport {
    check_holder_condition_scaled(kernel, n_samples, seed, 1.0)
}

/// Kernel with a jump in `y` at `1/2`, sampled with `x` below the jump. It
/// has the size bound but no Hölder bound; the Hölder checker must see its
/// ratio scale like `1/|y - z|`.
pub fn step_kernel_fixture() -> KernelSpec {
    custom_kernel(0.4, 1.0, CustomKernel {
        eval: Box::new(|_, _, y| if y > 0.5 { 1.0 } else { 0.0 }),
        bands: vec![(0.1, 0.2)],
        x_range: (0.2, 0.3),
        y_range: (0.0, 1.0),
        y_breakpoints: vec![0.5],
    })
}
