//! Operator-level functionals: the L² ratio, the testing functional over a
//! cube list and the weak-(1,1) level-set functional.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kernels::{bump, InputFn, KernelKind, KernelSpec};
use crate::measures::{CantorMeasure, MeasureHandle, Node};
use crate::quad::{self, QuadratureConfig};
use crate::{Error, Result};

use super::series::{bump_lipschitz, collapsed_term};
use super::{cantor_ancestors, cone_band_weight, node_coefficient, vertical_sq_below, ConeSpec};

fn require_cantor(kernel: &KernelSpec) -> Result<&CantorMeasure> {
    match &kernel.kind {
        KernelKind::Cantor(mu) => Ok(mu),
        _ => Err(Error::InvalidParams("operation requires the Cantor kernel".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2Ratio {
    pub max_ratio: f64,
    /// Index into the sample list of the maximizing input.
    pub witness: Option<usize>,
    /// `None` for zero inputs, which are skipped.
    pub ratios: Vec<Option<f64>>,
}

/// `max ‖Sf‖²/‖f‖²` for the Cantor kernel over inputs given as values on the
/// intervals of `leaf_level`, left to right, with aperture 1.
///
/// Intervals of generation below `leaf_level` are summed one by one with the
/// exact coefficient `∫φ_I f dμ`; deeper generations see `f` as a constant and
/// contribute `‖f‖²·g(n, 1)`.
pub fn l2_operator_ratio(
    kernel: &KernelSpec,
    leaf_level: usize,
    f_samples: &[Vec<f64>],
    quad: &QuadratureConfig,
) -> Result<L2Ratio> {
    quad.validate()?;
    let mu = require_cantor(kernel)?;
    if mu.depth() < leaf_level {
        return Err(Error::InvalidParams(format!("measure depth {} below leaf level {leaf_level}", mu.depth())));
    }
    let leaves = mu.nodes_at(leaf_level);
    if let Some(bad) = f_samples.iter().find(|f| f.len() != leaves.len()) {
        return Err(Error::InvalidParams(format!("leaf vector of length {} for {} leaves", bad.len(), leaves.len())));
    }
    let params = mu.params;
    let top = quad.trunc_generation.max(leaf_level);
    let collapsed: Vec<_> = (0..=top)
        .into_par_iter()
        .map(|n| collapsed_term(&params, params.start_gen + n, 1.0, quad))
        .collect::<Result<_>>()?;
    let deep_sum: f64 = collapsed[leaf_level..=quad.trunc_generation.max(leaf_level)]
        .iter()
        .filter(|c| c.n - params.start_gen <= quad.trunc_generation)
        .map(|c| c.value)
        .sum();

    // ∫_J φ_I dμ for every generation-n interval I above the leaves and every leaf J under it
    let tol = quad.rel_tol * 1e-3;
    let mut weights: Vec<Vec<(Node, Vec<(usize, f64)>)>> = Vec::new();
    for n in 0..leaf_level.min(quad.trunc_generation + 1) {
        let span = 4usize.pow((leaf_level - n) as u32);
        let row = mu
            .nodes_at(n)
            .into_iter()
            .enumerate()
            .map(|(i, node)| {
                let phi = |y: f64| bump((y - node.mid()) / node.len);
                let w = (i * span..(i + 1) * span)
                    .map(|j| (j, mu.integrate_lipschitz(&leaves[j], &phi, bump_lipschitz(node.len), tol)))
                    .collect();
                (node, w)
            })
            .collect();
        weights.push(row);
    }

    let mut ratios = Vec::with_capacity(f_samples.len());
    for f in f_samples {
        let norm_sq: f64 = leaves.iter().zip(f).map(|(j, v)| j.mass * v * v).sum();
        if norm_sq == 0.0 {
            ratios.push(None);
            continue;
        }
        let mut total = norm_sq * deep_sum;
        for (n, row) in weights.iter().enumerate() {
            let inner = collapsed[n].inner;
            for (node, w) in row {
                let phi_f: f64 = w.iter().map(|(j, wj)| f[*j] * wj).sum();
                total += phi_f * phi_f / node.mass * inner;
            }
        }
        ratios.push(Some(total / norm_sq));
    }
    let (witness, max_ratio) = ratios
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.map(|r| (i, r)))
        .fold((None, 0.0), |(wi, best), (i, r)| if r > best { (Some(i), r) } else { (wi, best) });
    Ok(L2Ratio { max_ratio, witness, ratios })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestingResult {
    pub sup: f64,
    pub witness: (f64, f64),
    /// `∬_{R̂} |θ_t b|² dμ dt/t` per cube.
    pub box_integrals: Vec<f64>,
    /// The box integral divided by `μ(3R)`.
    pub values: Vec<f64>,
}

/// `sup_R μ(3R)^{-1} ∬_{R̂} |θ_t b|² dμ dt/t` over `cubes`, where `R̂` is
/// `R × (0, ℓ(R)]`.
pub fn testing_functional(
    kernel: &KernelSpec,
    measure: &MeasureHandle,
    b: &InputFn<'_>,
    cubes: &[(f64, f64)],
    quad: &QuadratureConfig,
) -> Result<TestingResult> {
    quad.validate()?;
    if cubes.is_empty() {
        return Err(Error::EmptyCubeList);
    }
    for &(a, c) in cubes {
        if c < a {
            return Err(Error::ReversedInterval { a, b: c });
        }
    }
    let box_integrals: Vec<f64> = cubes
        .par_iter()
        .map(|&(a, c)| carleson_box_integral(kernel, measure, b, a, c, quad))
        .collect::<Result<_>>()?;
    let values: Vec<f64> = cubes
        .iter()
        .zip(&box_integrals)
        .map(|(&(a, c), v)| {
            let l = c - a;
            let denom = measure.mass_unchecked(a - l, c + l);
            if denom > 0.0 { v / denom } else { 0.0 }
        })
        .collect();
    let (i, sup) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, v)| if *v > bv { (i, *v) } else { (bi, bv) });
    Ok(TestingResult { sup: sup.max(0.0), witness: cubes[i], box_integrals, values })
}

fn carleson_box_integral(
    kernel: &KernelSpec,
    measure: &MeasureHandle,
    b: &InputFn<'_>,
    a: f64,
    c: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    if b.is_zero() || kernel.is_zero() || c <= a {
        return Ok(0.0);
    }
    let l = c - a;
    match measure {
        MeasureHandle::Lebesgue { .. } => {
            let mut cuts = vec![a, c];
            if let KernelKind::LogProduct(f) = &kernel.kind {
                cuts.extend(f.breakpoints_f64(a, c));
            }
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            let mut total = 0.0;
            for w in cuts.windows(2) {
                let mut err = None;
                total += quad::gauss5(w[0], w[1], |x| match vertical_sq_below(kernel, measure, b, x, l, quad) {
                    Ok(v) => v,
                    Err(e) => {
                        err = Some(e);
                        0.0
                    }
                });
                if let Some(e) = err {
                    return Err(e);
                }
            }
            Ok(total)
        }
        MeasureHandle::Cantor(_) if matches!(kernel.kind, KernelKind::Cantor(_)) => {
            let mu = require_cantor(kernel)?;
            cantor_box(kernel, measure, mu, &mu.root(), b, (a, c), quad)
        }
        _ => {
            let v = measure.integrate(
                &|x| vertical_sq_below(kernel, measure, b, x, l, quad).unwrap_or(f64::NAN),
                a,
                c,
                quad.y_resolution_depth,
            );
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::QuadratureBudgetExceeded(format!("Carleson box over [{a}, {c}]")))
            }
        }
    }
}

/// Box integral for the Cantor kernel: `θ_t b` is the constant `a_I` on
/// `(I₂∪I₃) × [L_I/2, L_I]`, so each interval contributes
/// `a_I²·μ((I₂∪I₃) ∩ R)·ln(min(L_I, ℓ(R))/(L_I/2))`.
fn cantor_box(
    kernel: &KernelSpec,
    measure: &MeasureHandle,
    mu: &CantorMeasure,
    node: &Node,
    b: &InputFn<'_>,
    (a, c): (f64, f64),
    quad: &QuadratureConfig,
) -> Result<f64> {
    let generation = mu.params.start_gen + node.level;
    if mu.is_leaf(node) || generation > quad.trunc_generation || node.right() < a || node.left > c {
        return Ok(0.0);
    }
    let l_cube = c - a;
    let big_l = mu.level_geometry(node.level).outer_length * node.len;
    let kids = mu.children(node);
    let mut total = 0.0;
    if l_cube > 0.5 * big_l {
        let mass: f64 = kids[1..3]
            .iter()
            .map(|k| {
                let (lo, hi) = (a.max(k.left), c.min(k.right()));
                if hi > lo { mu.interval_mass(lo, hi) } else { 0.0 }
            })
            .sum();
        if mass > 0.0 {
            let band = crate::kernels::Band { lo: 0.5 * big_l, hi: big_l, node: Some(*node), generation };
            let coef = node_coefficient(kernel, measure, b, &band, quad)?;
            total += coef * coef * mass * (big_l.min(l_cube) / (0.5 * big_l)).ln();
        }
    }
    for k in &kids {
        total += cantor_box(kernel, measure, mu, k, b, (a, c), quad)?;
    }
    Ok(total)
}

/// Values of `S_α f` at the midpoints of the intervals of `level`, with the
/// intervals themselves. Coefficients are shared along the tree.
pub fn conical_on_level(
    kernel: &KernelSpec,
    measure: &MeasureHandle,
    f: &InputFn<'_>,
    level: usize,
    cone: &ConeSpec,
    quad: &QuadratureConfig,
) -> Result<Vec<(Node, f64)>> {
    quad.validate()?;
    cone.validate()?;
    let mu = require_cantor(kernel)?;
    let level = level.min(mu.depth());
    // midpoints sit in the central gap, so their ancestors stop at `level`
    let mut coeffs: Vec<Vec<f64>> = Vec::new();
    for n in 0..=level.min(mu.depth().saturating_sub(1)) {
        let row: Vec<f64> = mu
            .nodes_at(n)
            .par_iter()
            .map(|node| {
                let band = crate::kernels::Band {
                    lo: 0.0,
                    hi: mu.level_geometry(n).outer_length * node.len,
                    node: Some(*node),
                    generation: mu.params.start_gen + n,
                };
                node_coefficient(kernel, measure, f, &band, quad)
            })
            .collect::<Result<_>>()?;
        coeffs.push(row);
    }
    let points = mu.nodes_at(level);
    Ok(points
        .par_iter()
        .enumerate()
        .map(|(i, node)| {
            let x = node.mid();
            let mut total = 0.0;
            for band in cantor_ancestors(mu, x, quad) {
                let lv = band.node.unwrap().level;
                if lv >= coeffs.len() {
                    break;
                }
                let a = coeffs[lv][i / 4usize.pow((level - lv) as u32)];
                if a != 0.0 {
                    total += a * a * cone_band_weight(mu, &band, x, cone.alpha, cone.m, quad);
                }
            }
            (*node, total.sqrt())
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weak11Result {
    pub sup: f64,
    pub witness_lambda: f64,
    pub l1_norm: f64,
}

/// `sup_λ λ·μ{S_α f > λ}/‖f‖₁`, with `S_α f` sampled at the midpoints of the
/// intervals of `level` and each sample weighted by its interval's mass.
pub fn weak11_functional(
    kernel: &KernelSpec,
    measure: &MeasureHandle,
    f: &InputFn<'_>,
    lambda_grid: &[f64],
    level: usize,
    cone: &ConeSpec,
    quad: &QuadratureConfig,
) -> Result<Weak11Result> {
    if lambda_grid.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::InvalidParams("lambda grid must be positive".into()));
    }
    let l1_norm = match f {
        InputFn::CantorLeaves { measure: mu, level: lv, values } => {
            mu.nodes_at(*lv).iter().zip(values.iter()).map(|(n, v)| n.mass * v.abs()).sum()
        }
        _ => {
            let (a, b) = measure.support();
            measure.integrate(&|x| f.value(x).abs(), a, b, quad.y_resolution_depth)
        }
    };
    if l1_norm == 0.0 || f.is_zero() {
        return Ok(Weak11Result { sup: 0.0, witness_lambda: lambda_grid.first().copied().unwrap_or(0.0), l1_norm });
    }
    let samples = conical_on_level(kernel, measure, f, level, cone, quad)?;
    let mut best = (0.0, lambda_grid.first().copied().unwrap_or(0.0));
    for &lambda in lambda_grid {
        let mass: f64 = samples.iter().filter(|(_, s)| *s > lambda).map(|(n, _)| n.mass).sum();
        let v = lambda * mass / l1_norm;
        if v > best.0 {
            best = (v, lambda);
        }
    }
    Ok(Weak11Result { sup: best.0, witness_lambda: best.1, l1_norm })
}
