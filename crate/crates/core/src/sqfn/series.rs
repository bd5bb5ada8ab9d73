//! Per-generation norm series for `‖S_α(1)‖²` and `‖V(1)‖²` on the Cantor
//! measure, computed once per generation on a template measure, plus the
//! brute-force enumeration used to validate that collapse.

use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kernels::{bump, bump_mass_ratio, BUMP_LIPSCHITZ};
use crate::measures::{build_cantor, template_measure, CantorMeasure, CantorParams, Node};
use crate::quad::{self, QuadratureConfig};
use crate::{Error, Result};

use super::ConeSpec;

/// Largest aperture for which the cone balls around the middle children stay
/// inside the parent interval.
pub const MAX_COLLAPSED_APERTURE: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSeries {
    /// `None` for the vertical series.
    pub alpha: Option<f64>,
    pub generations: Vec<usize>,
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub err_est: Vec<f64>,
}

impl NormSeries {
    pub fn from_terms(alpha: Option<f64>, generations: Vec<usize>, terms: Vec<f64>, err_est: Vec<f64>) -> Self {
        let partial_sums = terms
            .iter()
            .scan(0.0, |acc, t| {
                *acc += t;
                Some(*acc)
            })
            .collect();
        Self { alpha, generations, terms, partial_sums, err_est }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term(&self, n: usize) -> Option<f64> {
        self.generations.iter().position(|&g| g == n).map(|i| self.terms[i])
    }

    /// Sum of the terms with generation `<= n`.
    pub fn partial_sum(&self, n: usize) -> f64 {
        self.generations
            .iter()
            .zip(&self.terms)
            .filter(|(g, _)| **g <= n)
            .map(|(_, t)| t)
            .sum()
    }

    pub fn total(&self) -> f64 {
        self.partial_sums.last().copied().unwrap_or(0.0)
    }
}

/// Template for the normalized measure inside a generation-`n` interval.
pub fn generation_template(params: &CantorParams, n: usize, quad: &QuadratureConfig) -> Result<CantorMeasure> {
    template_measure(CantorParams {
        m: params.m,
        c: params.c,
        depth: quad.y_resolution_depth.max(4),
        start_gen: n,
    })
}

/// `ρ(n) = ∫φ_I dμ / μ(I)` for generation-`n` intervals.
pub fn bump_ratio(params: &CantorParams, n: usize, quad: &QuadratureConfig) -> Result<f64> {
    let t = generation_template(params, n, quad)?;
    Ok(bump_mass_ratio(&t, quad.rel_tol * 1e-4))
}

/// `∫_{L/2}^{L} 1[d < ατ] τ^{-m-1} dτ`.
pub(crate) fn band_weight(d: f64, l: f64, alpha: f64, m: f64) -> f64 {
    if d >= alpha * l {
        return 0.0;
    }
    let lower = (0.5 * l).max(d / alpha);
    (lower.powf(-m) - l.powf(-m)) / m
}

/// Band weight `w(|u - v|)` integrated against a Cantor measure by descent.
pub(crate) struct Collapse<'a> {
    pub t: &'a CantorMeasure,
    pub l: f64,
    pub alpha: f64,
    pub m: f64,
    pub tol: f64,
}

impl Collapse<'_> {
    fn w(&self, d: f64) -> f64 {
        band_weight(d, self.l, self.alpha, self.m)
    }

    /// `∫_J w(|u - v|) dμ̂(v)`; `w` is non-increasing in the distance, so its
    /// spread over `J` is `w(d_min) - w(d_max)`.
    pub fn inner(&self, node: &Node, u: f64) -> f64 {
        if node.mass == 0.0 {
            return 0.0;
        }
        let (a, b) = (node.left, node.right());
        let dmin = if u < a { a - u } else if u > b { u - b } else { 0.0 };
        if dmin >= self.alpha * self.l {
            return 0.0;
        }
        let dmax = (u - a).abs().max((u - b).abs());
        let (wa, wb) = (self.w(dmin), self.w(dmax));
        if wa - wb <= self.tol {
            return node.mass * 0.5 * (wa + wb);
        }
        if self.t.is_leaf(node) {
            return node.mass / node.len * quad::composite_gauss5(a, b, 16, |v| self.w((u - v).abs()));
        }
        self.t.children(node).iter().map(|k| self.inner(k, u)).sum()
    }

    /// `∫_J F dμ̂` with `F(u) = ∫ w(|u-v|) dμ̂(v)`.
    fn outer(&self, node: &Node) -> f64 {
        if node.mass == 0.0 {
            return 0.0;
        }
        let lip = (0.5 * self.l).powf(-self.m - 1.0) / self.alpha;
        let root = self.t.root();
        if lip * node.len <= self.tol {
            return node.mass * self.inner(&root, node.mid());
        }
        if self.t.is_leaf(node) {
            return node.mass * quad::gauss3(0.0, 1.0, |s| self.inner(&root, node.left + s * node.len));
        }
        self.t.children(node).iter().map(|k| self.outer(k)).sum()
    }
}

/// One collapsed generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapsedTerm {
    pub n: usize,
    /// `ρ(n)`.
    pub rho: f64,
    /// `∫_{Î₂∪Î₃} ∫_{L̂/2}^{L̂} μ̂(B(u, ατ)) dτ/τ^{m+1} dμ̂(u)`.
    pub inner: f64,
    /// `g(n, α) = ρ(n)²·inner`.
    pub value: f64,
    pub err_est: f64,
}

fn check_aperture(alpha: f64) -> Result<()> {
    if !(1.0..=MAX_COLLAPSED_APERTURE).contains(&alpha) {
        return Err(Error::InvalidParams(format!(
            "aperture {alpha} outside [1, {MAX_COLLAPSED_APERTURE}] where the collapsed series is exact"
        )));
    }
    Ok(())
}

/// `g(n, α)` from the generation-`n` template.
pub fn collapsed_term(params: &CantorParams, n: usize, alpha: f64, quad: &QuadratureConfig) -> Result<CollapsedTerm> {
    check_aperture(alpha)?;
    let t = generation_template(params, n, quad)?;
    let l = t.level_geometry(0).outer_length;
    let m = params.m;
    let rho = bump_mass_ratio(&t, quad.rel_tol * 1e-4);
    let base_tol = quad.rel_tol * band_weight(0.0, l, alpha, m) * 0.1;
    let kids = t.children(&t.root());
    let run = |tol: f64| {
        let c = Collapse { t: &t, l, alpha, m, tol };
        c.outer(&kids[1]) + c.outer(&kids[2])
    };
    let coarse = run(base_tol);
    let fine = run(0.25 * base_tol);
    Ok(CollapsedTerm {
        n,
        rho,
        inner: fine,
        value: rho * rho * fine,
        err_est: rho * rho * (coarse - fine).abs(),
    })
}

/// Per-generation terms of `‖S_α(1)‖²` for generations in `gens`.
pub fn conical_norm_series(
    measure: &CantorMeasure,
    cone: &ConeSpec,
    gens: RangeInclusive<usize>,
    quad: &QuadratureConfig,
) -> Result<NormSeries> {
    quad.validate()?;
    cone.validate()?;
    check_aperture(cone.alpha)?;
    let params = measure.params;
    let offset = params.start_gen;
    let terms: Vec<CollapsedTerm> = gens
        .clone()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|n| collapsed_term(&params, offset + n, cone.alpha, quad))
        .collect::<Result<_>>()?;
    Ok(NormSeries::from_terms(
        Some(cone.alpha),
        gens.collect(),
        terms.iter().map(|t| t.value).collect(),
        terms.iter().map(|t| t.err_est).collect(),
    ))
}

/// Per-generation terms of `‖V(1)‖²`: `g_V(n) = ρ(n)²·μ̂(Î₂∪Î₃)·ln 2`.
pub fn vertical_norm_series(measure: &CantorMeasure, gens: RangeInclusive<usize>, quad: &QuadratureConfig) -> Result<NormSeries> {
    quad.validate()?;
    let params = measure.params;
    let terms: Vec<(f64, f64)> = gens
        .clone()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|n| {
            let t = generation_template(&params, params.start_gen + n, quad)?;
            let g = t.level_geometry(0);
            let middle = g.child_masses[1] + g.child_masses[2];
            let rho = bump_mass_ratio(&t, quad.rel_tol * 1e-4);
            let rho_coarse = bump_mass_ratio(&t, quad.rel_tol * 1e-2);
            let scale = middle * std::f64::consts::LN_2;
            Ok((rho * rho * scale, (rho * rho - rho_coarse * rho_coarse).abs() * scale))
        })
        .collect::<Result<_>>()?;
    Ok(NormSeries::from_terms(
        None,
        gens.collect(),
        terms.iter().map(|t| t.0).collect(),
        terms.iter().map(|t| t.1).collect(),
    ))
}

/// `K = 4(2^m - 1)/(C² m)·max_n ρ(n)²/L̂_n^m`, the constant in
/// `g(n, 1) <= K/(n+1)²` obtained from `μ(B(y,t)) <= μ(I₂) + μ(I₃)`.
pub fn aperture_one_constant(params: &CantorParams, gens: RangeInclusive<usize>, quad: &QuadratureConfig) -> Result<f64> {
    let m = params.m;
    let mut worst: f64 = 0.0;
    for n in gens {
        let t = generation_template(params, n, quad)?;
        let rho = bump_mass_ratio(&t, quad.rel_tol * 1e-4);
        let l = t.level_geometry(0).outer_length;
        worst = worst.max(rho * rho / l.powf(m));
    }
    Ok(4.0 * (2f64.powf(m) - 1.0) / (params.c * params.c * m) * worst)
}

/// Constant in `g(n, α) <= K_α·g_V(n)`: `μ(B(y, αt)) <= K_GROWTH·(2αt)^m`.
pub fn vertical_domination_constant(alpha: f64, m: f64) -> f64 {
    crate::pinned::K_GROWTH * (2.0 * alpha).powf(m)
}

/// Direct evaluation of one generation over all of its intervals in a full
/// measure of depth `n + 6`: ρ from leaf sums, `τ` by a 400-point midpoint
/// rule, `y` at the midpoints of the level-`n + 4` intervals and exact ball
/// masses. Independent of the template collapse.
pub fn direct_conical_term(params: &CantorParams, n: usize, alpha: f64) -> Result<f64> {
    const TAU_STEPS: usize = 400;
    let full = build_cantor(CantorParams { depth: n + 6, start_gen: 0, ..*params })?;
    let m = params.m;
    let nodes = full.nodes_at(n);
    let parts: Vec<f64> = nodes
        .par_iter()
        .map(|node| {
            let theta = leaf_bump_integral(&full, node) / node.len.powf(m);
            let l = full.level_geometry(n).outer_length * node.len;
            let kids = full.children(node);
            let mut ys = Vec::new();
            for kid in &kids[1..3] {
                collect_at_level(&full, kid, n + 4, &mut ys);
            }
            let h = 0.5 * l / TAU_STEPS as f64;
            let mut total = 0.0;
            for y in &ys {
                let mut acc = 0.0;
                for i in 0..TAU_STEPS {
                    let t = 0.5 * l + (i as f64 + 0.5) * h;
                    acc += full.interval_mass(y.mid() - alpha * t, y.mid() + alpha * t) * t.powf(-m - 1.0);
                }
                total += y.mass * acc * h;
            }
            theta * theta * total
        })
        .collect();
    Ok(parts.iter().sum())
}

/// Direct `‖V(1)‖²` contribution of generation `n` from the full tree.
pub fn direct_vertical_term(params: &CantorParams, n: usize) -> Result<f64> {
    let full = build_cantor(CantorParams { depth: n + 6, start_gen: 0, ..*params })?;
    let m = params.m;
    Ok(full
        .nodes_at(n)
        .iter()
        .map(|node| {
            let theta = leaf_bump_integral(&full, node) / node.len.powf(m);
            let kids = full.children(node);
            theta * theta * (kids[1].mass + kids[2].mass) * std::f64::consts::LN_2
        })
        .sum())
}

fn leaf_bump_integral(mu: &CantorMeasure, node: &Node) -> f64 {
    let mut leaves = Vec::new();
    collect_at_level(mu, node, mu.depth(), &mut leaves);
    let phi = |y: f64| bump((y - node.mid()) / node.len);
    leaves
        .iter()
        .map(|j| j.mass * quad::gauss5(0.0, 1.0, |s| phi(j.left + s * j.len)))
        .sum()
}

fn collect_at_level(mu: &CantorMeasure, node: &Node, level: usize, out: &mut Vec<Node>) {
    if node.level >= level || mu.is_leaf(node) {
        out.push(*node);
        return;
    }
    for k in mu.children(node) {
        collect_at_level(mu, &k, level, out);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseCheck {
    pub n: usize,
    pub alpha: f64,
    pub collapsed: f64,
    pub direct: f64,
    pub rel_diff: f64,
}

/// Collapsed against direct values for generations `0..=n_max`; fails with
/// `OracleMismatch` beyond `tolerance`.
pub fn validate_collapse(
    params: &CantorParams,
    alphas: &[f64],
    n_max: usize,
    tolerance: f64,
    quad: &QuadratureConfig,
) -> Result<Vec<CollapseCheck>> {
    let mut out = Vec::new();
    for &alpha in alphas {
        for n in 0..=n_max {
            let collapsed = collapsed_term(params, n, alpha, quad)?.value;
            let direct = direct_conical_term(params, n, alpha)?;
            let rel_diff = (collapsed - direct).abs() / direct.abs().max(f64::MIN_POSITIVE);
            if rel_diff > tolerance {
                return Err(Error::OracleMismatch(format!(
                    "generation {n}, aperture {alpha}: collapsed {collapsed:e} vs direct {direct:e}"
                )));
            }
            out.push(CollapseCheck { n, alpha, collapsed, direct, rel_diff });
        }
    }
    Ok(out)
}

/// Lipschitz constant of the bump adapted to an interval of length `len`.
pub(crate) fn bump_lipschitz(len: f64) -> f64 {
    BUMP_LIPSCHITZ / len
}
