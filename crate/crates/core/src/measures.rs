//! The four-child Cantor-type measure on `[0, 1]` together with Lebesgue and
//! point-mass measures behind one query interface.
//!
//! Every construction node `I` carries mass `ℓ(I)^m`. A node split with index
//! `n` keeps its two outer children of common length `L`, places the two
//! middle children (each of mass `μ(I)/(C n)`) at distance `L` from the outer
//! ones, and leaves a gap in the middle. The relative geometry only depends on
//! the splitting index, so the measure stores one [`NodeGeometry`] per level.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CantorParams {
    pub m: f64,
    /// Mass-splitting constant.
    pub c: f64,
    /// Number of splitting levels below the root; below it mass is uniform.
    pub depth: usize,
    /// Generation of the root interval. `0` is the full measure; a template
    /// with `start_gen = n` is the normalized measure inside a generation-`n`
    /// node, whose first split uses index `n + 1`.
    pub start_gen: usize,
}

impl Default for CantorParams {
    fn default() -> Self {
        Self { m: 0.4, c: 16.0, depth: 12, start_gen: 0 }
    }
}

impl CantorParams {
    pub fn new(m: f64, c: f64, depth: usize) -> Self {
        Self { m, c, depth, start_gen: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.m < 0.5) {
            return Err(Error::InvalidParams(format!("m = {} outside (0, 1/2)", self.m)));
        }
        if !(self.c >= 4.0) || !self.c.is_finite() {
            return Err(Error::InvalidParams(format!("C = {} must be at least 4", self.c)));
        }
        Ok(())
    }
}

/// Child layout of a node split with index `generation`, relative to a parent
/// of unit length and unit mass. Children are ordered left to right; 1 and 2
/// are the middle children.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeGeometry {
    pub generation: usize,
    pub parent_length: f64,
    pub child_offsets: [f64; 4],
    pub child_lengths: [f64; 4],
    pub child_masses: [f64; 4],
    /// Common length of the outer children.
    pub outer_length: f64,
    pub middle_gap: f64,
}

impl NodeGeometry {
    pub fn compute(m: f64, c: f64, index: usize) -> Result<Self> {
        let middle_mass = 1.0 / (c * index as f64);
        let outer_mass = 0.5 * (1.0 - 2.0 * middle_mass);
        let inv_m = 1.0 / m;
        let outer = outer_mass.powf(inv_m);
        let middle = middle_mass.powf(inv_m);
        let gap = 1.0 - 4.0 * outer - 2.0 * middle;
        if !(gap > 0.0) {
            return Err(Error::GeometryInfeasible { index, gap });
        }
        // renormalize so the four masses sum to one exactly in floating point
        let total = 2.0 * outer_mass + 2.0 * middle_mass;
        let masses = [outer_mass / total, middle_mass / total, middle_mass / total, outer_mass / total];
        Ok(Self {
            generation: index,
            parent_length: 1.0,
            child_offsets: [0.0, 2.0 * outer, 1.0 - 2.0 * outer - middle, 1.0 - outer],
            child_lengths: [outer, middle, middle, outer],
            child_masses: masses,
            outer_length: outer,
            middle_gap: gap,
        })
    }

    pub fn middle_length(&self) -> f64 {
        self.child_lengths[1]
    }

    /// Left and right end of the two middle children, relative.
    pub fn middle_span(&self) -> (f64, f64) {
        (self.child_offsets[1], self.child_offsets[2] + self.child_lengths[2])
    }
}

/// One node of the construction tree, in absolute coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    /// Level below the measure's root (0 = root).
    pub level: usize,
    pub left: f64,
    pub len: f64,
    pub mass: f64,
}

impl Node {
    pub fn right(&self) -> f64 {
        self.left + self.len
    }

    pub fn mid(&self) -> f64 {
        self.left + 0.5 * self.len
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.left && x <= self.right()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CantorMeasure {
    pub params: CantorParams,
    levels: Vec<NodeGeometry>,
}

pub fn build_cantor(params: CantorParams) -> Result<CantorMeasure> {
    params.validate()?;
    let levels = (0..params.depth)
        .map(|k| NodeGeometry::compute(params.m, params.c, params.start_gen + k + 1))
        .collect::<Result<Vec<_>>>()?;
    Ok(CantorMeasure { params, levels })
}

/// Normalized measure inside a generation-`start_gen` node.
pub fn template_measure(params: CantorParams) -> Result<CantorMeasure> {
    build_cantor(params)
}

impl CantorMeasure {
    pub fn depth(&self) -> usize {
        self.params.depth
    }

    pub fn m(&self) -> f64 {
        self.params.m
    }

    /// Geometry used to split nodes at `level` (0-based below the root).
    pub fn level_geometry(&self, level: usize) -> &NodeGeometry {
        &self.levels[level]
    }

    pub fn levels(&self) -> &[NodeGeometry] {
        &self.levels
    }

    /// Geometry of the children of generation `generation - 1` nodes, for
    /// `1 <= generation <= depth` (relative to the measure's root generation).
    pub fn node_geometry(&self, generation: usize) -> Result<NodeGeometry> {
        if generation == 0 || generation > self.depth() {
            return Err(Error::OutOfRange { requested: generation, max: self.depth() });
        }
        Ok(self.levels[generation - 1])
    }

    pub fn root(&self) -> Node {
        Node { level: 0, left: 0.0, len: 1.0, mass: 1.0 }
    }

    pub fn is_leaf(&self, node: &Node) -> bool {
        node.level >= self.depth()
    }

    pub fn children(&self, node: &Node) -> [Node; 4] {
        let g = &self.levels[node.level];
        std::array::from_fn(|j| Node {
            level: node.level + 1,
            left: node.left + g.child_offsets[j] * node.len,
            len: g.child_lengths[j] * node.len,
            mass: g.child_masses[j] * node.mass,
        })
    }

    pub fn node_at_path(&self, path: &[usize]) -> Node {
        path.iter().fold(self.root(), |n, &j| self.children(&n)[j])
    }

    /// All nodes at `level`, left to right.
    pub fn nodes_at(&self, level: usize) -> Vec<Node> {
        let mut nodes = vec![self.root()];
        for _ in 0..level.min(self.depth()) {
            nodes = nodes.iter().flat_map(|n| self.children(n)).collect();
        }
        nodes
    }

    pub fn interval_mass(&self, a: f64, b: f64) -> f64 {
        self.mass_in(&self.root(), a, b)
    }

    fn mass_in(&self, node: &Node, a: f64, b: f64) -> f64 {
        let (lo, hi) = (node.left, node.right());
        if b < lo || a > hi || node.mass == 0.0 {
            return 0.0;
        }
        if a <= lo && b >= hi {
            return node.mass;
        }
        if self.is_leaf(node) {
            let overlap = (b.min(hi) - a.max(lo)).max(0.0);
            return if node.len > 0.0 { node.mass * overlap / node.len } else { 0.0 };
        }
        self.children(node).iter().map(|c| self.mass_in(c, a, b)).sum()
    }

    /// `∫ g dμ` over the whole measure by descent with a Lipschitz acceptance
    /// rule: a node is replaced by its midpoint value once `lip * len <= tol`.
    /// Nodes are symmetric about their midpoint, so the midpoint carries the
    /// node's centre of mass. Leaves use a uniform density.
    pub fn integrate_lipschitz<F: Fn(f64) -> f64>(&self, node: &Node, g: &F, lip: f64, tol: f64) -> f64 {
        if node.mass == 0.0 {
            return 0.0;
        }
        if self.is_leaf(node) {
            return node.mass * crate::quad::gauss3(0.0, 1.0, |u| g(node.left + u * node.len));
        }
        if lip * node.len <= tol {
            return node.mass * g(node.mid());
        }
        self.children(node)
            .iter()
            .map(|c| self.integrate_lipschitz(c, g, lip, tol))
            .sum()
    }

    /// Random point distributed by the measure (descent by mass).
    pub fn sample_point<R: Rng>(&self, rng: &mut R) -> f64 {
        let mut node = self.root();
        while !self.is_leaf(&node) {
            let u: f64 = rng.random();
            let kids = self.children(&node);
            let mut acc = 0.0;
            let mut pick = kids[3];
            for k in kids {
                acc += k.mass / node.mass;
                if u < acc {
                    pick = k;
                    break;
                }
            }
            node = pick;
        }
        node.left + rng.random::<f64>() * node.len
    }

    /// JSON dump: one entry per level with relative offsets, lengths and masses.
    pub fn geometry_json(&self) -> serde_json::Value {
        serde_json::json!({
            "m": self.params.m,
            "C": self.params.c,
            "start_gen": self.params.start_gen,
            "levels": self.levels.iter().map(|g| serde_json::json!({
                "generation": g.generation,
                "offsets": g.child_offsets,
                "lengths": g.child_lengths,
                "masses": g.child_masses,
            })).collect::<Vec<_>>(),
        })
    }
}

/// A measure on the line that answers exact interval-mass queries.
#[derive(Debug, Clone)]
pub enum MeasureHandle {
    Cantor(Arc<CantorMeasure>),
    Lebesgue { a: f64, b: f64 },
    /// `(position, mass)` atoms.
    PointMasses(Vec<(f64, f64)>),
}

impl From<CantorMeasure> for MeasureHandle {
    fn from(m: CantorMeasure) -> Self {
        MeasureHandle::Cantor(Arc::new(m))
    }
}

impl MeasureHandle {
    pub fn lebesgue(a: f64, b: f64) -> Self {
        MeasureHandle::Lebesgue { a, b }
    }

    pub fn as_cantor(&self) -> Option<&CantorMeasure> {
        match self {
            MeasureHandle::Cantor(c) => Some(c),
            _ => None,
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            MeasureHandle::Cantor(_) => (0.0, 1.0),
            MeasureHandle::Lebesgue { a, b } => (*a, *b),
            MeasureHandle::PointMasses(pts) => pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, _)| {
                (lo.min(x), hi.max(x))
            }),
        }
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            MeasureHandle::Cantor(_) => 1.0,
            MeasureHandle::Lebesgue { a, b } => b - a,
            MeasureHandle::PointMasses(pts) => pts.iter().map(|p| p.1).sum(),
        }
    }

    pub fn interval_mass(&self, a: f64, b: f64) -> Result<f64> {
        if b < a {
            return Err(Error::ReversedInterval { a, b });
        }
        Ok(self.mass_unchecked(a, b))
    }

    pub(crate) fn mass_unchecked(&self, a: f64, b: f64) -> f64 {
        match self {
            MeasureHandle::Cantor(c) => c.interval_mass(a, b),
            MeasureHandle::Lebesgue { a: lo, b: hi } => (b.min(*hi) - a.max(*lo)).max(0.0),
            MeasureHandle::PointMasses(pts) => pts
                .iter()
                .filter(|(x, _)| *x >= a && *x <= b)
                .map(|p| p.1)
                .sum(),
        }
    }

    pub fn ball_mass(&self, x: f64, r: f64) -> Result<f64> {
        if r < 0.0 {
            return Err(Error::NegativeRadius(r));
        }
        if r == 0.0 && !matches!(self, MeasureHandle::PointMasses(_)) {
            return Ok(0.0);
        }
        Ok(self.mass_unchecked(x - r, x + r))
    }

    /// `∫_a^b g dμ` at tree resolution `depth`: Cantor nodes at that depth are
    /// collapsed to their midpoint, Lebesgue measure uses `2^depth` panels.
    pub fn integrate<F: Fn(f64) -> f64>(&self, g: &F, a: f64, b: f64, depth: usize) -> f64 {
        match self {
            MeasureHandle::Cantor(c) => integrate_cantor(c, &c.root(), g, a, b, depth),
            MeasureHandle::Lebesgue { a: lo, b: hi } => {
                let (a, b) = (a.max(*lo), b.min(*hi));
                crate::quad::composite_gauss5(a, b, 1usize << depth.min(16), g)
            }
            MeasureHandle::PointMasses(pts) => pts
                .iter()
                .filter(|(x, _)| *x >= a && *x <= b)
                .map(|&(x, w)| w * g(x))
                .sum(),
        }
    }
}

fn integrate_cantor<F: Fn(f64) -> f64>(c: &CantorMeasure, node: &Node, g: &F, a: f64, b: f64, depth: usize) -> f64 {
    let (lo, hi) = (node.left, node.right());
    if b < lo || a > hi || node.mass == 0.0 {
        return 0.0;
    }
    let inside = a <= lo && b >= hi;
    if c.is_leaf(node) {
        // parametrize by the node so leaves below coordinate resolution keep their mass
        if inside {
            return node.mass * crate::quad::gauss3(0.0, 1.0, |u| g(lo + u * node.len));
        }
        let (l, r) = (a.max(lo), b.min(hi));
        if r <= l || node.len <= 0.0 {
            return 0.0;
        }
        return node.mass / node.len * crate::quad::gauss3(l, r, g);
    }
    if node.level >= depth {
        if inside {
            return node.mass * g(node.mid());
        }
        let (l, r) = (a.max(lo), b.min(hi));
        return c.interval_mass(l, r) * g(0.5 * (l + r));
    }
    c.children(node).iter().map(|k| integrate_cantor(c, k, g, a, b, depth)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthEstimate {
    pub ratio: f64,
    pub witness: (f64, f64),
    pub samples: usize,
}

/// Supremum estimate of `μ(J)/ℓ(J)^m` over construction intervals (Cantor,
/// up to level 7) and `n_samples` random intervals anchored at random points
/// of the support with log-uniform lengths in `[1e-12, 1]`.
pub fn growth_constant(measure: &MeasureHandle, m: f64, n_samples: usize, seed: u64) -> GrowthEstimate {
    let mut best = GrowthEstimate { ratio: 0.0, witness: (0.0, 0.0), samples: 0 };
    let consider = |a: f64, b: f64, best: &mut GrowthEstimate| {
        let len = b - a;
        if !(len > 0.0) {
            return;
        }
        best.samples += 1;
        let ratio = measure.mass_unchecked(a, b) / len.powf(m);
        if ratio > best.ratio {
            best.ratio = ratio;
            best.witness = (a, b);
        }
    };
    if let MeasureHandle::Cantor(c) = measure {
        for level in 0..=c.depth().min(7) {
            for node in c.nodes_at(level) {
                consider(node.left, node.right(), &mut best);
            }
        }
    }
    let mut rng = rng::stream(seed, "growth", 0);
    let (lo, hi) = measure.support();
    for _ in 0..n_samples {
        let x = match measure {
            MeasureHandle::Cantor(c) => c.sample_point(&mut rng),
            MeasureHandle::PointMasses(pts) if !pts.is_empty() => pts[rng.random_range(0..pts.len())].0,
            _ => lo + rng.random::<f64>() * (hi - lo),
        };
        let len = 10f64.powf(-12.0 * rng.random::<f64>());
        let v: f64 = rng.random();
        consider(x - v * len, x + (1.0 - v) * len, &mut best);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn default_measure(depth: usize) -> CantorMeasure {
        build_cantor(CantorParams::new(0.4, 16.0, depth)).unwrap()
    }

    #[test]
    fn first_generation_middle_child() {
        let mu = default_measure(1);
        let g = mu.node_geometry(1).unwrap();
        assert!((g.child_masses[1] - 1.0 / 16.0).abs() < 1e-15);
        // 16^{-2.5} = 2^{-10}
        assert!((g.child_lengths[1] - 2f64.powi(-10)).abs() < 1e-18);
        assert!((g.child_masses[0] - 7.0 / 16.0).abs() < 1e-15);
        let l = (7.0f64 / 16.0).powf(2.5);
        assert!((g.outer_length - l).abs() < 1e-15);
        assert!((g.outer_length - 0.1266).abs() < 1e-4);
        assert!((g.middle_gap - (1.0 - 4.0 * l - 2.0 * 2f64.powi(-10))).abs() < 1e-14);
        assert!(g.middle_gap > 0.0);
    }

    #[test]
    fn depth_zero_is_single_unit_node() {
        let mu = default_measure(0);
        assert_eq!(mu.nodes_at(3), vec![mu.root()]);
        assert_eq!(mu.interval_mass(0.0, 1.0), 1.0);
        assert!(matches!(mu.node_geometry(1), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(matches!(build_cantor(CantorParams::new(0.5, 16.0, 2)), Err(Error::InvalidParams(_))));
        assert!(matches!(build_cantor(CantorParams::new(0.4, 3.0, 2)), Err(Error::InvalidParams(_))));
        // validated parameters always leave a positive gap; m beyond 1/2 does not
        assert!(NodeGeometry::compute(0.4, 4.0, 1).is_ok());
        assert!(matches!(NodeGeometry::compute(0.9, 4.0, 1), Err(Error::GeometryInfeasible { .. })));
    }

    #[test]
    fn known_interval_masses() {
        let mu = default_measure(8);
        assert!((mu.interval_mass(0.0, 1.0) - 1.0).abs() < 1e-14);
        let l = mu.node_geometry(1).unwrap().outer_length;
        assert!((mu.interval_mass(0.0, l) - 7.0 / 16.0).abs() < 1e-14);
        assert_eq!(mu.interval_mass(0.49, 0.51), 0.0);
    }

    #[test]
    fn lebesgue_and_points() {
        let leb = MeasureHandle::lebesgue(0.0, 1.0);
        assert!((leb.ball_mass(0.5, 0.1).unwrap() - 0.2).abs() < 1e-15);
        assert!(matches!(leb.interval_mass(1.0, 0.0), Err(Error::ReversedInterval { .. })));
        assert!(matches!(leb.ball_mass(0.0, -1.0), Err(Error::NegativeRadius(_))));
        let cantor: MeasureHandle = default_measure(6).into();
        assert_eq!(cantor.ball_mass(0.3, 0.0).unwrap(), 0.0);
        let pts = MeasureHandle::PointMasses(vec![(0.25, 0.5), (0.75, 0.5)]);
        assert_eq!(pts.interval_mass(0.0, 0.5).unwrap(), 0.5);
    }

    #[test]
    fn mass_length_law_on_construction_nodes() {
        let mu = default_measure(6);
        for level in 0..=6 {
            for node in mu.nodes_at(level) {
                let law = node.len.powf(0.4);
                assert!((node.mass - law).abs() <= 1e-12 * node.mass, "level {level}: {node:?}");
            }
        }
    }

    #[test]
    fn separation_of_children() {
        let mu = default_measure(30);
        for g in mu.levels() {
            let l = g.outer_length;
            let gap01 = g.child_offsets[1] - g.child_lengths[0];
            let gap23 = g.child_offsets[3] - (g.child_offsets[2] + g.child_lengths[2]);
            assert!((gap01 - l).abs() < 1e-14 && (gap23 - l).abs() < 1e-14);
            assert!(g.middle_gap > 0.0);
            assert_eq!(g.child_offsets[0], 0.0);
            assert!((g.child_offsets[3] + g.child_lengths[3] - 1.0).abs() < 1e-15);
            let s: f64 = g.child_masses.iter().sum();
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn template_start_gen_five() {
        let t = template_measure(CantorParams { start_gen: 5, ..CantorParams::new(0.4, 16.0, 3) }).unwrap();
        let g = t.node_geometry(1).unwrap();
        assert!((g.child_masses[1] - 1.0 / (16.0 * 6.0)).abs() < 1e-15);
    }

    #[test]
    fn template_matches_full_tree_descent() {
        // normalized descendants of every generation-n node agree with the
        // template started at generation n
        let full = default_measure(6);
        for n in 0..=3usize {
            let t = template_measure(CantorParams { start_gen: n, ..CantorParams::new(0.4, 16.0, 3) }).unwrap();
            let tnodes = t.nodes_at(3);
            for base in full.nodes_at(n) {
                let mut sub = vec![base];
                for _ in 0..3 {
                    sub = sub.iter().flat_map(|x| full.children(x)).collect();
                }
                for (a, b) in sub.iter().zip(&tnodes) {
                    assert!((a.mass / base.mass - b.mass).abs() <= 1e-12 * b.mass);
                    assert!((a.len / base.len - b.len).abs() <= 1e-12 * b.len);
                    assert!((a.left - base.left - b.left * base.len).abs() <= 4.0 * f64::EPSILON);
                }
            }
        }
    }

    #[test]
    fn middle_ball_bound() {
        // a ball of radius t <= L around a middle child's centre only sees the
        // two middle children, whose total mass is at most t^m/(n+1)
        let mu = default_measure(10);
        for level in 0..4 {
            let g = *mu.level_geometry(level);
            let n = level + 1;
            for node in mu.nodes_at(level).into_iter().take(8) {
                let kids = mu.children(&node);
                let l = g.outer_length * node.len;
                for k in [1, 2] {
                    for frac in [0.5, 0.75, 1.0] {
                        let t = frac * l;
                        let mass = mu.interval_mass(kids[k].mid() - t, kids[k].mid() + t);
                        assert!(mass <= 2.0 * node.mass / (16.0 * n as f64) + 1e-15);
                        assert!(mass <= t.powf(0.4) / (n as f64 + 1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn growth_constant_values() {
        let leb = MeasureHandle::lebesgue(0.0, 1.0);
        let g = growth_constant(&leb, 1.0, 1000, 3);
        assert!((g.ratio - 1.0).abs() < 1e-9);
        let mu: MeasureHandle = default_measure(12).into();
        let g1 = growth_constant(&mu, 0.4, 2000, 11);
        let g2 = growth_constant(&mu, 0.4, 2000, 11);
        assert_eq!(g1, g2);
        assert!(g1.ratio >= 1.0 - 1e-12 && g1.ratio <= 4.0);
    }

    #[test]
    fn geometry_dump_has_all_levels() {
        let mu = default_measure(4);
        let v = mu.geometry_json();
        assert_eq!(v["levels"].as_array().unwrap().len(), 4);
    }

    proptest! {
        #[test]
        fn additivity(a in 0.0f64..1.0, s in 0.0f64..1.0, w in 0.0f64..1.0) {
            let mu = default_measure(10);
            let b = a + w * (1.0 - a);
            let c = a + s * (b - a);
            let whole = mu.interval_mass(a, b);
            let split = mu.interval_mass(a, c) + mu.interval_mass(c, b);
            prop_assert!((whole - split).abs() <= 1e-12 * whole.max(1e-300) + 1e-300);
        }

        #[test]
        fn monotone(a in 0.0f64..1.0, w in 0.0f64..0.5, e in 0.0f64..0.1) {
            let mu = default_measure(10);
            prop_assert!(mu.interval_mass(a, a + w) <= mu.interval_mass(a - e, a + w + e) + 1e-15);
        }
    }
}
