use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use super::grid::{GridCube, ShiftedGrid};
use crate::measures::MeasureHandle;
use crate::{Error, Result};

/// Deepest subdivision of `Q₀` a forest may use.
pub const MAX_FOREST_DEPTH: u32 = 20;

/// Dyadic subcube of `Q₀`: `level` halvings deep, `index` from the left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubCube {
    pub level: u32,
    pub index: u64,
}

impl SubCube {
    pub const ROOT: SubCube = SubCube { level: 0, index: 0 };

    pub fn children(self) -> [SubCube; 2] {
        let level = self.level + 1;
        [SubCube { level, index: 2 * self.index }, SubCube { level, index: 2 * self.index + 1 }]
    }

    pub fn parent(self) -> Option<SubCube> {
        (self.level > 0).then(|| SubCube { level: self.level - 1, index: self.index / 2 })
    }

    /// Leaves of a depth-`depth` subdivision lying in this cube.
    pub fn leaf_range(self, depth: u32) -> std::ops::Range<usize> {
        let n = 1usize << (depth - self.level);
        let start = self.index as usize * n;
        start..start + n
    }

    pub fn contains(self, other: SubCube) -> bool {
        other.level >= self.level && other.index >> (other.level - self.level) == self.index
    }
}

/// Cube label in dumps: `(scale, index, shift-id)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeId(pub i32, pub i64, pub String);

impl fmt::Display for CubeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.0, self.1, self.2)
    }
}

/// `Q₀` as a cube of a grid. Subcubes finer than the grid's finest scale
/// continue the standard subdivision.
#[derive(Debug, Clone, PartialEq)]
pub struct RootCube {
    pub cube: GridCube,
    pub left: f64,
    pub len: f64,
    grid: ShiftedGrid,
}

impl RootCube {
    pub fn new(grid: &ShiftedGrid, cube: GridCube) -> Result<Self> {
        if !grid.contains_scale(cube.scale) {
            return Err(Error::InvalidParams(format!("scale {} not in the grid", cube.scale)));
        }
        let (a, b) = grid.interval(cube);
        Ok(Self { cube, left: a, len: b - a, grid: grid.clone() })
    }

    /// `[0, 1)` in the standard grid.
    pub fn unit() -> Self {
        let grid = ShiftedGrid::standard(0..=0).expect("static range");
        Self::new(&grid, GridCube { scale: 0, index: 0 }).expect("static cube")
    }

    pub fn interval(&self, q: SubCube) -> (f64, f64) {
        let side = self.len / (1u64 << q.level) as f64;
        let a = self.left + q.index as f64 * side;
        (a, a + side)
    }

    pub fn id(&self, q: SubCube) -> CubeId {
        let scale = self.cube.scale + q.level as i32;
        let left = self.grid.cube_units(self.cube).0;
        // descendants of one scale are consecutive, starting at Q₀'s left end
        let first = if scale <= self.grid.i_max {
            self.grid.locate_units(left, scale).index as i128
        } else {
            left << (scale - self.grid.i_max)
        };
        CubeId(scale, (first + q.index as i128) as i64, self.grid.shift_id())
    }
}

type LeafFn = dyn Fn(SubCube, u32) -> Vec<f64> + Send + Sync;

/// Accretive system: a function `b_Q` for each cube, given by its values on
/// the leaves of `Q`.
#[derive(Clone)]
pub enum AccretiveSystem {
    /// `b_Q = 1`.
    Constant,
    /// `b_Q = 1` on the left half of `Q`; on the right half `R`, `+1` on the
    /// left half of `R` and `-1` on its right half. `⟨b_Q⟩_Q = 1/2` and the
    /// stopping cube of each layer is the right half.
    SignPattern,
    Custom(Arc<LeafFn>),
}

impl fmt::Debug for AccretiveSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl AccretiveSystem {
    pub fn custom(f: impl Fn(SubCube, u32) -> Vec<f64> + Send + Sync + 'static) -> Self {
        AccretiveSystem::Custom(Arc::new(f))
    }

    pub fn name(&self) -> &'static str {
        match self {
            AccretiveSystem::Constant => "constant",
            AccretiveSystem::SignPattern => "sign-pattern",
            AccretiveSystem::Custom(_) => "custom",
        }
    }

    /// `b_Q` on the depth-`depth` leaves of `Q`.
    pub fn values(&self, q: SubCube, depth: u32) -> Vec<f64> {
        let n = 1usize << (depth - q.level);
        match self {
            AccretiveSystem::Constant => vec![1.0; n],
            AccretiveSystem::SignPattern => sign_pattern(n),
            AccretiveSystem::Custom(f) => {
                let v = f(q, depth);
                assert_eq!(v.len(), n, "accretive system returned {} values for {} leaves", v.len(), n);
                v
            }
        }
    }
}

/// Leaf values of the sign pattern on `n` leaves.
pub fn sign_pattern(n: usize) -> Vec<f64> {
    match n {
        1 => vec![1.0],
        // the right half is a single leaf; it gets the pattern's average
        2 => vec![1.0, 0.0],
        _ => {
            let (h, q) = (n / 2, n / 4);
            (0..n).map(|j| if j < h + q { 1.0 } else { -1.0 }).collect()
        }
    }
}

fn leaf_masses(measure: &MeasureHandle, root: &RootCube, depth: u32) -> Result<Vec<f64>> {
    let n = 1usize << depth;
    (0..n)
        .map(|j| {
            let (a, b) = root.interval(SubCube { level: depth, index: j as u64 });
            measure.interval_mass(a, b)
        })
        .collect()
}

fn average(values: &[f64], masses: &[f64]) -> Option<f64> {
    let mass: f64 = masses.iter().sum();
    (mass > 0.0).then(|| values.iter().zip(masses).map(|(v, w)| v * w).sum::<f64>() / mass)
}

/// `min |⟨b_Q⟩_Q|` over subcubes of `Q₀` of positive mass up to `depth`.
pub fn accretivity_constant(
    measure: &MeasureHandle,
    system: &AccretiveSystem,
    root: &RootCube,
    depth: u32,
) -> Result<f64> {
    check_depth(depth)?;
    let masses = leaf_masses(measure, root, depth)?;
    let mut worst = f64::INFINITY;
    for level in 0..=depth {
        for index in 0..1u64 << level {
            let q = SubCube { level, index };
            if let Some(avg) = average(&system.values(q, depth), &masses[q.leaf_range(depth)]) {
                worst = worst.min(avg.abs());
            }
        }
    }
    Ok(worst)
}

/// Half the measured accretivity constant.
pub fn default_threshold(measure: &MeasureHandle, system: &AccretiveSystem, root: &RootCube, depth: u32) -> Result<f64> {
    Ok(0.5 * accretivity_constant(measure, system, root, depth)?)
}

fn check_depth(depth: u32) -> Result<()> {
    if depth > MAX_FOREST_DEPTH {
        return Err(Error::InvalidParams(format!("depth {depth} exceeds {MAX_FOREST_DEPTH}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingCube {
    pub cube: SubCube,
    pub id: CubeId,
    pub layer: usize,
    /// Index of the enclosing cube of the previous layer.
    pub parent: Option<usize>,
    /// `⟨b_parent⟩_Q` when the cube stopped; `⟨b_{Q₀}⟩_{Q₀}` for the root.
    pub stopped_average: f64,
    /// `⟨b_Q⟩_Q` of the cube's own function.
    pub own_average: f64,
    /// `μ(∪ next-layer cubes inside Q)/μ(Q)`.
    pub tau_hat: f64,
    pub mass: f64,
    /// `b_Q` on the leaves of `Q`.
    pub b: Vec<f64>,
}

/// Layers `D⁰ = {Q₀}, D¹, D², …` of maximal stopping cubes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingForest {
    pub root: CubeId,
    pub c: f64,
    pub depth: u32,
    pub leaf_mass: Vec<f64>,
    pub cubes: Vec<StoppingCube>,
    pub layers: Vec<Vec<usize>>,
    /// Largest `τ̂` over cubes that could still have stopping subcubes.
    pub tau_max: f64,
    /// Grid index of the leftmost subcube at each level.
    level_base: Vec<i64>,
    #[serde(skip)]
    lookup: HashMap<SubCube, usize>,
}

/// Layered maximal-cube search. Inside each stopping cube `S` the subcubes
/// are visited top down and `Q` stops when `|∫_Q b_S dμ| < c μ(Q)`; the
/// search does not enter a stopped cube, which then starts its own layer.
pub fn build_stopping(
    measure: &MeasureHandle,
    system: &AccretiveSystem,
    root: &RootCube,
    c: f64,
    depth: u32,
) -> Result<StoppingForest> {
    check_depth(depth)?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParams(format!("threshold c = {c} must be positive")));
    }
    let leaf_mass = leaf_masses(measure, root, depth)?;
    let total: f64 = leaf_mass.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateInterval(format!("Q₀ = {} has no mass", root.id(SubCube::ROOT))));
    }
    let mut cubes: Vec<StoppingCube> = Vec::new();
    let new_cube = |q: SubCube, layer, parent, stopped_average: Option<f64>| -> Result<StoppingCube> {
        let b = system.values(q, depth);
        let masses = &leaf_mass[q.leaf_range(depth)];
        let mass: f64 = masses.iter().sum();
        let own = average(&b, masses).unwrap_or(0.0);
        if own.abs() < c {
            return Err(Error::AccretivityViolated { average: own, threshold: c });
        }
        Ok(StoppingCube {
            cube: q,
            id: root.id(q),
            layer,
            parent,
            stopped_average: stopped_average.unwrap_or(own),
            own_average: own,
            tau_hat: 0.0,
            mass,
            b,
        })
    };
    cubes.push(new_cube(SubCube::ROOT, 0, None, None)?);
    let mut layers = vec![vec![0usize]];
    let mut tau_max: f64 = 0.0;
    loop {
        let current = layers.last().expect("root layer").clone();
        let mut next = Vec::new();
        for &s in &current {
            let (sq, smass) = (cubes[s].cube, cubes[s].mass);
            if sq.level == depth {
                continue;
            }
            let base = sq.leaf_range(depth).start;
            // prefix sums of b_S dμ over the leaves of S
            let mut prefix = vec![0.0];
            for (j, v) in cubes[s].b.iter().enumerate() {
                prefix.push(prefix[j] + v * leaf_mass[base + j]);
            }
            let mut stopped_mass = 0.0;
            let mut stack: Vec<SubCube> = sq.children().into_iter().rev().collect();
            while let Some(q) = stack.pop() {
                let r = q.leaf_range(depth);
                let mass: f64 = leaf_mass[r.clone()].iter().sum();
                let integral = prefix[r.end - base] - prefix[r.start - base];
                if mass > 0.0 && integral.abs() < c * mass {
                    let cube = new_cube(q, layers.len(), Some(s), Some(integral / mass))?;
                    stopped_mass += mass;
                    next.push(cubes.len());
                    cubes.push(cube);
                } else if q.level < depth {
                    stack.extend(q.children().into_iter().rev());
                }
            }
            let tau = stopped_mass / smass;
            cubes[s].tau_hat = tau;
            tau_max = tau_max.max(tau);
        }
        if next.is_empty() {
            break;
        }
        layers.push(next);
    }
    let lookup = cubes.iter().enumerate().map(|(k, q)| (q.cube, k)).collect();
    let level_base = (0..=depth).map(|level| root.id(SubCube { level, index: 0 }).1).collect();
    Ok(StoppingForest { root: root.id(SubCube::ROOT), c, depth, leaf_mass, cubes, layers, tau_max, level_base, lookup })
}

impl StoppingForest {
    pub fn stopping_cubes(&self) -> usize {
        self.cubes.len() - 1
    }

    pub fn index_of(&self, q: SubCube) -> Option<usize> {
        if self.lookup.is_empty() && !self.cubes.is_empty() {
            // deserialized forests carry no lookup table
            return self.cubes.iter().position(|c| c.cube == q);
        }
        self.lookup.get(&q).copied()
    }

    /// `Qᵃ`: the smallest stopping cube containing `Q`.
    pub fn stopping_parent(&self, q: SubCube) -> usize {
        let mut cur = Some(q);
        while let Some(c) = cur {
            if let Some(k) = self.index_of(c) {
                return k;
            }
            cur = c.parent();
        }
        0
    }

    pub fn id(&self, q: SubCube) -> CubeId {
        CubeId(self.root.0 + q.level as i32, self.level_base[q.level as usize] + q.index as i64, self.root.2.clone())
    }

    pub fn mass(&self, q: SubCube) -> f64 {
        self.leaf_mass[q.leaf_range(self.depth)].iter().sum()
    }

    /// `1/(1 - τ̂) + 1` with the largest recorded `τ̂`.
    pub fn packing_bound(&self) -> f64 {
        1.0 / (1.0 - self.tau_max) + 1.0
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingResult {
    pub cube: SubCube,
    pub ratio: f64,
    pub bound: f64,
    pub holds: bool,
}

/// `Σ_{stopping S ⊆ R} μ(S)/μ(R)`, against `1/(1 - τ̂) + 1`.
pub fn carleson_packing(forest: &StoppingForest, r: SubCube) -> Result<PackingResult> {
    if r.level > forest.depth || r.index >= 1u64 << r.level {
        return Err(Error::InvalidParams(format!("cube {r:?} is not inside Q₀ at depth {}", forest.depth)));
    }
    let mass = forest.mass(r);
    let ratio = if mass > 0.0 {
        forest.cubes.iter().filter(|s| r.contains(s.cube)).map(|s| s.mass).sum::<f64>() / mass
    } else {
        0.0
    };
    let bound = forest.packing_bound();
    Ok(PackingResult { cube: r, ratio, bound, holds: ratio <= bound })
}
