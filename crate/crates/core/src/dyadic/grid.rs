use rand::Rng;
use serde::{Deserialize, Serialize};
use std::ops::RangeInclusive;

use crate::rng;
use crate::{Error, Result};

/// Widest scale range a grid may span; positions are kept as integers in
/// units of the finest side length and must fit an `i128`.
pub const MAX_SCALE_SPAN: i32 = 96;

/// A cube of a grid: side `2^{-scale}`, numbered left to right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridCube {
    pub scale: i32,
    pub index: i64,
}

/// One-dimensional dyadic grid translated by shift bits `w_i ∈ {0, 1}`.
///
/// The cube of scale `i` and index `k` is `[k 2^{-i}, (k+1) 2^{-i})`
/// translated by `Σ_{j > i} w_j 2^{-j}`, the sum running over the scales of
/// the grid finer than `i`. Cubes of consecutive scales nest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftedGrid {
    pub seed: Option<u64>,
    pub i_min: i32,
    pub i_max: i32,
    /// `shifts[i - i_min] = w_i`.
    shifts: Vec<u8>,
}

fn check_range(i_min: i32, i_max: i32) -> Result<()> {
    if i_min > i_max {
        return Err(Error::InvalidParams(format!("empty scale range {i_min}..={i_max}")));
    }
    if i_max - i_min > MAX_SCALE_SPAN {
        return Err(Error::InvalidParams(format!(
            "scale range {i_min}..={i_max} spans more than {MAX_SCALE_SPAN} scales"
        )));
    }
    if i_min.abs() > 1 << 20 || i_max.abs() > 1 << 20 {
        return Err(Error::InvalidParams(format!("scale range {i_min}..={i_max} out of bounds")));
    }
    Ok(())
}

/// Grid with independent uniform shift bits. Bits are drawn from the finest
/// scale upward, so two grids from the same seed that share `i_max` agree on
/// every scale they have in common.
pub fn make_grid(seed: u64, scales: RangeInclusive<i32>) -> Result<ShiftedGrid> {
    let (i_min, i_max) = (*scales.start(), *scales.end());
    check_range(i_min, i_max)?;
    let mut r = rng::stream(seed, "grid", 0);
    let n = (i_max - i_min + 1) as usize;
    let mut shifts = vec![0u8; n];
    for slot in shifts.iter_mut().rev() {
        *slot = r.random_range(0..2u8);
    }
    Ok(ShiftedGrid { seed: Some(seed), i_min, i_max, shifts })
}

impl ShiftedGrid {
    /// The standard dyadic grid on the given scales.
    pub fn standard(scales: RangeInclusive<i32>) -> Result<Self> {
        let (i_min, i_max) = (*scales.start(), *scales.end());
        check_range(i_min, i_max)?;
        Ok(Self { seed: None, i_min, i_max, shifts: vec![0; (i_max - i_min + 1) as usize] })
    }

    /// Grid with explicit bits, `shifts[k]` being the bit of scale `i_min + k`.
    pub fn from_shifts(i_min: i32, shifts: Vec<u8>) -> Result<Self> {
        if shifts.is_empty() {
            return Err(Error::InvalidParams("no shift bits".into()));
        }
        let i_max = i_min + shifts.len() as i32 - 1;
        check_range(i_min, i_max)?;
        if shifts.iter().any(|&w| w > 1) {
            return Err(Error::InvalidParams("shift bits must be 0 or 1".into()));
        }
        Ok(Self { seed: None, i_min, i_max, shifts })
    }

    pub fn shift(&self, scale: i32) -> u8 {
        self.shifts[(scale - self.i_min) as usize]
    }

    pub fn shifts(&self) -> &[u8] {
        &self.shifts
    }

    /// Copy with the bit of one scale replaced.
    pub fn with_shift(&self, scale: i32, w: u8) -> Self {
        let mut g = self.clone();
        g.shifts[(scale - self.i_min) as usize] = w & 1;
        g.seed = None;
        g
    }

    pub fn contains_scale(&self, scale: i32) -> bool {
        (self.i_min..=self.i_max).contains(&scale)
    }

    /// Label used in dumps: the first scale followed by the bits.
    pub fn shift_id(&self) -> String {
        let bits: String = self.shifts.iter().map(|w| if *w == 1 { '1' } else { '0' }).collect();
        format!("{}:{}", self.i_min, bits)
    }

    fn unit_exp(&self, scale: i32) -> u32 {
        (self.i_max - scale) as u32
    }

    /// `Σ_{j > scale} w_j 2^{-j}` in units of `2^{-i_max}`.
    fn offset_units(&self, scale: i32) -> i128 {
        ((scale + 1).max(self.i_min)..=self.i_max)
            .filter(|&j| self.shift(j) == 1)
            .map(|j| 1i128 << self.unit_exp(j))
            .sum()
    }

    /// Left endpoint and side of a cube in units of `2^{-i_max}`.
    pub(crate) fn cube_units(&self, c: GridCube) -> (i128, i128) {
        let side = 1i128 << self.unit_exp(c.scale);
        (c.index as i128 * side + self.offset_units(c.scale), side)
    }

    fn unit(&self) -> f64 {
        2f64.powi(-self.i_max)
    }

    /// `[a, b)` of a cube.
    pub fn interval(&self, c: GridCube) -> (f64, f64) {
        let (left, side) = self.cube_units(c);
        let u = self.unit();
        (left as f64 * u, (left + side) as f64 * u)
    }

    pub(crate) fn locate_units(&self, x: i128, scale: i32) -> GridCube {
        let side = 1i128 << self.unit_exp(scale);
        let k = (x - self.offset_units(scale)).div_euclid(side);
        GridCube { scale, index: k as i64 }
    }

    /// The cube of the given scale containing `x`.
    pub fn locate(&self, x: f64, scale: i32) -> Option<GridCube> {
        if !self.contains_scale(scale) || !x.is_finite() {
            return None;
        }
        let units = (x / self.unit()).floor();
        if units.abs() > 1e30 {
            return None;
        }
        Some(self.locate_units(units as i128, scale))
    }

    /// The ancestor `levels` scales coarser, if the grid has that scale.
    pub fn ancestor(&self, c: GridCube, levels: u32) -> Option<GridCube> {
        let scale = c.scale - levels as i32;
        if !self.contains_scale(scale) || !self.contains_scale(c.scale) {
            return None;
        }
        Some(self.locate_units(self.cube_units(c).0, scale))
    }

    /// The two children, if the grid has the finer scale.
    pub fn children(&self, c: GridCube) -> Option<[GridCube; 2]> {
        let scale = c.scale + 1;
        if !self.contains_scale(scale) || !self.contains_scale(c.scale) {
            return None;
        }
        let first = self.locate_units(self.cube_units(c).0, scale);
        Some([first, GridCube { scale, index: first.index + 1 }])
    }

    /// The cube `R` whose Whitney region `R × (ℓ(R)/2, ℓ(R)]` contains
    /// `(x, t)`, if its scale is in the grid.
    pub fn whitney_region(&self, x: f64, t: f64) -> Option<GridCube> {
        if !(t > 0.0) {
            return None;
        }
        let mut scale = (-t.log2()).floor() as i32;
        // `t` sits in (2^{-scale-1}, 2^{-scale}]; repair rounding at the edges
        if t > 2f64.powi(-scale) {
            scale -= 1;
        } else if t <= 2f64.powi(-scale - 1) {
            scale += 1;
        }
        self.locate(x, scale)
    }
}

/// `γ = α/(2m + 2α)` and the scale gap `r`.
///
/// `r` is the smallest integer with `2^{r(1-γ)} >= 3` for which goodness
/// also has positive probability. The second condition is certified by the
/// union bound `Σ_{s >= r} P(bad at s levels up) < 1`, each term counted
/// exactly over the `2^s` equally likely positions of `Q` inside its
/// ancestor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodnessParams {
    pub m: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub r: u32,
    /// Smallest integer with `2^{r(1-γ)} >= 3`.
    pub r_min: u32,
    /// `Σ_{s >= r} P(bad at level s) < 1`, so `π_good >= 1 - bad_bound`.
    pub bad_bound: f64,
}

/// Probability that the ancestor `s` levels up is too close, for a cube at
/// a uniformly random position among the `2^s` slots.
fn bad_probability(gamma: f64, s: u32) -> f64 {
    if s > 52 {
        // exact slot counts no longer fit; use the majorant of the count
        return 2.0 * 2f64.powf(-(s as f64) * gamma) + 2f64.powf(1.0 - s as f64);
    }
    let slots = 2f64.powi(s as i32);
    // slot k is bad iff min(k, 2^s - 1 - k) <= 2^{s(1-γ)}
    let reach = 2f64.powf(s as f64 * (1.0 - gamma)).floor() + 1.0;
    (2.0 * reach).min(slots) / slots
}

/// `Σ_{s >= r} P(bad at level s)`, with the tail past 400 levels bounded by
/// its geometric majorant.
fn bad_union_bound(gamma: f64, r: u32) -> f64 {
    let last = r + 400;
    let head: f64 = (r..last).map(|s| bad_probability(gamma, s)).sum();
    let q = 2f64.powf(-gamma);
    head + 4.0 * q.powf(last as f64) / (1.0 - q)
}

impl GoodnessParams {
    pub fn new(m: f64, alpha: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite() && alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParams(format!("goodness needs m > 0 and α > 0, got m={m}, α={alpha}")));
        }
        let gamma = alpha / (2.0 * m + 2.0 * alpha);
        let mut r_min = (3f64.log2() / (1.0 - gamma)).ceil().max(1.0) as u32;
        while r_min > 1 && 2f64.powf((r_min - 1) as f64 * (1.0 - gamma)) >= 3.0 {
            r_min -= 1;
        }
        while 2f64.powf(r_min as f64 * (1.0 - gamma)) < 3.0 {
            r_min += 1;
        }
        let mut r = r_min;
        let mut bad_bound = bad_union_bound(gamma, r);
        while bad_bound >= 1.0 {
            if r > 100_000 {
                return Err(Error::InvalidParams(format!("γ = {gamma} is too small for a usable scale gap")));
            }
            r += 1;
            bad_bound = bad_union_bound(gamma, r);
        }
        Ok(Self { m, alpha, gamma, r, r_min, bad_bound })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Goodness {
    /// No ancestor `r..=cutoff` scales up is too close. Coarser scales are
    /// not examined, so this over-approximates goodness.
    Good { cutoff: u32 },
    /// The ancestor `levels_up` scales coarser has its boundary within
    /// `ℓ(Q)^γ ℓ(Q̃)^{1-γ}`.
    Bad { levels_up: u32 },
    /// The grid ran out of scales after `checked_to` levels with no hit.
    Undetermined { checked_to: u32 },
}

impl Goodness {
    pub fn is_bad(&self) -> bool {
        matches!(self, Goodness::Bad { .. })
    }
}

/// Goodness of `cube` against its ancestors `r..=cutoff` scales coarser.
pub fn classify_good(grid: &ShiftedGrid, cube: GridCube, params: &GoodnessParams, cutoff: u32) -> Result<Goodness> {
    if cutoff < params.r {
        return Err(Error::CutoffBelowR { cutoff: cutoff as usize, r: params.r as usize });
    }
    if !grid.contains_scale(cube.scale) {
        return Err(Error::InvalidParams(format!("scale {} not in the grid", cube.scale)));
    }
    let (q_left, q_side) = grid.cube_units(cube);
    let q_right = q_left + q_side;
    let unit_exp = grid.unit_exp(cube.scale) as f64;
    for s in params.r..=cutoff {
        let Some(anc) = grid.ancestor(cube, s) else {
            return Ok(Goodness::Undetermined { checked_to: s - 1 });
        };
        let (a_left, a_side) = grid.cube_units(anc);
        let dist = (q_left - a_left).min(a_left + a_side - q_right);
        // ℓ(Q)^γ ℓ(Q̃)^{1-γ} = ℓ(Q)·2^{s(1-γ)}, in grid units
        let threshold = 2f64.powf(unit_exp + s as f64 * (1.0 - params.gamma));
        if dist as f64 <= threshold {
            return Ok(Goodness::Bad { levels_up: s });
        }
    }
    Ok(Goodness::Good { cutoff })
}

/// Monte Carlo estimate of `P(Q + w is good)` for one base cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiGoodEstimate {
    pub base: GridCube,
    pub trials: usize,
    pub good: usize,
    pub estimate: f64,
    pub std_err: f64,
    /// 95% normal interval, clipped to `[0, 1]`.
    pub ci: (f64, f64),
}

/// Estimates for two base cubes and their agreement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiGoodReport {
    pub params: GoodnessParams,
    pub cutoff: u32,
    pub primary: PiGoodEstimate,
    pub secondary: PiGoodEstimate,
    pub pooled_se: f64,
    /// `|p₁ - p₂| <= 3·pooled_se`.
    pub independent: bool,
}

/// Shifts for trial `trial`: scales `-cutoff..=0` with bits drawn finest
/// first, so raising the cutoff only appends coarser bits.
fn trial_grid(seed: u64, stream: &str, trial: usize, cutoff: u32) -> Result<ShiftedGrid> {
    make_grid(rng::derive_seed(seed, stream, trial as u64), -(cutoff as i32)..=0)
}

/// The base cube is fixed at scale 0; only its ancestors move with `w`.
pub fn pi_good_for(
    params: &GoodnessParams,
    base_index: i64,
    trials: usize,
    seed: u64,
    cutoff: u32,
) -> Result<PiGoodEstimate> {
    use rayon::prelude::*;
    if trials == 0 {
        return Err(Error::InvalidParams("no trials".into()));
    }
    let base = GridCube { scale: 0, index: base_index };
    let name = format!("pi-good/{base_index}");
    let good = (0..trials)
        .into_par_iter()
        .map(|k| {
            let grid = trial_grid(seed, &name, k, cutoff)?;
            Ok(usize::from(!classify_good(&grid, base, params, cutoff)?.is_bad()))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    let p = good as f64 / trials as f64;
    let std_err = (p * (1.0 - p) / trials as f64).sqrt();
    Ok(PiGoodEstimate {
        base,
        trials,
        good,
        estimate: p,
        std_err,
        ci: ((p - 1.96 * std_err).max(0.0), (p + 1.96 * std_err).min(1.0)),
    })
}

/// `π_good` estimated for the base cubes `[0, 1)` and `[5, 6)`.
pub fn estimate_pi_good(params: &GoodnessParams, trials: usize, seed: u64, cutoff: u32) -> Result<PiGoodReport> {
    if trials < 100 {
        return Err(Error::InvalidParams(format!("{trials} trials, need at least 100")));
    }
    let primary = pi_good_for(params, 0, trials, seed, cutoff)?;
    let secondary = pi_good_for(params, 5, trials, seed, cutoff)?;
    let pooled_se = primary.std_err.hypot(secondary.std_err);
    let independent = (primary.estimate - secondary.estimate).abs() <= 3.0 * pooled_se;
    Ok(PiGoodReport { params: *params, cutoff, primary, secondary, pooled_se, independent })
}
