use serde::{Deserialize, Serialize};

use super::stopping::{CubeId, StoppingForest, SubCube};
use crate::{Error, Result};

/// `Δ_Q f` on the leaves of `Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeDelta {
    pub cube: SubCube,
    pub id: CubeId,
    pub values: Vec<f64>,
}

/// Differences `Δ_Q f` for every cube above leaf level, `Q₀` first. The entry
/// of `Q₀` holds `E_{Q₀} f + Δ_{Q₀} f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleCoeffs {
    pub depth: u32,
    pub leaf_mass: Vec<f64>,
    pub deltas: Vec<CubeDelta>,
}

/// `E_Q f = ⟨f⟩_Q/⟨b_{Qᵃ}⟩_Q · b_{Qᵃ}` on every cube of one level, as one
/// vector over all leaves. Cubes without mass get zero.
fn expectation_level(forest: &StoppingForest, f: &[f64], level: u32) -> Result<Vec<f64>> {
    let depth = forest.depth;
    let mut out = vec![0.0; f.len()];
    let threshold = forest.c * (1.0 - 1e-9);
    for index in 0..1u64 << level {
        let q = SubCube { level, index };
        let range = q.leaf_range(depth);
        let masses = &forest.leaf_mass[range.clone()];
        let mass: f64 = masses.iter().sum();
        if mass <= 0.0 {
            continue;
        }
        let a = forest.stopping_parent(q);
        let sa = &forest.cubes[a];
        let offset = range.start - sa.cube.leaf_range(depth).start;
        let b = &sa.b[offset..offset + range.len()];
        let f_avg = f[range.clone()].iter().zip(masses).map(|(v, w)| v * w).sum::<f64>() / mass;
        let b_avg = b.iter().zip(masses).map(|(v, w)| v * w).sum::<f64>() / mass;
        if b_avg.abs() < threshold {
            return Err(Error::DivisionByNearZeroAverage { average: b_avg, cube: forest.id(q).to_string() });
        }
        let ratio = f_avg / b_avg;
        for (o, bv) in out[range].iter_mut().zip(b) {
            *o = ratio * bv;
        }
    }
    Ok(out)
}

/// `Δ_Q f = Σ_{Q' ∈ ch(Q)} [E_{Q'} f - E_Q f] 1_{Q'}` for all `Q` down to
/// the leaf level of the forest; `f` is given on those leaves.
pub fn martingale_decompose(forest: &StoppingForest, f: &[f64]) -> Result<MartingaleCoeffs> {
    let depth = forest.depth;
    if f.len() != 1usize << depth {
        return Err(Error::InvalidParams(format!("{} leaf values for depth {depth}", f.len())));
    }
    let mut deltas = Vec::with_capacity((1usize << depth).saturating_sub(1));
    let mut coarse = expectation_level(forest, f, 0)?;
    if depth == 0 {
        deltas.push(CubeDelta { cube: SubCube::ROOT, id: forest.id(SubCube::ROOT), values: coarse });
        return Ok(MartingaleCoeffs { depth, leaf_mass: forest.leaf_mass.clone(), deltas });
    }
    for level in 0..depth {
        let fine = expectation_level(forest, f, level + 1)?;
        for index in 0..1u64 << level {
            let q = SubCube { level, index };
            let range = q.leaf_range(depth);
            let values = if level == 0 {
                // E_{Q₀} + Δ_{Q₀}
                fine[range].to_vec()
            } else {
                fine[range.clone()].iter().zip(&coarse[range]).map(|(a, b)| a - b).collect()
            };
            deltas.push(CubeDelta { cube: q, id: forest.id(q), values });
        }
        coarse = fine;
    }
    Ok(MartingaleCoeffs { depth, leaf_mass: forest.leaf_mass.clone(), deltas })
}

impl MartingaleCoeffs {
    /// `Σ_Q Δ_Q f` on the leaves.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.leaf_mass.len()];
        for d in &self.deltas {
            let r = d.cube.leaf_range(self.depth);
            for (o, v) in out[r].iter_mut().zip(&d.values) {
                *o += v;
            }
        }
        out
    }

    /// `max |Σ Δ_Q f - f|` over leaves of positive mass.
    pub fn reconstruction_error(&self, f: &[f64]) -> f64 {
        self.reconstruct()
            .iter()
            .zip(f)
            .zip(&self.leaf_mass)
            .filter(|(_, w)| **w > 0.0)
            .map(|((a, b), _)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `max |∫ Δ_Q f dμ|` over `Q ≠ Q₀`.
    pub fn max_nontop_mean(&self) -> f64 {
        self.deltas
            .iter()
            .filter(|d| d.cube.level > 0)
            .map(|d| {
                let base = d.cube.leaf_range(self.depth).start;
                d.values.iter().enumerate().map(|(j, v)| v * self.leaf_mass[base + j]).sum::<f64>().abs()
            })
            .fold(0.0, f64::max)
    }

    /// `Σ_Q ‖Δ_Q f‖²_{L²(μ)}`, the top entry included.
    pub fn energy(&self) -> f64 {
        self.deltas
            .iter()
            .map(|d| {
                let base = d.cube.leaf_range(self.depth).start;
                d.values.iter().enumerate().map(|(j, v)| v * v * self.leaf_mass[base + j]).sum::<f64>()
            })
            .sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `‖f‖²_{L²(μ)}` for leaf values.
pub fn leaf_norm_sq(f: &[f64], leaf_mass: &[f64]) -> f64 {
    f.iter().zip(leaf_mass).map(|(v, w)| v * v * w).sum()
}
