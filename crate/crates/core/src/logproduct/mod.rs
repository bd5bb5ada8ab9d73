//! The log-product function `f = ∏ fₙ`, `fₙ = e^{-aₙ}` on `Eₙ` and `1`
//! elsewhere, where each `Eₙ ⊂ [0, 1]` is a family of `kₙ` equally spaced
//! pieces. Everything is exact: membership and overlaps go through rational
//! arithmetic and [`exact::ScaledSum`], never through floating point.

pub mod exact;

use std::cmp::Ordering;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};
use exact::{frac_times_pow2, ln_bounds, rational_to_f64, ScaledSum};

/// Largest truncation allowed for the fast-growing [`Profile::Paper`] rates.
pub const PAPER_MAX_N: usize = 4;
/// Largest truncation allowed for the demo profile.
pub const DEMO_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// `aₙ = (n 2ⁿ)ⁿ`, spacing exponent from the certified `log₂ e` bound.
    Paper,
    /// `aₙ = 4ⁿ`, `kₙ = 4ⁿ`: small enough to enumerate every breakpoint.
    Demo,
}

impl std::str::FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "paper" => Ok(Profile::Paper),
            "demo" => Ok(Profile::Demo),
            other => Err(Error::Config(format!("unknown profile `{other}`"))),
        }
    }
}

pub type Rational = BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    BigRational::new(n.into(), d.into())
}

fn pow2_rat(e: u64) -> Rational {
    BigRational::from_integer(BigInt::one() << e)
}

/// `Eₙ`: `kₙ = 2^{log2_k}` pieces, piece `i` is `[i/k, i/k + |Eₙ|/k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacedSetFamily {
    pub n: usize,
    pub a_n: BigUint,
    /// `|Eₙ| = 2^{-n}/aₙ`.
    pub total_measure: Rational,
    pub log2_k: u64,
}

/// `ℓ(I)·k + offset` pieces, kept symbolic because `k` can be enormous.
#[derive(Debug, Clone, PartialEq)]
pub struct PieceCount {
    pub length: Rational,
    pub log2_k: u64,
    pub offset: Rational,
}

impl PieceCount {
    pub fn excess_over_length_times_k(&self) -> &Rational {
        &self.offset
    }

    /// Materialized count; only sensible for moderate `log2_k`.
    pub fn to_bigint(&self) -> BigInt {
        (&self.length * pow2_rat(self.log2_k) + &self.offset).to_integer()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Overlap {
    pub measure: ScaledSum,
    pub pieces_met: PieceCount,
}

impl SpacedSetFamily {
    pub fn k(&self) -> BigUint {
        BigUint::one() << self.log2_k
    }

    /// `|Eₙ|/kₙ`.
    pub fn piece_length(&self) -> ScaledSum {
        ScaledSum::term(self.total_measure.clone(), self.log2_k)
    }

    pub fn contains(&self, t: &Rational) -> bool {
        if t < &Rational::zero() || t >= &Rational::one() {
            return false;
        }
        frac_times_pow2(t, self.log2_k) <= self.total_measure
    }

    /// Exact `|E ∩ [a, b]|` for `0 <= a <= b <= 1`.
    pub fn overlap(&self, a: &Rational, b: &Rational) -> Overlap {
        let e = self.log2_k;
        let size = &self.total_measure;
        let fa = frac_times_pow2(a, e);
        let fb = frac_times_pow2(b, e);
        let min_a = if &fa < size { fa.clone() } else { size.clone() };
        let min_b = if &fb < size { fb.clone() } else { size.clone() };
        let len = b - a;
        // |E ∩ [0,x]| = (⌊xk⌋|E| + min(frac(xk), |E|))/k
        let correction = (&fa - &fb) * size + min_b - min_a;
        let measure = ScaledSum::rational(&len * size).add(&ScaledSum::term(correction, e));
        let mut offset = &fa - &fb + Rational::one();
        if &fa > size {
            offset -= Rational::one();
        }
        if b == &Rational::one() {
            offset -= Rational::one();
        }
        // a closed interval inside one gap meets no piece
        let count_negative = {
            let c = PieceCount { length: len.clone(), log2_k: e, offset: offset.clone() };
            c.length.is_zero() && c.offset < Rational::zero()
        };
        if count_negative {
            offset = Rational::zero();
        }
        Overlap { measure, pieces_met: PieceCount { length: len, log2_k: e, offset } }
    }

    /// Pieces as exact rational intervals (only for small `k`).
    fn pieces_in(&self, a: &Rational, b: &Rational) -> Vec<(Rational, Rational)> {
        let k = pow2_rat(self.log2_k);
        let plen = &self.total_measure / &k;
        let first = ((a * &k).floor() - Rational::one()).max(Rational::zero()).to_integer();
        let last = (b * &k).ceil().to_integer();
        let kmax = k.to_integer() - BigInt::one();
        let mut out = Vec::new();
        let mut i = first;
        while i <= last && i <= kmax {
            let lo = BigRational::from_integer(i.clone()) / &k;
            let hi = &lo + &plen;
            if &hi >= a && &lo <= b {
                out.push((lo, hi));
            }
            i += 1;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogProductFn {
    pub profile: Profile,
    pub factors: Vec<SpacedSetFamily>,
}

/// Certified upper bound for `log₂ e` (true value 1.44269504088896340735...).
fn log2e_upper() -> Rational {
    BigRational::new(1_442_695_040_888_963_408i64.into(), 1_000_000_000_000_000_000i64.into())
}

pub fn build_logproduct(profile: Profile, n_max: usize) -> Result<LogProductFn> {
    if n_max == 0 {
        return Err(Error::InvalidParams("truncation N must be at least 1".into()));
    }
    let cap = match profile {
        Profile::Paper => PAPER_MAX_N,
        Profile::Demo => DEMO_MAX_N,
    };
    if n_max > cap {
        return Err(Error::Overflow(format!("{profile:?} profile supports N <= {cap}, got {n_max}")));
    }
    let mut factors = Vec::with_capacity(n_max);
    let mut running = BigUint::zero();
    for n in 1..=n_max {
        let (a_n, log2_k) = match profile {
            Profile::Paper => {
                let base = BigUint::from(n) << n;
                let a_n = base.pow(n as u32);
                running += &a_n;
                // k = 2^{⌈1 + Σa·log₂e⌉} guarantees 2/k <= exp(-Σa)
                let bound = Rational::one()
                    + BigRational::from_integer(BigInt::from(running.clone())) * log2e_upper();
                let e = bound.ceil().to_integer().to_u64().ok_or_else(|| Error::Overflow("spacing exponent".into()))?;
                (a_n, e)
            }
            Profile::Demo => (BigUint::one() << (2 * n), 2 * n as u64),
        };
        let total_measure = BigRational::new(BigInt::one(), BigInt::from(a_n.clone()) << n);
        factors.push(SpacedSetFamily { n, a_n, total_measure, log2_k });
    }
    Ok(LogProductFn { profile, factors })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FValue {
    /// `A = Σ aₙ·1_{Eₙ}(t)`.
    pub exponent: BigUint,
    /// `e^{-A}` (underflows to 0 for large `A`).
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceWitness {
    /// `|Eₙ|·aₙ^{1+1/n} = 2^{-n}·aₙ^{1/n}` (exact when `aₙ` is a perfect power).
    pub value: Rational,
    pub exact: bool,
    /// `value >= n`, decided exactly.
    pub satisfied: bool,
}

impl LogProductFn {
    pub fn n_max(&self) -> usize {
        self.factors.len()
    }

    pub fn eval(&self, t: &Rational) -> Result<FValue> {
        if t < &Rational::zero() || t > &Rational::one() {
            return Err(Error::OutOfDomain(t.to_string()));
        }
        let exponent: BigUint = self
            .factors
            .iter()
            .filter(|e| e.contains(t))
            .map(|e| e.a_n.clone())
            .sum();
        let value = (-exponent.to_f64().unwrap_or(f64::INFINITY)).exp();
        Ok(FValue { exponent, value })
    }

    /// Evaluation at a double, read as the exact dyadic rational it encodes.
    pub fn eval_f64(&self, x: f64) -> Result<FValue> {
        let t = BigRational::from_float(x).ok_or_else(|| Error::OutOfDomain(x.to_string()))?;
        self.eval(&t)
    }

    pub fn overlap(&self, n: usize, a: &Rational, b: &Rational) -> Result<Overlap> {
        check_interval(a, b)?;
        Ok(self.family(n)?.overlap(a, b))
    }

    pub fn family(&self, n: usize) -> Result<&SpacedSetFamily> {
        self.factors
            .get(n.wrapping_sub(1))
            .ok_or(Error::OutOfRange { requested: n, max: self.n_max() })
    }

    /// `Σ_{n<=N} |Eₙ|aₙ`, exactly `1 - 2^{-N}`.
    pub fn budget(&self) -> Rational {
        self.factors
            .iter()
            .map(|e| &e.total_measure * BigRational::from_integer(BigInt::from(e.a_n.clone())))
            .sum()
    }

    /// The bracket index `N_I`: largest `N` with `Σ_{n<=N} aₙ <= ln(1/ℓ(I))`.
    pub fn bracket_index(&self, length: &Rational) -> Result<usize> {
        if length <= &Rational::zero() {
            return Err(Error::DegenerateInterval(format!("length {length}")));
        }
        let (lo, hi) = ln_bounds(&(Rational::one() / length));
        let mut partial = 0f64;
        let mut index = 0;
        for e in &self.factors {
            partial += e.a_n.to_f64().unwrap();
            if partial <= lo {
                index = e.n;
            } else if partial > hi {
                break;
            } else {
                return Err(Error::Overflow(format!(
                    "bracket comparison for length {length} not certifiable at double precision"
                )));
            }
        }
        Ok(index)
    }

    /// `U(I) = Σ_{n > N_I} aₙ |Eₙ ∩ I|`, an exact upper bound for
    /// `∫_I ln⁺(ℓ(I)/f)`.
    pub fn carleson_log_bound(&self, a: &Rational, b: &Rational) -> Result<ScaledSum> {
        check_interval(a, b)?;
        let len = b - a;
        if len.is_zero() {
            return Err(Error::DegenerateInterval(format!("[{a}, {b}]")));
        }
        let start = self.bracket_index(&len)?;
        Ok(self.factors[start..].iter().fold(ScaledSum::zero(), |acc, e| {
            let w = BigRational::from_integer(BigInt::from(e.a_n.clone()));
            acc.add(&e.overlap(a, b).measure.scale(&w))
        }))
    }

    pub fn lp_divergence_witness(&self, n: usize) -> Result<DivergenceWitness> {
        if self.profile != Profile::Paper {
            return Err(Error::WrongProfile { expected: "paper" });
        }
        let e = self.family(n)?;
        let root = e.a_n.nth_root(n as u32);
        let exact = root.pow(n as u32) == e.a_n;
        let value = BigRational::new(BigInt::from(root), BigInt::one() << n);
        // value >= n  <=>  aₙ >= (n 2ⁿ)ⁿ
        let satisfied = e.a_n >= (BigUint::from(n) << n).pow(n as u32);
        Ok(DivergenceWitness { value, exact, satisfied })
    }

    fn require_demo(&self) -> Result<()> {
        if self.profile != Profile::Demo {
            return Err(Error::WrongProfile { expected: "demo" });
        }
        Ok(())
    }

    /// Elementary intervals of `[a, b]` on which `f` is constant, with the
    /// exponent `A` on each.
    pub fn elementary_pieces(&self, a: &Rational, b: &Rational) -> Result<Vec<(Rational, Rational, BigUint)>> {
        self.require_demo()?;
        check_interval(a, b)?;
        let mut cuts = vec![a.clone(), b.clone()];
        for e in &self.factors {
            for (lo, hi) in e.pieces_in(a, b) {
                for p in [lo, hi] {
                    if &p > a && &p < b {
                        cuts.push(p);
                    }
                }
            }
        }
        cuts.sort();
        cuts.dedup();
        let two = rat(2, 1);
        Ok(cuts
            .windows(2)
            .map(|w| {
                let mid = (&w[0] + &w[1]) / &two;
                let exponent = self.eval(&mid).map(|v| v.exponent).unwrap_or_default();
                (w[0].clone(), w[1].clone(), exponent)
            })
            .collect())
    }

    /// Breakpoints of `f` inside `[a, b]` as doubles (demo profile).
    pub fn breakpoints_f64(&self, a: f64, b: f64) -> Vec<f64> {
        let (Some(ra), Some(rb)) = (BigRational::from_float(a.max(0.0)), BigRational::from_float(b.min(1.0))) else {
            return Vec::new();
        };
        if ra > rb || self.profile != Profile::Demo {
            return Vec::new();
        }
        self.factors
            .iter()
            .flat_map(|e| e.pieces_in(&ra, &rb))
            .flat_map(|(lo, hi)| [rational_to_f64(&lo), rational_to_f64(&hi)])
            .filter(|&p| p > a && p < b)
            .collect()
    }

    /// `∫_I ln⁺(ℓ(I)/f)` by exact breakpoint summation (demo profile).
    pub fn demo_carleson_quadrature(&self, a: &Rational, b: &Rational) -> Result<f64> {
        let ln_len = rational_to_f64(&(b - a)).ln();
        Ok(self
            .elementary_pieces(a, b)?
            .into_iter()
            .map(|(lo, hi, exp)| {
                let v = ln_len + exp.to_f64().unwrap();
                if v > 0.0 { rational_to_f64(&(hi - lo)) * v } else { 0.0 }
            })
            .sum())
    }

    /// `∫₀¹ (ln 1/f)^p`, exact (demo profile).
    pub fn log_moment(&self, p: u32) -> Result<Rational> {
        Ok(self
            .elementary_pieces(&Rational::zero(), &Rational::one())?
            .into_iter()
            .map(|(lo, hi, exp)| (hi - lo) * BigRational::from_integer(BigInt::from(exp.pow(p))))
            .sum())
    }
}

fn check_interval(a: &Rational, b: &Rational) -> Result<()> {
    if a > b {
        return Err(Error::DegenerateInterval(format!("reversed [{a}, {b}]")));
    }
    if a < &Rational::zero() || b > &Rational::one() {
        return Err(Error::OutOfDomain(format!("[{a}, {b}] not inside [0, 1]")));
    }
    Ok(())
}

/// `|E ∩ I| <= 2|E|ℓ(I)`, decided exactly.
pub fn overlap_within_double_density(e: &SpacedSetFamily, a: &Rational, b: &Rational) -> bool {
    let ov = e.overlap(a, b).measure;
    let bound = ScaledSum::rational(rat(2, 1) * &e.total_measure * (b - a));
    ov.cmp_sum(&bound) != Ordering::Greater
}
