//! Exact arithmetic for equally spaced dyadic families with astronomically
//! large spacing exponents.
//!
//! Quantities such as `|E ∩ I|` have the shape `c₀ + c₁·2^{-e}` with small
//! rationals `cᵢ` and an exponent `e` that may run into the tens of millions.
//! [`ScaledSum`] keeps such sums symbolic and decides signs exactly.

use std::cmp::Ordering;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact value `Σ cⱼ·2^{-eⱼ}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScaledSum {
    terms: Vec<(BigRational, u64)>,
}

fn pow2(e: u64) -> BigInt {
    BigInt::one() << e
}

/// Floor-ish log2 bounds of a nonzero rational: `lo <= log2|q| < hi`.
fn log2_bounds(q: &BigRational) -> (i64, i64) {
    let nb = q.numer().bits() as i64;
    let db = q.denom().bits() as i64;
    // 2^{nb-1} <= |num| < 2^{nb}, same for the denominator
    (nb - 1 - db, nb - db + 1)
}

impl ScaledSum {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn rational(c: BigRational) -> Self {
        Self::term(c, 0)
    }

    pub fn term(c: BigRational, exp: u64) -> Self {
        let mut s = Self::zero();
        s.push(c, exp);
        s
    }

    fn push(&mut self, c: BigRational, exp: u64) {
        if c.is_zero() {
            return;
        }
        match self.terms.iter_mut().find(|(_, e)| *e == exp) {
            Some(slot) => slot.0 += c,
            None => self.terms.push((c, exp)),
        }
        self.terms.retain(|(c, _)| !c.is_zero());
    }

    pub fn terms(&self) -> &[(BigRational, u64)] {
        &self.terms
    }

    pub fn add(&self, other: &ScaledSum) -> ScaledSum {
        let mut out = self.clone();
        for (c, e) in &other.terms {
            out.push(c.clone(), *e);
        }
        out
    }

    pub fn neg(&self) -> ScaledSum {
        ScaledSum { terms: self.terms.iter().map(|(c, e)| (-c.clone(), *e)).collect() }
    }

    pub fn sub(&self, other: &ScaledSum) -> ScaledSum {
        self.add(&other.neg())
    }

    pub fn scale(&self, k: &BigRational) -> ScaledSum {
        let mut out = ScaledSum::zero();
        for (c, e) in &self.terms {
            out.push(c * k, *e);
        }
        out
    }

    /// Exact sign.
    pub fn signum(&self) -> Ordering {
        let mut terms = self.terms.clone();
        terms.sort_by_key(|t| t.1);
        loop {
            terms.retain(|(c, _)| !c.is_zero());
            let Some((head, e0)) = terms.first().cloned() else {
                return Ordering::Equal;
            };
            let head_sign = if head.is_positive() { Ordering::Greater } else { Ordering::Less };
            if terms.len() == 1 {
                return head_sign;
            }
            // upper bound on log2 of the tail relative to 2^{-e0}
            let count = (terms.len() - 1) as i64;
            let tail_hi = terms[1..]
                .iter()
                .map(|(c, e)| log2_bounds(c).1 - (*e - e0).min(i64::MAX as u64 / 2) as i64)
                .max()
                .unwrap()
                + 64 - (count.leading_zeros() as i64);
            let head_lo = log2_bounds(&head).0;
            if head_lo > tail_hi + 1 {
                return head_sign;
            }
            // undecided: fold the next term into the head exactly
            let (c1, e1) = terms.remove(1);
            let shifted = c1 / BigRational::from_integer(pow2(e1 - e0));
            terms[0].0 = head + shifted;
        }
    }

    pub fn cmp_sum(&self, other: &ScaledSum) -> Ordering {
        self.sub(other).signum()
    }

    pub fn is_zero(&self) -> bool {
        self.signum() == Ordering::Equal
    }

    /// Nearest double (terms below the double range vanish).
    pub fn to_f64(&self) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| {
                if *e > 2000 {
                    0.0
                } else {
                    rational_to_f64(c) * 2f64.powi(-(*e as i32))
                }
            })
            .sum()
    }
}

pub fn rational_to_f64(q: &BigRational) -> f64 {
    let (n, d) = (q.numer(), q.denom());
    let (nb, db) = (n.bits() as i64, d.bits() as i64);
    // shift both into the f64 range before dividing
    let shift_n = (nb - 1000).max(0) as usize;
    let shift_d = (db - 1000).max(0) as usize;
    let nf = (n >> shift_n).to_f64().unwrap_or(0.0);
    let df = (d >> shift_d).to_f64().unwrap_or(f64::INFINITY);
    nf / df * 2f64.powi((shift_n as i64 - shift_d as i64).clamp(-2000, 2000) as i32)
}

/// Fractional part of `x·2^e` for a non-negative rational `x`, computed with
/// modular exponentiation so `2^e` is never materialized.
pub fn frac_times_pow2(x: &BigRational, e: u64) -> BigRational {
    let p = x.numer();
    let q = x.denom();
    let s = q.trailing_zeros().unwrap_or(0);
    let q_odd: BigInt = q >> s;
    if e >= s {
        // x·2^e = p·2^{e-s}/q_odd
        let q_odd_u = q_odd.to_biguint().unwrap();
        let two = BigUint::from(2u8);
        let pw = two.modpow(&BigUint::from(e - s), &q_odd_u);
        let p_mod = p.mod_floor(&q_odd).to_biguint().unwrap();
        let r = (p_mod * pw) % &q_odd_u;
        BigRational::new(BigInt::from_biguint(Sign::Plus, r), q_odd)
    } else {
        let q2: BigInt = &q_odd << (s - e);
        BigRational::new(p.mod_floor(&q2), q2)
    }
}

/// Certified bracket `[lo, hi]` for `ln(x)`, `x` a positive rational.
pub fn ln_bounds(x: &BigRational) -> (f64, f64) {
    fn ln_int(v: &BigInt) -> (f64, f64) {
        let bits = v.bits();
        let sh = bits.saturating_sub(64);
        let top = (v >> sh).to_f64().unwrap();
        // ln 2 bracketed by adjacent doubles
        const LN2_LO: f64 = 0.693_147_180_559_945_2;
        const LN2_HI: f64 = 0.693_147_180_559_945_4;
        let base = top.ln();
        let slack = 1e-14 * (1.0 + base.abs());
        // truncation of the low bits loses at most a factor (1 + 2^{-63})
        let trunc = if sh > 0 { 2f64.powi(-62) } else { 0.0 };
        (base - slack + sh as f64 * LN2_LO, base + slack + trunc + sh as f64 * LN2_HI)
    }
    let (nl, nh) = ln_int(x.numer());
    let (dl, dh) = ln_int(x.denom());
    let lo = nl - dh;
    let hi = nh - dl;
    let pad = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    (lo - pad, hi + pad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn frac_matches_direct_computation() {
        for (n, d) in [(1, 3), (5, 7), (3, 8), (7, 12), (0, 1), (1, 1)] {
            for e in 0..20u64 {
                let x = q(n, d);
                let direct = {
                    let y = &x * BigRational::from_integer(pow2(e));
                    &y - y.floor()
                };
                assert_eq!(frac_times_pow2(&x, e), direct, "{n}/{d} e={e}");
            }
        }
    }

    #[test]
    fn sign_with_huge_gap() {
        let tiny = ScaledSum::term(q(1, 1), 10_000_000);
        assert_eq!(tiny.signum(), Ordering::Greater);
        let s = ScaledSum::rational(q(1, 3)).sub(&ScaledSum::rational(q(1, 3))).add(&tiny.neg());
        assert_eq!(s.signum(), Ordering::Less);
        let t = ScaledSum::rational(q(1, 1000)).sub(&ScaledSum::term(q(5, 1), 20_000_000));
        assert_eq!(t.signum(), Ordering::Greater);
    }

    #[test]
    fn sign_needs_folding() {
        // 1/4 - 2^{-2} + 2^{-70} > 0 where the first two cancel only after folding
        let s = ScaledSum::rational(q(1, 4))
            .add(&ScaledSum::term(q(-1, 1), 2))
            .add(&ScaledSum::term(q(1, 1), 70));
        assert_eq!(s.signum(), Ordering::Greater);
        let t = ScaledSum::rational(q(1, 4)).add(&ScaledSum::term(q(-1, 1), 2));
        assert_eq!(t.signum(), Ordering::Equal);
    }

    #[test]
    fn ln_bracket_contains_truth() {
        for (n, d) in [(1, 2), (10, 1), (1, 1 << 40), (7, 3)] {
            let (lo, hi) = ln_bounds(&q(n, d));
            let truth = (n as f64 / d as f64).ln();
            assert!(lo <= truth && truth <= hi);
        }
        let big = BigRational::new(BigInt::one(), pow2(100_000));
        let (lo, hi) = ln_bounds(&big);
        let truth = -100_000.0 * std::f64::consts::LN_2;
        assert!(lo <= truth && truth <= hi && hi - lo < 1e-6);
    }
}
