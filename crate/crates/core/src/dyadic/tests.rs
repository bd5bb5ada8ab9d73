use super::*;
use crate::measures::{build_cantor, CantorParams, MeasureHandle};
use crate::rng;
use crate::Error;
use proptest::prelude::*;
use rand::Rng;
use std::sync::Arc;

fn lebesgue() -> MeasureHandle {
    MeasureHandle::lebesgue(0.0, 1.0)
}

#[test]
fn grids_are_reproducible() {
    let a = make_grid(11, -20..=5).unwrap();
    let b = make_grid(11, -20..=5).unwrap();
    assert_eq!(a, b);
    let c = make_grid(12, -31..=32).unwrap();
    let d = make_grid(13, -31..=32).unwrap();
    assert_ne!(c.shifts(), d.shifts());
}

#[test]
fn zero_shifts_give_the_standard_grid() {
    let g = ShiftedGrid::from_shifts(-3, vec![0; 8]).unwrap();
    for scale in -3..=4 {
        for index in -5..5 {
            let (a, b) = g.interval(GridCube { scale, index });
            let side = 2f64.powi(-scale);
            assert_eq!(a, index as f64 * side);
            assert_eq!(b, (index + 1) as f64 * side);
        }
    }
}

#[test]
fn shifted_cubes_nest() {
    let g = make_grid(5, -6..=6).unwrap();
    for scale in -6..6 {
        for index in -4..4 {
            let q = GridCube { scale, index };
            let (a, b) = g.interval(q);
            let [l, r] = g.children(q).unwrap();
            assert_eq!(g.interval(l).0, a);
            assert_eq!(g.interval(l).1, g.interval(r).0);
            assert_eq!(g.interval(r).1, b);
            assert_eq!(g.ancestor(l, 1), Some(q));
            assert_eq!(g.ancestor(r, 1), Some(q));
        }
    }
}

#[test]
fn prefix_consistent_shifts() {
    let short = make_grid(3, -10..=0).unwrap();
    let long = make_grid(3, -15..=0).unwrap();
    for s in -10..=0 {
        assert_eq!(short.shift(s), long.shift(s));
    }
}

#[test]
fn goodness_parameters_at_defaults() {
    let p = GoodnessParams::new(0.4, 1.0).unwrap();
    assert!((p.gamma - 1.0 / 2.8).abs() < 1e-15);
    assert_eq!(p.r_min, 3);
    assert!(p.r > p.r_min && p.bad_bound < 1.0);
    // three levels up the widest edge distance is 7/16 of the ancestor,
    // below its threshold 2^{-3γ} ≈ 0.476, so every cube would be bad
    let g = ShiftedGrid::standard(-3..=0).unwrap();
    for index in 0..8 {
        let q = GridCube { scale: 0, index };
        let mut tight = p;
        tight.r = 3;
        assert!(classify_good(&g, q, &tight, 3).unwrap().is_bad());
    }
}

proptest! {
    #[test]
    fn goodness_parameters_invariants(m in 0.05f64..2.0, alpha in 0.2f64..5.0) {
        let p = GoodnessParams::new(m, alpha).unwrap();
        prop_assert!(p.gamma > 0.0 && p.gamma < 0.5);
        prop_assert!(2f64.powf(p.r as f64 * (1.0 - p.gamma)) >= 3.0);
        prop_assert!(p.r_min == 1 || 2f64.powf((p.r_min - 1) as f64 * (1.0 - p.gamma)) < 3.0);
        prop_assert!(p.r >= p.r_min && p.bad_bound < 1.0);
    }
}

#[test]
fn cube_at_ancestor_endpoint_is_bad() {
    let p = GoodnessParams::new(0.4, 1.0).unwrap();
    let g = ShiftedGrid::standard(-40..=0).unwrap();
    let q = GridCube { scale: 0, index: 0 };
    assert_eq!(classify_good(&g, q, &p, p.r).unwrap(), Goodness::Bad { levels_up: p.r });
}

#[test]
fn cutoff_below_r_is_rejected() {
    let p = GoodnessParams::new(0.4, 1.0).unwrap();
    let g = ShiftedGrid::standard(-12..=0).unwrap();
    let q = GridCube { scale: 0, index: 0 };
    assert!(matches!(classify_good(&g, q, &p, p.r - 1), Err(Error::CutoffBelowR { .. })));
}

/// Per-level check with float geometry built from the definition.
fn goodness_oracle(shifts: &[u8], i_min: i32, q: (i32, i64), p: &GoodnessParams, cutoff: u32) -> bool {
    let i_max = i_min + shifts.len() as i32 - 1;
    let offset = |i: i32| -> f64 {
        ((i + 1)..=i_max).map(|j| shifts[(j - i_min) as usize] as f64 * 2f64.powi(-j)).sum()
    };
    let side_q = 2f64.powi(-q.0);
    let a = q.1 as f64 * side_q + offset(q.0);
    let b = a + side_q;
    for s in p.r..=cutoff {
        let scale = q.0 - s as i32;
        let side = 2f64.powi(-scale);
        let off = offset(scale);
        let left = ((a - off) / side).floor() * side + off;
        let d = (a - left).min(left + side - b);
        if d <= side_q.powf(p.gamma) * side.powf(1.0 - p.gamma) {
            return false;
        }
    }
    true
}

#[test]
fn classification_matches_direct_inequalities() {
    let p = GoodnessParams::new(0.4, 1.0).unwrap();
    // alternating bits keep cubes away from ancestor edges
    let shifts: Vec<u8> = (0..15).map(|k| (k % 2) as u8).collect();
    let g = ShiftedGrid::from_shifts(-14, shifts.clone()).unwrap();
    let mut good = 0;
    for index in 0..64 {
        let q = GridCube { scale: 0, index };
        let got = classify_good(&g, q, &p, 12).unwrap();
        let want = goodness_oracle(&shifts, -14, (0, index), &p, 12);
        assert_eq!(!got.is_bad(), want, "cube {index}");
        if want {
            assert_eq!(got, Goodness::Good { cutoff: 12 });
            good += 1;
        }
    }
    assert!(good > 0, "no good cube found");
}

#[test]
fn running_out_of_scales_is_undetermined() {
    let p = GoodnessParams::new(0.4, 1.0).unwrap();
    let shifts: Vec<u8> = (0..11).map(|k| (k % 2) as u8).collect();
    let g = ShiftedGrid::from_shifts(-10, shifts).unwrap();
    let q = (0..64)
        .map(|index| GridCube { scale: 0, index })
        .find(|q| !classify_good(&g, *q, &p, 10).unwrap().is_bad())
        .expect("a cube good up to 10 levels");
    assert_eq!(classify_good(&g, q, &p, 13).unwrap(), Goodness::Undetermined { checked_to: 10 });
}

#[test]
fn fine_shifts_do_not_change_goodness() {
    let p = GoodnessParams::new(0.4, 1.0).unwrap();
    let mut violations = 0;
    for trial in 0..100u64 {
        let g = make_grid(rng::derive_seed(9, "fine-shift", trial), -12..=6).unwrap();
        let mut r = rng::stream(9, "fine-shift/perturb", trial);
        let mut h = g.clone();
        for scale in 1..=6 {
            h = h.with_shift(scale, r.random_range(0..2u8));
        }
        let q = GridCube { scale: 0, index: r.random_range(-50..50) };
        if classify_good(&g, q, &p, 12).unwrap() != classify_good(&h, q, &p, 12).unwrap() {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn pi_good_is_independent_of_the_base_cube() {
    let p = GoodnessParams::new(0.4, 1.0).unwrap();
    let rep = estimate_pi_good(&p, 2000, 17, 12).unwrap();
    assert!(rep.independent, "{rep:?}");
    assert!(rep.primary.estimate > 0.0);
    assert_eq!(rep, estimate_pi_good(&p, 2000, 17, 12).unwrap());
}

#[test]
fn pi_good_does_not_grow_with_the_cutoff() {
    let p = GoodnessParams::new(0.4, 1.0).unwrap();
    for cutoff in [9, 12, 15] {
        let a = pi_good_for(&p, 0, 500, 4, cutoff).unwrap();
        let b = pi_good_for(&p, 0, 500, 4, cutoff + 5).unwrap();
        assert!(b.good <= a.good, "cutoff {cutoff}: {} -> {}", a.good, b.good);
    }
}

#[test]
fn pi_good_needs_enough_trials() {
    let p = GoodnessParams::new(0.4, 1.0).unwrap();
    assert!(estimate_pi_good(&p, 99, 1, 10).is_err());
}

#[test]
fn whitney_regions_tile_the_strip() {
    let g = make_grid(21, -3..=8).unwrap();
    let mut r = rng::stream(21, "whitney", 0);
    for _ in 0..2000 {
        let x: f64 = r.random_range(-4.0..4.0);
        // t over (2^{-i_max-1}, 2^{-i_min}], log-uniform, plus exact edges
        let e: f64 = r.random_range(-9.0..3.0);
        let t = if r.random_bool(0.1) { 2f64.powf(e.ceil()) } else { 2f64.powf(e) };
        let mut hits = Vec::new();
        for scale in g.i_min..=g.i_max {
            let side = 2f64.powi(-scale);
            if !(t > side / 2.0 && t <= side) {
                continue;
            }
            let q = g.locate(x, scale).unwrap();
            for index in q.index - 1..=q.index + 1 {
                let c = GridCube { scale, index };
                let (a, b) = g.interval(c);
                if a <= x && x < b {
                    hits.push(c);
                }
            }
        }
        assert_eq!(hits.len(), 1, "x={x}, t={t}");
        assert_eq!(g.whitney_region(x, t), Some(hits[0]));
    }
}

#[test]
fn constant_system_never_stops() {
    let f = build_stopping(&lebesgue(), &AccretiveSystem::Constant, &RootCube::unit(), 0.5, 8).unwrap();
    assert_eq!(f.stopping_cubes(), 0);
    assert_eq!(f.layers.len(), 1);
    assert_eq!(carleson_packing(&f, SubCube::ROOT).unwrap().ratio, 1.0);
    assert_eq!(carleson_packing(&f, SubCube { level: 2, index: 1 }).unwrap().ratio, 0.0);
}

#[test]
fn balanced_sign_flip_fails_accretivity_at_the_root() {
    let half = AccretiveSystem::custom(|q, depth| {
        let n = 1usize << (depth - q.level);
        (0..n).map(|j| if j < n / 2 { 1.0 } else { -1.0 }).collect()
    });
    let err = build_stopping(&lebesgue(), &half, &RootCube::unit(), 0.25, 3).unwrap_err();
    assert!(matches!(err, Error::AccretivityViolated { average, .. } if average == 0.0));
}

#[test]
fn sign_pattern_stops_at_right_halves() {
    let depth = 3;
    let sys = AccretiveSystem::SignPattern;
    let c = default_threshold(&lebesgue(), &sys, &RootCube::unit(), depth).unwrap();
    assert_eq!(c, 0.25);
    let f = build_stopping(&lebesgue(), &sys, &RootCube::unit(), c, depth).unwrap();
    // on [0,1): left half averages 1, right half 0 -> the right half stops
    let cubes: Vec<SubCube> = f.cubes.iter().map(|s| s.cube).collect();
    assert_eq!(
        cubes,
        vec![
            SubCube::ROOT,
            SubCube { level: 1, index: 1 },
            SubCube { level: 2, index: 3 },
            SubCube { level: 3, index: 7 },
        ]
    );
    for s in &f.cubes[1..] {
        assert!(s.stopped_average.abs() < c);
        assert_eq!(s.parent, Some(s.layer - 1));
        let parent = f.cubes[s.parent.unwrap()].cube;
        assert!(parent.contains(s.cube));
    }
    for s in &f.cubes[..3] {
        assert_eq!(s.tau_hat, 0.5);
    }
    assert_eq!(f.tau_max, 0.5);
    assert!(f.tau_max < 1.0);
}

#[test]
fn packing_holds_for_every_cube() {
    let depth = 10;
    let sys = AccretiveSystem::SignPattern;
    let c = default_threshold(&lebesgue(), &sys, &RootCube::unit(), depth).unwrap();
    let f = build_stopping(&lebesgue(), &sys, &RootCube::unit(), c, depth).unwrap();
    // geometric oracle: 1 + 1/2 + ... + 2^{-depth}
    let top = carleson_packing(&f, SubCube::ROOT).unwrap();
    assert!((top.ratio - (2.0 - 2f64.powi(-(depth as i32)))).abs() < 1e-12);
    assert_eq!(top.bound, 3.0);
    for level in 0..=depth {
        for index in 0..1u64 << level {
            let p = carleson_packing(&f, SubCube { level, index }).unwrap();
            assert!(p.holds, "{p:?}");
        }
    }
}

#[test]
fn cantor_martingale_ignores_massless_leaves() {
    let mu = Arc::new(build_cantor(CantorParams::new(0.4, 16.0, 6)).unwrap());
    let handle = MeasureHandle::Cantor(mu);
    // the plain sign pattern averages to 0 on some Cantor cubes; lift it
    let sys = AccretiveSystem::custom(|q, depth| {
        sign_pattern(1 << (depth - q.level)).into_iter().map(|v| 0.75 + 0.5 * v).collect()
    });
    let depth = 8;
    let c = default_threshold(&handle, &sys, &RootCube::unit(), depth).unwrap();
    assert!(c > 0.0);
    let f = build_stopping(&handle, &sys, &RootCube::unit(), c, depth).unwrap();
    for s in &f.cubes {
        assert!(s.mass > 0.0);
    }
    let mut r = rng::stream(2, "cantor-martingale", 0);
    let v: Vec<f64> = (0..1 << depth).map(|_| r.random_range(-1.0..1.0)).collect();
    let coeffs = martingale_decompose(&f, &v).unwrap();
    assert!(coeffs.reconstruction_error(&v) <= 1e-10);
    assert!(coeffs.max_nontop_mean() <= 1e-12);
}

#[test]
fn martingale_differences_telescope() {
    let depth = 6;
    let sys = AccretiveSystem::SignPattern;
    let f = build_stopping(&lebesgue(), &sys, &RootCube::unit(), 0.25, depth).unwrap();
    let mut worst_energy: f64 = 0.0;
    for trial in 0..20 {
        let mut r = rng::stream(3, "martingale", trial);
        let v: Vec<f64> = (0..1 << depth).map(|_| r.random_range(-1.0..1.0)).collect();
        let coeffs = martingale_decompose(&f, &v).unwrap();
        assert_eq!(coeffs.deltas.len(), (1 << depth) - 1);
        assert!(coeffs.reconstruction_error(&v) <= 1e-10);
        assert!(coeffs.max_nontop_mean() <= 1e-12);
        worst_energy = worst_energy.max(coeffs.energy() / leaf_norm_sq(&v, &f.leaf_mass));
    }
    assert!(worst_energy <= crate::pinned::K_E, "energy ratio {worst_energy}");
}

#[test]
fn constant_system_has_no_differences_for_constant_input() {
    let depth = 5;
    let f = build_stopping(&lebesgue(), &AccretiveSystem::Constant, &RootCube::unit(), 0.5, depth).unwrap();
    let coeffs = martingale_decompose(&f, &vec![1.0; 1 << depth]).unwrap();
    for d in &coeffs.deltas[1..] {
        assert!(d.values.iter().all(|v| *v == 0.0));
    }
    assert!(coeffs.deltas[0].values.iter().all(|v| *v == 1.0));
}

#[test]
fn broken_forest_is_reported() {
    // b flips sign on every leaf pair, so every average above leaf level is 0
    let depth = 3;
    let mut f = build_stopping(&lebesgue(), &AccretiveSystem::Constant, &RootCube::unit(), 0.5, depth).unwrap();
    f.cubes[0].b = (0..8).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let err = martingale_decompose(&f, &[1.0; 8]).unwrap_err();
    assert!(matches!(err, Error::DivisionByNearZeroAverage { .. }));
}

#[test]
fn dumps_label_cubes_by_grid_position() {
    let g = ShiftedGrid::from_shifts(-2, vec![1, 0, 1]).unwrap();
    let root = RootCube::new(&g, GridCube { scale: -2, index: 0 }).unwrap();
    let f = build_stopping(&MeasureHandle::lebesgue(0.0, 5.0), &AccretiveSystem::SignPattern, &root, 0.25, 3).unwrap();
    // the first stopping cube is the right half of Q₀
    let id = &f.cubes[1].id;
    let (a, _) = g.interval(GridCube { scale: id.0, index: id.1 });
    assert_eq!(a, root.left + root.len / 2.0);
    let json: serde_json::Value = serde_json::from_str(&f.to_json().unwrap()).unwrap();
    assert_eq!(json["cubes"][1]["id"], serde_json::json!([-1, id.1, "-2:101"]));
    let coeffs = martingale_decompose(&f, &[1.0; 8]).unwrap();
    let json: serde_json::Value = serde_json::from_str(&coeffs.to_json().unwrap()).unwrap();
    assert_eq!(json["deltas"].as_array().unwrap().len(), 7);
}

