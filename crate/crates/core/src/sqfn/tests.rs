use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::kernels::{cantor_kernel, eval_theta, logproduct_kernel, tilde_transform};
use crate::logproduct::{build_logproduct, Profile};
use crate::measures::{build_cantor, CantorParams};

fn setup(depth: usize) -> (Arc<CantorMeasure>, MeasureHandle, KernelSpec) {
    let mu = Arc::new(build_cantor(CantorParams::new(0.4, 16.0, depth)).unwrap());
    let handle = MeasureHandle::Cantor(mu.clone());
    let k = cantor_kernel(mu.clone());
    (mu, handle, k)
}

fn cone(alpha: f64) -> ConeSpec {
    ConeSpec::new(alpha, 0.4).unwrap()
}

#[test]
fn zero_input_gives_zero() {
    let (_, h, k) = setup(3);
    let q = QuadratureConfig::default();
    let z = InputFn::Constant(0.0);
    assert_eq!(conical_value(&k, &h, &z, 0.3, &cone(1.0), &q).unwrap(), 0.0);
    assert_eq!(vertical_value(&k, &h, &z, 0.3, &q).unwrap(), 0.0);
    assert!(ConeSpec::new(0.5, 0.4).is_err());
}

#[test]
fn conical_value_in_central_gap_matches_grid_sum() {
    let (mu, h, k) = setup(3);
    let q = QuadratureConfig::default();
    // in the central gap of the root, within reach of its first middle child
    let x = mu.children(&mu.root())[1].right() + 0.3 * mu.level_geometry(0).outer_length;
    let one = InputFn::Constant(1.0);
    let value = conical_value(&k, &h, &one, x, &cone(1.0), &q).unwrap();
    assert!(value > 0.0);

    // brute force: every band, midpoint rule in t, uniform points in each leaf,
    // θ from the generic kernel quadrature
    let m = 0.4;
    let mut brute = 0.0;
    for level in 0..3 {
        let l_rel = mu.level_geometry(level).outer_length;
        for node in mu.nodes_at(level) {
            let l = l_rel * node.len;
            let kids = mu.children(&node);
            let theta = eval_theta(&k, &h, &one, l, kids[1].mid(), &q).unwrap();
            let steps = 200;
            let dt = 0.5 * l / steps as f64;
            for i in 0..steps {
                let t = 0.5 * l + (i as f64 + 0.5) * dt;
                let mut mass = 0.0;
                for kid in &kids[1..3] {
                    let mut leaves = vec![*kid];
                    while !mu.is_leaf(&leaves[0]) {
                        leaves = leaves.iter().flat_map(|n| mu.children(n)).collect();
                    }
                    for leaf in leaves {
                        let pts = 64;
                        for j in 0..pts {
                            let y = leaf.left + (j as f64 + 0.5) / pts as f64 * leaf.len;
                            if (y - x).abs() < t {
                                mass += leaf.mass / pts as f64;
                            }
                        }
                    }
                }
                brute += theta * theta * mass * t.powf(-m - 1.0) * dt;
            }
        }
    }
    let rel = (value * value - brute).abs() / brute;
    assert!(rel < 0.02, "{} vs {brute}", value * value);
}

#[test]
fn refining_t_quadrature_is_stable() {
    let (_, h, k) = setup(4);
    let q = QuadratureConfig::default();
    let q2 = QuadratureConfig { t_steps_per_band: 2 * q.t_steps_per_band, ..q };
    for x in [0.05, 0.27, 0.5, 0.93] {
        let a = conical_value(&k, &h, &InputFn::Constant(1.0), x, &cone(1.0), &q).unwrap();
        let b = conical_value(&k, &h, &InputFn::Constant(1.0), x, &cone(1.0), &q2).unwrap();
        assert!((a - b).abs() <= q.rel_tol * b.max(1e-300), "x={x}: {a} vs {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn aperture_monotone(x in 0.0f64..1.0, a1 in 1.0f64..3.0, da in 0.0f64..1.0, vals in prop::collection::vec(0.0f64..2.0, 16)) {
        let (mu, h, k) = setup(3);
        let q = QuadratureConfig { t_steps_per_band: 6, ..Default::default() };
        let f = InputFn::CantorLeaves { measure: &mu, level: 2, values: &vals };
        let s1 = conical_value(&k, &h, &f, x, &cone(a1), &q).unwrap();
        let s2 = conical_value(&k, &h, &f, x, &cone(a1 + da), &q).unwrap();
        prop_assert!(s1 <= s2 * (1.0 + 1e-12) + 1e-300);
    }
}

#[test]
fn logproduct_vertical_values() {
    let f = Arc::new(build_logproduct(Profile::Demo, 2).unwrap());
    let k = logproduct_kernel(f.clone());
    let leb = MeasureHandle::lebesgue(-3.0, 4.0);
    let ind = InputFn::Indicator { a: 0.0, b: 1.0, value: 1.0 };
    let q = QuadratureConfig::default();
    // x = 3/4 + 1/2048 lies in E1 and E2: f = e^{-20}
    let x = 0.75 + 1.0 / 2048.0;
    let a = f.eval_f64(x).unwrap().exponent;
    assert_eq!(a, 20u32.into());
    let v = vertical_value(&k, &leb, &ind, x, &q).unwrap();
    assert!(v * v >= 20.0 * (1.0 - 1e-12), "{}", v * v);
    // independent log-t midpoint sum of the closed-form θ
    let (lo, steps) = ((-20f64).exp(), 200_000);
    let ds = -lo.ln() / steps as f64;
    let brute: f64 = (0..steps)
        .map(|i| {
            let t = (lo.ln() + (i as f64 + 0.5) * ds).exp();
            let th = crate::kernels::v_bump_primitive(x / t) - crate::kernels::v_bump_primitive((x - 1.0) / t);
            th * th * ds
        })
        .sum();
    assert!((v * v - brute).abs() < 1e-6 * brute, "{} vs {brute}", v * v);
    assert_eq!(vertical_value(&k, &leb, &ind, -0.2, &q).unwrap(), 0.0);
    assert_eq!(vertical_value(&k, &leb, &ind, 1.2, &q).unwrap(), 0.0);
}

#[test]
fn collapse_agrees_with_enumeration() {
    let params = CantorParams::new(0.4, 16.0, 12);
    let q = QuadratureConfig::default();
    let checks = validate_collapse(&params, &[1.0, 1.5, 2.0], 2, 0.01, &q).unwrap();
    assert_eq!(checks.len(), 9);
    for c in checks {
        assert!(c.rel_diff < 0.01, "{c:?}");
    }
}

#[test]
#[allow(clippy::reversed_empty_ranges)]
fn series_shapes_and_errors() {
    let (mu, _, _) = setup(12);
    let q = QuadratureConfig::default();
    let empty = conical_norm_series(&mu, &cone(1.0), 1..=0, &q).unwrap();
    assert!(empty.is_empty());
    assert_eq!(empty.total(), 0.0);
    assert!(vertical_norm_series(&mu, 1..=0, &q).unwrap().is_empty());
    assert!(matches!(conical_norm_series(&mu, &cone(3.0), 0..=2, &q), Err(Error::InvalidParams(_))));

    let s = conical_norm_series(&mu, &cone(1.0), 0..=6, &q).unwrap();
    assert_eq!(s.len(), 7);
    assert!(s.terms.iter().all(|t| *t >= 0.0));
    assert!(s.partial_sums.windows(2).all(|w| w[1] >= w[0]));
    assert!((s.partial_sum(3) - s.partial_sums[3]).abs() < 1e-15);
    let k = aperture_one_constant(&mu.params, 0..=6, &q).unwrap();
    for (n, t) in s.generations.iter().zip(&s.terms) {
        assert!(*t <= k / ((n + 1) * (n + 1)) as f64, "n={n}");
    }
    let s2 = conical_norm_series(&mu, &cone(2.0), 0..=6, &q).unwrap();
    for (a, b) in s.terms.iter().zip(&s2.terms) {
        assert!(b >= a);
    }
}

#[test]
fn vertical_series_matches_closed_form_and_enumeration() {
    let (mu, _, _) = setup(12);
    let q = QuadratureConfig::default();
    let v = vertical_norm_series(&mu, 0..=8, &q).unwrap();
    for (i, n) in v.generations.iter().enumerate() {
        let rho = bump_ratio(&mu.params, *n, &q).unwrap();
        let closed = 2.0 * std::f64::consts::LN_2 * rho * rho / (16.0 * (*n as f64 + 1.0));
        assert!((v.terms[i] - closed).abs() < 1e-12 * closed);
    }
    for n in 0..=2 {
        let direct = direct_vertical_term(&mu.params, n).unwrap();
        assert!((v.terms[n] - direct).abs() < 0.01 * direct, "n={n}: {} vs {direct}", v.terms[n]);
    }
    let s2 = conical_norm_series(&mu, &cone(2.0), 0..=8, &q).unwrap();
    let k_alpha = vertical_domination_constant(2.0, 0.4);
    for (a, b) in s2.terms.iter().zip(&v.terms) {
        assert!(*a <= k_alpha * b);
    }
}

#[test]
fn l2_ratio_of_constant_is_the_aperture_one_series() {
    let (mu, _, k) = setup(12);
    let q = QuadratureConfig { trunc_generation: 12, ..Default::default() };
    let leaves = mu.nodes_at(2).len();
    let r = l2_operator_ratio(&k, 2, &[vec![1.0; leaves], vec![0.0; leaves]], &q).unwrap();
    let series = conical_norm_series(&mu, &cone(1.0), 0..=12, &q).unwrap();
    assert!((r.max_ratio - series.total()).abs() < 1e-3 * series.total(), "{} vs {}", r.max_ratio, series.total());
    assert_eq!(r.ratios[1], None);
    assert_eq!(r.witness, Some(0));
    assert!(l2_operator_ratio(&k, 2, &[vec![1.0; 3]], &q).is_err());
}

#[test]
fn conical_vertical_reduction() {
    let (mu, h, k) = setup(3);
    let q = QuadratureConfig { rel_tol: 1e-2, t_steps_per_band: 8, ..Default::default() };
    let kt = tilde_transform(&k, h.clone());
    let mut rng = crate::rng::stream(7, "reduction", 0);
    let mut inputs: Vec<Vec<f64>> = vec![vec![1.0; 16]];
    for _ in 0..2 {
        inputs.push((0..16).map(|_| if rand::Rng::random::<bool>(&mut rng) { 1.0 } else { -1.0 }).collect());
    }
    for vals in &inputs {
        let f = InputFn::CantorLeaves { measure: &mu, level: 2, values: vals };
        let direct = h.integrate(&|x| conical_value(&k, &h, &f, x, &cone(1.0), &q).unwrap().powi(2), 0.0, 1.0, 3);
        let via_tilde = h.integrate(&|x| vertical_value(&kt, &h, &f, x, &q).unwrap().powi(2), 0.0, 1.0, 3);
        let rel = (direct - via_tilde).abs() / direct;
        assert!(rel <= 2.0 * q.rel_tol, "{direct} vs {via_tilde}");
    }
}

#[test]
fn testing_functional_routes_agree() {
    let q = QuadratureConfig::default();
    let f = Arc::new(build_logproduct(Profile::Demo, 2).unwrap());
    let k = logproduct_kernel(f.clone());
    let leb = MeasureHandle::lebesgue(-3.0, 4.0);
    let ind = InputFn::Indicator { a: 0.0, b: 1.0, value: 1.0 };
    assert!(matches!(testing_functional(&k, &leb, &ind, &[], &q), Err(Error::EmptyCubeList)));
    let zero = testing_functional(&k, &leb, &InputFn::Constant(0.0), &[(0.0, 0.5)], &q).unwrap();
    assert_eq!(zero.sup, 0.0);
    let cubes: Vec<(f64, f64)> = (0..=4)
        .flat_map(|d| (0..1 << d).map(move |i| (i as f64 / (1 << d) as f64, (i + 1) as f64 / (1 << d) as f64)))
        .collect();
    // b ≡ 1 against Lebesgue measure on [-3, 4]: θ_t b = 3 on [0, 1] for t <= 1
    let r = testing_functional(&k, &leb, &InputFn::Constant(1.0), &cubes, &q).unwrap();
    for (i, &(a, b)) in cubes.iter().enumerate() {
        let ra = crate::logproduct::rat((a * 16.0) as i64, 16);
        let rb = crate::logproduct::rat((b * 16.0) as i64, 16);
        let exact = 9.0 * f.demo_carleson_quadrature(&ra, &rb).unwrap();
        assert!((r.box_integrals[i] - exact).abs() <= 1e-9 * exact.max(1.0), "[{a},{b}]: {} vs {exact}", r.box_integrals[i]);
        assert!((r.values[i] - exact / (3.0 * (b - a))).abs() <= 1e-9 * r.values[i].max(1.0));
    }
}

#[test]
fn cantor_testing_box_matches_band_sum() {
    let (mu, h, k) = setup(3);
    let q = QuadratureConfig::default();
    let one = InputFn::Constant(1.0);
    let r = testing_functional(&k, &h, &one, &[(0.0, 1.0)], &q).unwrap();
    let mut expected = 0.0;
    for level in 0..3 {
        let l_rel = mu.level_geometry(level).outer_length;
        for node in mu.nodes_at(level) {
            let kids = mu.children(&node);
            let theta = eval_theta(&k, &h, &one, l_rel * node.len, kids[1].mid(), &q).unwrap();
            expected += theta * theta * (kids[1].mass + kids[2].mass) * std::f64::consts::LN_2;
        }
    }
    assert!((r.box_integrals[0] - expected).abs() < 1e-6 * expected);
    // μ(3R) = 1 for the root
    assert!((r.sup - expected).abs() < 1e-6 * expected);
}

#[test]
fn weak11_zero_and_scaling() {
    let (mu, h, k) = setup(6);
    let q = QuadratureConfig { t_steps_per_band: 6, ..Default::default() };
    let leaves = mu.nodes_at(4);
    let mut spike = vec![0.0; leaves.len()];
    spike[37] = 1.0 / leaves[37].mass;
    let grid: Vec<f64> = (0..40).map(|i| 10f64.powf(-2.0 + 0.15 * i as f64)).collect();
    let f = InputFn::CantorLeaves { measure: &mu, level: 4, values: &spike };
    let r = weak11_functional(&k, &h, &f, &grid, 5, &cone(1.0), &q).unwrap();
    assert!((r.l1_norm - 1.0).abs() < 1e-12);
    assert!(r.sup > 0.0 && r.sup.is_finite());
    let doubled: Vec<f64> = spike.iter().map(|v| 2.0 * v).collect();
    let g2: Vec<f64> = grid.iter().map(|l| 2.0 * l).collect();
    let f2 = InputFn::CantorLeaves { measure: &mu, level: 4, values: &doubled };
    let r2 = weak11_functional(&k, &h, &f2, &g2, 5, &cone(1.0), &q).unwrap();
    assert!((r2.sup - r.sup).abs() <= 1e-12 * r.sup);
    let zero = vec![0.0; leaves.len()];
    let fz = InputFn::CantorLeaves { measure: &mu, level: 4, values: &zero };
    assert_eq!(weak11_functional(&k, &h, &fz, &grid, 5, &cone(1.0), &q).unwrap().sup, 0.0);
}
