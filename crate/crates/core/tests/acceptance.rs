//! Acceptance suite. One test per criterion, each printing a single
//! `PASS`/`FAIL` line (written straight to stdout so it shows without
//! `--nocapture`). All thresholds live in `nhsq::pinned` or next to the
//! verdicts in `nhsq::experiments`; the values asserted here are the ones
//! stated for each criterion.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::{Mutex, OnceLock};

use nhsq::experiments::{
    run, write_outputs, ExperimentConfig, ExperimentReport, Verdict, COLLAPSE_TOLERANCE, EXPERIMENTS, FIT_SPREAD,
    RECONSTRUCTION_TOL, TAIL_TOLERANCE, TESTING_GROWTH, ZERO_MEAN_TOL,
};
use nhsq::pinned;

fn report(name: &str) -> ExperimentReport {
    static CACHE: OnceLock<Mutex<BTreeMap<String, ExperimentReport>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(r) = cache.lock().unwrap().get(name) {
        return r.clone();
    }
    let r = run(&ExperimentConfig::for_experiment(name)).expect("experiment runs");
    cache.lock().unwrap().insert(name.to_string(), r.clone());
    r
}

fn announce(label: &str, passed: bool, detail: &str) {
    let line = format!("{label:<5} {} {detail}\n", if passed { "PASS" } else { "FAIL" });
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
}

fn describe(v: &[&Verdict]) -> String {
    v.iter()
        .flat_map(|v| v.checks.iter())
        .filter(|c| !c.passed)
        .map(|c| format!("[{}: {:.6e} vs {:.6e}]", c.name, c.value, c.bound))
        .collect::<Vec<_>>()
        .join(" ")
}

fn criterion(label: &str, experiments: &[&str]) {
    let reports: Vec<ExperimentReport> = experiments.iter().map(|e| report(e)).collect();
    let verdicts: Vec<&Verdict> = reports
        .iter()
        .map(|r| r.verdict(label).unwrap_or_else(|| panic!("{} has no {label} verdict", r.name)))
        .collect();
    let passed = verdicts.iter().all(|v| v.passed);
    announce(label, passed, &describe(&verdicts));
    assert!(passed, "{label} failed: {}", describe(&verdicts));
}

fn check_value(r: &ExperimentReport, label: &str, prefix: &str) -> (f64, f64) {
    let c = r
        .verdict(label)
        .and_then(|v| v.checks.iter().find(|c| c.name.starts_with(prefix)))
        .unwrap_or_else(|| panic!("{label}: no check starting with `{prefix}`"));
    (c.value, c.bound)
}

#[test]
fn ac1a_aperture_one_tail() {
    let r = report("aperture");
    assert_eq!((r.config.m, r.config.c, r.config.generations, r.config.rel_tol), (0.4, 16.0, 40, 1e-3));
    assert_eq!(TAIL_TOLERANCE, 0.10);
    let (tail, bound) = check_value(&r, "AC1a", "P_40(1) - P_20(1)");
    assert!((bound - 1.1 * r.metrics["aperture_one_tail_bound"]).abs() <= 1e-12 * bound);
    assert!(tail.is_finite());
    criterion("AC1a", &["aperture"]);
}

#[test]
fn ac1b_aperture_two_growth() {
    let r = report("aperture");
    assert_eq!(FIT_SPREAD, 0.25);
    assert!(r.metrics.contains_key("aperture_two_fit_c_8") && r.metrics.contains_key("aperture_two_fit_c_16"));
    criterion("AC1b", &["aperture"]);
}

#[test]
fn ac2_collapse_oracle() {
    let r = report("aperture");
    assert_eq!(COLLAPSE_TOLERANCE, 0.01);
    // n = 0..=3 for each of the three apertures
    assert_eq!(r.verdict("AC2").unwrap().checks.len(), 12);
    criterion("AC2", &["aperture"]);
}

#[test]
fn ac3_vertical_divergence() {
    criterion("AC3", &["vertical"]);
}

#[test]
fn ac4_l2_bound() {
    let r = report("l2-bound");
    assert_eq!((r.config.leaf_level, r.config.random_inputs), (5, 20));
    criterion("AC4", &["l2-bound"]);
}

#[test]
fn ac5_growth() {
    let r = report("growth");
    assert_eq!(r.config.growth_samples, 100_000);
    assert_eq!(pinned::K_GROWTH, 4.0);
    criterion("AC5", &["growth"]);
}

#[test]
fn ac6_kernel_conditions() {
    let r = report("kernel-conditions");
    assert_eq!(r.config.kernel_samples, 10_000);
    let (_, bound) = check_value(&r, "AC6", "step fixture");
    assert_eq!(bound, 10.0);
    criterion("AC6", &["kernel-conditions"]);
}

#[test]
fn ac7_logproduct_exact() {
    let r = report("logproduct");
    assert_eq!((r.config.paper_truncation, r.config.dyadic_samples), (4, 1000));
    criterion("AC7", &["logproduct"]);
}

#[test]
fn ac8_testing_condition() {
    let r = report("tb-testing");
    assert_eq!(r.config.demo_truncations, vec![2, 3, 4]);
    assert_eq!(r.config.testing_depth, 12);
    assert_eq!(TESTING_GROWTH, 0.05);
    criterion("AC8", &["tb-testing"]);
}

#[test]
fn ac9_moment_ratio_grows() {
    criterion("AC9", &["logproduct"]);
}

#[test]
fn ac10_weak11() {
    assert_eq!(report("weak11").config.spikes, 10);
    criterion("AC10", &["weak11"]);
}

#[test]
fn ac11_dyadic_machinery() {
    assert_eq!((RECONSTRUCTION_TOL, ZERO_MEAN_TOL), (1e-10, 1e-12));
    let g = report("goodness");
    assert_eq!(g.config.shift_trials, 100);
    assert_eq!(report("stopping").config.random_inputs, 20);
    criterion("AC11", &["goodness", "stopping"]);
}

#[test]
fn ac12_determinism() {
    let mut mismatched = Vec::new();
    for e in EXPERIMENTS {
        let cfg = ExperimentConfig::for_experiment(e.name);
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let pa = write_outputs(&run(&cfg).unwrap(), a.path(), false).unwrap();
        let pb = write_outputs(&run(&cfg).unwrap(), b.path(), false).unwrap();
        for (x, y) in [(&pa.report, &pb.report), (&pa.csv, &pb.csv)] {
            if std::fs::read(x).unwrap() != std::fs::read(y).unwrap() {
                mismatched.push(format!("{}/{}", e.name, x.file_name().unwrap().to_string_lossy()));
            }
        }
    }
    let passed = mismatched.is_empty();
    announce("AC12", passed, &mismatched.join(" "));
    assert!(passed, "outputs differ between runs: {mismatched:?}");
}
