//! Python bindings for `nhsq`.
//!
//! Structured results cross the boundary as JSON and come back as plain
//! Python dicts and lists; errors become `ValueError`.

use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use nhsq::dyadic::{self, GoodnessParams, GridCube};
use nhsq::experiments::{self, ExperimentConfig};
use nhsq::logproduct::{self, exact::rational_to_f64};
use nhsq::measures::{self, CantorParams, MeasureHandle};
use nhsq::quad::QuadratureConfig;
use nhsq::sqfn::{self, ConeSpec};

fn err(e: nhsq::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Cantor-type measure on `[0, 1]` truncated at `depth` generations.
#[pyclass(frozen)]
struct CantorMeasure {
    inner: Arc<measures::CantorMeasure>,
}

#[pymethods]
impl CantorMeasure {
    #[new]
    #[pyo3(signature = (m = 0.4, c = 16.0, depth = 8))]
    fn new(m: f64, c: f64, depth: usize) -> PyResult<Self> {
        let inner = measures::build_cantor(CantorParams::new(m, c, depth)).map_err(err)?;
        Ok(Self { inner: Arc::new(inner) })
    }

    #[getter]
    fn depth(&self) -> usize {
        self.inner.depth()
    }

    #[getter]
    fn m(&self) -> f64 {
        self.inner.m()
    }

    /// `μ([a, b])`.
    fn interval_mass(&self, a: f64, b: f64) -> PyResult<f64> {
        if b < a {
            return Err(err(nhsq::Error::ReversedInterval { a, b }));
        }
        Ok(self.inner.interval_mass(a, b))
    }

    /// `(left, length, mass)` of every construction interval at `level`.
    fn nodes_at(&self, level: usize) -> PyResult<Vec<(f64, f64, f64)>> {
        if level > self.inner.depth() {
            return Err(err(nhsq::Error::OutOfRange { requested: level, max: self.inner.depth() }));
        }
        Ok(self.inner.nodes_at(level).iter().map(|n| (n.left, n.len, n.mass)).collect())
    }

    /// Conical norm series `g(n, α)`, `n = 0..=n_max`.
    #[pyo3(signature = (alpha, n_max, rel_tol = 1e-3))]
    fn conical_series(&self, py: Python<'_>, alpha: f64, n_max: usize, rel_tol: f64) -> PyResult<Py<PyAny>> {
        let cone = ConeSpec::new(alpha, self.inner.m()).map_err(err)?;
        let quad = QuadratureConfig { rel_tol, ..QuadratureConfig::default() };
        let s = sqfn::conical_norm_series(&self.inner, &cone, 0..=n_max, &quad).map_err(err)?;
        to_py(py, &s)
    }

    /// Vertical norm series `g_V(n)`, `n = 0..=n_max`.
    fn vertical_series(&self, py: Python<'_>, n_max: usize) -> PyResult<Py<PyAny>> {
        let s = sqfn::vertical_norm_series(&self.inner, 0..=n_max, &QuadratureConfig::default()).map_err(err)?;
        to_py(py, &s)
    }

    /// Sampled `sup μ(J)/ℓ(J)^m`.
    #[pyo3(signature = (samples = 10_000, seed = 0))]
    fn growth_constant(&self, py: Python<'_>, samples: usize, seed: u64) -> PyResult<Py<PyAny>> {
        let h = MeasureHandle::Cantor(self.inner.clone());
        to_py(py, &measures::growth_constant(&h, self.inner.m(), samples, seed))
    }
}

/// Log-product function `f = exp(-Σ aₙ 1_{Eₙ})` truncated at `n`.
#[pyclass(frozen)]
struct LogProduct {
    inner: logproduct::LogProductFn,
}

#[pymethods]
impl LogProduct {
    /// `profile` is `"paper"` or `"demo"`.
    #[new]
    fn new(profile: &str, n: usize) -> PyResult<Self> {
        let p = match profile {
            "paper" => logproduct::Profile::Paper,
            "demo" => logproduct::Profile::Demo,
            other => return Err(PyValueError::new_err(format!("unknown profile `{other}`"))),
        };
        Ok(Self { inner: logproduct::build_logproduct(p, n).map_err(err)? })
    }

    /// `(A(x), f(x))`; the exponent is an exact integer.
    fn eval(&self, x: f64) -> PyResult<(String, f64)> {
        let v = self.inner.eval_f64(x).map_err(err)?;
        Ok((v.exponent.to_string(), v.value))
    }

    /// `∫₀¹ (ln 1/f)^p`, exact, as `(numerator, denominator, float)`.
    fn log_moment(&self, p: u32) -> PyResult<(String, String, f64)> {
        let q = self.inner.log_moment(p).map_err(err)?;
        Ok((q.numer().to_string(), q.denom().to_string(), rational_to_f64(&q)))
    }

    /// Whether `|Eₙ|·aₙ^{1+1/n} >= n` holds exactly.
    fn divergence_witness(&self, n: usize) -> PyResult<bool> {
        Ok(self.inner.lp_divergence_witness(n).map_err(err)?.satisfied)
    }
}

/// Randomly shifted dyadic grid over scales `i_min..=i_max`.
#[pyclass(frozen)]
struct ShiftedGrid {
    inner: dyadic::ShiftedGrid,
}

#[pymethods]
impl ShiftedGrid {
    #[new]
    fn new(seed: u64, i_min: i32, i_max: i32) -> PyResult<Self> {
        Ok(Self { inner: dyadic::make_grid(seed, i_min..=i_max).map_err(err)? })
    }

    #[getter]
    fn shift_id(&self) -> String {
        self.inner.shift_id()
    }

    /// `(index, left, right)` of the cube of `scale` containing `x`.
    fn locate(&self, x: f64, scale: i32) -> Option<(i64, f64, f64)> {
        self.inner.locate(x, scale).map(|c| {
            let (a, b) = self.inner.interval(c);
            (c.index, a, b)
        })
    }

    /// Goodness class of the cube `(scale, index)` as a dict.
    #[pyo3(signature = (scale, index, m = 0.4, alpha = 1.0, cutoff = 24))]
    fn classify(&self, py: Python<'_>, scale: i32, index: i64, m: f64, alpha: f64, cutoff: u32) -> PyResult<Py<PyAny>> {
        let params = GoodnessParams::new(m, alpha).map_err(err)?;
        let g = dyadic::classify_good(&self.inner, GridCube { scale, index }, &params, cutoff).map_err(err)?;
        to_py(py, &g)
    }
}

/// Monte-Carlo estimate of the probability that a cube is good.
#[pyfunction]
#[pyo3(signature = (trials = 1000, seed = 0, m = 0.4, alpha = 1.0, cutoff = 24))]
fn estimate_pi_good(py: Python<'_>, trials: usize, seed: u64, m: f64, alpha: f64, cutoff: u32) -> PyResult<Py<PyAny>> {
    let params = GoodnessParams::new(m, alpha).map_err(err)?;
    let r = py.detach(|| dyadic::estimate_pi_good(&params, trials, seed, cutoff)).map_err(err)?;
    to_py(py, &r)
}

/// Names of the available experiments.
#[pyfunction]
fn list_experiments() -> Vec<&'static str> {
    experiments::EXPERIMENTS.iter().map(|e| e.name).collect()
}

/// Run an experiment and return its report. `config` is TOML text with
/// overrides; `name` wins over an `experiment` key in it.
#[pyfunction]
#[pyo3(signature = (name, config = None))]
fn run_experiment(py: Python<'_>, name: &str, config: Option<&str>) -> PyResult<Py<PyAny>> {
    let mut cfg = match config {
        Some(text) => ExperimentConfig::from_toml_str(text).map_err(err)?,
        None => ExperimentConfig::default(),
    };
    cfg.experiment = name.to_string();
    let report = py.detach(|| experiments::run(&cfg)).map_err(err)?;
    to_py(py, &report)
}

#[pymodule]
fn nhsq_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<CantorMeasure>()?;
    m.add_class::<LogProduct>()?;
    m.add_class::<ShiftedGrid>()?;
    m.add_function(wrap_pyfunction!(estimate_pi_good, m)?)?;
    m.add_function(wrap_pyfunction!(list_experiments, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
