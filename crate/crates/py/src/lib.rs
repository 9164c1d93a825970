//! Python bindings: ensembles, spectra, path combinatorics, the exact oracle
//! and the experiment runners.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use wigner_core::correspondence as corr;
use wigner_core::dyck_stats;
use wigner_core::ensembles::{self, LawKind, SymmetryClass};
use wigner_core::experiments::{self as exp, ExperimentConfig, Report, VerifyLimits};
use wigner_core::moment_oracle::{self as oracle, MomentModel};
use wigner_core::path_model::{self as pm, ClosedPath, Trajectory};
use wigner_core::spectral;
use wigner_core::stats;

create_exception!(wigner_py, WignerError, PyValueError);

fn err(e: wigner_core::Error) -> PyErr {
    WignerError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr<Err = wigner_core::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

fn to_py_json<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| err(e.into()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "EnsembleConfig", module = "wigner_py", frozen)]
struct PyEnsembleConfig {
    inner: ensembles::EnsembleConfig,
}

#[pymethods]
impl PyEnsembleConfig {
    #[new]
    #[pyo3(signature = (n, sigma=1.0, theta=0.0, symmetry="complex", law="gaussian", seed=0, diag_sigma=None))]
    fn new(
        n: usize,
        sigma: f64,
        theta: f64,
        symmetry: &str,
        law: &str,
        seed: u64,
        diag_sigma: Option<f64>,
    ) -> PyResult<Self> {
        let mut inner = ensembles::EnsembleConfig::new(n, sigma, theta, parse(symmetry)?, parse(law)?, seed)
            .map_err(err)?;
        if let Some(d) = diag_sigma {
            inner = inner.with_diag_sigma(d).map_err(err)?;
        }
        Ok(PyEnsembleConfig { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }
    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma
    }
    #[getter]
    fn theta(&self) -> f64 {
        self.inner.theta
    }
    #[getter]
    fn law(&self) -> &'static str {
        self.inner.law.as_str()
    }
    #[getter]
    fn symmetry(&self) -> &'static str {
        self.inner.symmetry.as_str()
    }
    #[getter]
    fn seed(&self) -> u64 {
        self.inner.master_seed
    }

    /// `{"label", "rho_theta", "sigma_theta"}`.
    fn regime<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let r = self.inner.regime().map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("label", r.label.to_string())?;
        d.set_item("rho_theta", r.rho_theta)?;
        d.set_item("sigma_theta", r.sigma_theta)?;
        Ok(d)
    }

    /// Dense deformed matrix `M` for one sample, as nested lists of complex.
    #[pyo3(signature = (sample_index=0))]
    fn matrix(&self, sample_index: u64) -> Vec<Vec<num_complex::Complex64>> {
        let m = ensembles::sample_deformed(&self.inner, sample_index);
        (0..m.dim).map(|i| (0..m.dim).map(|j| m.get(i, j)).collect()).collect()
    }

    /// Eigenvalues of the deformed matrix, descending.
    #[pyo3(signature = (sample_index=0, deformed=true))]
    fn eigenvalues(&self, sample_index: u64, deformed: bool) -> PyResult<Vec<f64>> {
        let m = if deformed {
            ensembles::sample_deformed(&self.inner, sample_index)
        } else {
            ensembles::sample_normalized_wigner(&self.inner, sample_index)
        };
        Ok(spectral::eigenvalues(&m).map_err(err)?.values)
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "EnsembleConfig(n={}, sigma={}, theta={}, symmetry='{}', law='{}', seed={})",
            c.n, c.sigma, c.theta, c.symmetry, c.law, c.master_seed
        )
    }
}

/// `sum_i lambda_i^L`.
#[pyfunction]
fn trace_power(values: Vec<f64>, power: u32) -> f64 {
    spectral::trace_power(&spectral::Spectrum::from_values(values), power)
}

#[pyfunction]
fn tridiagonal_eigenvalues(diag: Vec<f64>, offdiag: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(spectral::tridiagonal_eigenvalues(&diag, &offdiag).map_err(err)?.values)
}

#[pyfunction]
fn gaussian_cdf(x: f64, mean: f64, variance: f64) -> f64 {
    stats::gaussian_cdf(x, mean, variance)
}

#[pyfunction]
#[pyo3(signature = (x, sigma=1.0))]
fn semicircle_cdf(x: f64, sigma: f64) -> f64 {
    stats::semicircle_cdf(x, sigma)
}

/// KS distance of `sample` to `N(mean, variance)`.
#[pyfunction]
#[pyo3(signature = (sample, mean=0.0, variance=1.0))]
fn ks_gaussian(sample: Vec<f64>, mean: f64, variance: f64) -> PyResult<f64> {
    stats::ks_one_sample(&sample, |x| stats::gaussian_cdf(x, mean, variance), stats::KsMode::OneSampleGaussian)
        .map(|r| r.statistic)
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (sample, sigma=1.0))]
fn ks_semicircle(sample: Vec<f64>, sigma: f64) -> PyResult<f64> {
    stats::ks_one_sample(&sample, |x| stats::semicircle_cdf(x, sigma), stats::KsMode::OneSampleSemicircle)
        .map(|r| r.statistic)
        .map_err(err)
}

#[pyfunction]
fn ks_two_sample(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    stats::ks_two_sample(&a, &b).map(|r| r.statistic).map_err(err)
}

/// `|T_{m,l}|` as an exact integer.
#[pyfunction]
fn count_trajectories(m: u64, l: u64) -> BigUint {
    pm::count_trajectories(m, l)
}

/// All members of `T_{m,l}` as `U`/`D` strings, lexicographic with `U` first.
#[pyfunction]
fn enumerate_trajectories(m: u64, l: u64) -> PyResult<Vec<String>> {
    Ok(pm::enumerate_trajectories(m, l).map_err(err)?.iter().map(Trajectory::to_string).collect())
}

fn closed(vertices: Vec<u32>) -> PyResult<ClosedPath> {
    ClosedPath::from_vertices(vertices).map_err(err)
}

/// Trajectory of a closed path, as a `U`/`D` string.
#[pyfunction]
fn trajectory_of(vertices: Vec<u32>) -> PyResult<String> {
    Ok(pm::trajectory_of(&closed(vertices)?).to_string())
}

/// `(image, shift_k, level_p)`.
#[pyfunction]
fn to_marked_origin(vertices: Vec<u32>) -> PyResult<(Vec<u32>, usize, i64)> {
    let r = corr::to_marked_origin(&closed(vertices)?).map_err(err)?;
    Ok((r.image.vertices().to_vec(), r.shift_k, r.level_p))
}

#[pyfunction]
fn from_marked_origin(image: Vec<u32>, shift_k: usize, level_p: i64) -> PyResult<Vec<u32>> {
    let r = corr::CorrespondenceResult { image: closed(image)?, shift_k, level_p };
    Ok(corr::from_marked_origin(&r).map_err(err)?.vertices().to_vec())
}

#[pyfunction]
fn glue_paths(p1: Vec<u32>, p2: Vec<u32>) -> PyResult<Vec<u32>> {
    let (a, b) = (closed(p1)?, closed(p2)?);
    let n = a.ambient_n().max(b.ambient_n());
    let (a, b) = (a.with_ambient(n).map_err(err)?, b.with_ambient(n).map_err(err)?);
    Ok(corr::glue_paths(&a, &b).map_err(err)?.vertices().to_vec())
}

#[pyfunction]
fn k_statistic(trajectory: &str, window: usize) -> PyResult<usize> {
    Ok(corr::k_statistic(&parse(trajectory)?, window))
}

/// `{"rises", "subpaths", "class_t"}`.
#[pyfunction]
fn dyck_decompose<'py>(py: Python<'py>, trajectory: &str) -> PyResult<Bound<'py, PyDict>> {
    let d = dyck_stats::dyck_decompose(&parse(trajectory)?);
    let out = PyDict::new(py);
    out.set_item("rises", d.rises.clone())?;
    out.set_item("subpaths", d.subpaths.iter().map(Trajectory::to_string).collect::<Vec<_>>())?;
    out.set_item("class_t", d.class_t())?;
    Ok(out)
}

/// `P(max level = k)` for `k = 0..=m` under the uniform Dyck law (or a class).
#[pyfunction]
#[pyo3(signature = (m, class_t=None))]
fn max_level_distribution(m: u64, class_t: Option<Vec<u64>>) -> PyResult<Vec<f64>> {
    Ok(dyck_stats::max_level_distribution(m, class_t.as_deref()).map_err(err)?.probabilities())
}

/// Exact `E Tr M^L` by the path sum.
#[pyfunction]
#[pyo3(signature = (n, power, theta=0.0, sigma=1.0, law="gaussian", symmetry="complex", diag_sigma=None))]
fn exact_trace_expectation(
    n: usize,
    power: u32,
    theta: f64,
    sigma: f64,
    law: &str,
    symmetry: &str,
    diag_sigma: Option<f64>,
) -> PyResult<f64> {
    let law: LawKind = parse(law)?;
    let sym: SymmetryClass = parse(symmetry)?;
    let model = MomentModel::new(sym, law, sigma, diag_sigma.unwrap_or(sigma), power);
    oracle::exact_trace_expectation(n, power, &model, theta).map_err(err)
}

#[pyfunction]
fn asymptotic_predictions<'py>(py: Python<'py>, s: u64, theta: f64, sigma: f64, n: u64) -> PyResult<Bound<'py, PyAny>> {
    let p = oracle::asymptotic_predictions(s, theta, sigma, n).map_err(err)?;
    to_py_json(py, &p)
}

fn report_to_py<'py>(py: Python<'py>, r: &Report) -> PyResult<Bound<'py, PyAny>> {
    let out = to_py_json(py, r)?;
    out.set_item("passed", r.passed())?;
    Ok(out)
}

/// Runs `fluctuations`, `trace-growth`, `census`, `oracle-compare` or
/// `even-trace`; keyword arguments are the config-file keys.
#[pyfunction]
#[pyo3(signature = (command, s=8, **kwargs))]
fn run_experiment<'py>(
    py: Python<'py>,
    command: &str,
    s: u32,
    kwargs: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut map = BTreeMap::new();
    if let Some(kw) = kwargs {
        for (k, v) in kw.iter() {
            let key: String = k.extract()?;
            let value = match v.extract::<Vec<u32>>() {
                Ok(list) => list.iter().map(u32::to_string).collect::<Vec<_>>().join(","),
                Err(_) => v.str()?.to_string(),
            };
            map.insert(key.replace('-', "_"), value);
        }
    }
    if let Some(bad) = map.keys().find(|k| !exp::CONFIG_KEYS.contains(&k.as_str())) {
        return Err(WignerError::new_err(format!("unknown key '{bad}'")));
    }
    let cfg = ExperimentConfig::from_map(&map).map_err(err)?;
    let command = command.to_string();
    let report = py
        .detach(|| {
            exp::run_in_pool(cfg.threads, || match command.as_str() {
                "fluctuations" => exp::run_fluctuations(&cfg),
                "trace-growth" => exp::run_trace_growth(&cfg),
                "census" => exp::run_spectrum_census(&cfg),
                "oracle-compare" => exp::run_oracle_compare(&cfg),
                "even-trace" => exp::run_even_trace(&cfg, s),
                other => Err(wigner_core::Error::InvalidConfig(format!("unknown command '{other}'"))),
            })
        })
        .map_err(err)?
        .map_err(err)?;
    report_to_py(py, &report)
}

/// The exact combinatorics battery; `empty=True` starts from no checks and
/// the keyword limits switch individual ones on.
#[pyfunction]
#[pyo3(signature = (empty=false, count_max_len=None, sum_max_len=None, census_max_len=None, census_vertices=None, glue_max_len=None, class_s_max=None, inject_fault=None))]
#[allow(clippy::too_many_arguments)]
fn verify_combinatorics<'py>(
    py: Python<'py>,
    empty: bool,
    count_max_len: Option<u64>,
    sum_max_len: Option<u64>,
    census_max_len: Option<usize>,
    census_vertices: Option<u32>,
    glue_max_len: Option<usize>,
    class_s_max: Option<u64>,
    inject_fault: Option<(u64, u64)>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut l = if empty { VerifyLimits::empty() } else { VerifyLimits::default() };
    l.count_max_len = count_max_len.unwrap_or(l.count_max_len);
    l.sum_max_len = sum_max_len.unwrap_or(l.sum_max_len);
    l.correspondence_max_len = census_max_len.unwrap_or(l.correspondence_max_len);
    l.correspondence_vertices = census_vertices.unwrap_or(l.correspondence_vertices);
    l.glue_max_len = glue_max_len.unwrap_or(l.glue_max_len);
    l.class_bound_s_max = class_s_max.unwrap_or(l.class_bound_s_max);
    l.corrupt_count = inject_fault;
    let report = py.detach(|| exp::run_combinatorics_verify(&l)).map_err(err)?;
    report_to_py(py, &report)
}

#[pymodule]
fn wigner_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("WignerError", m.py().get_type::<WignerError>())?;
    m.add_class::<PyEnsembleConfig>()?;
    m.add_function(wrap_pyfunction!(trace_power, m)?)?;
    m.add_function(wrap_pyfunction!(tridiagonal_eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(semicircle_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(ks_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(ks_semicircle, m)?)?;
    m.add_function(wrap_pyfunction!(ks_two_sample, m)?)?;
    m.add_function(wrap_pyfunction!(count_trajectories, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_trajectories, m)?)?;
    m.add_function(wrap_pyfunction!(trajectory_of, m)?)?;
    m.add_function(wrap_pyfunction!(to_marked_origin, m)?)?;
    m.add_function(wrap_pyfunction!(from_marked_origin, m)?)?;
    m.add_function(wrap_pyfunction!(glue_paths, m)?)?;
    m.add_function(wrap_pyfunction!(k_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(dyck_decompose, m)?)?;
    m.add_function(wrap_pyfunction!(max_level_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(exact_trace_expectation, m)?)?;
    m.add_function(wrap_pyfunction!(asymptotic_predictions, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(verify_combinatorics, m)?)?;
    Ok(())
}
