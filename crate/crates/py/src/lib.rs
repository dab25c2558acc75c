//! Python bindings for `lace_core`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use lace_core::counterfactual;
use lace_core::decoder::{logical_error_rate_with, DecoderConfig};
use lace_core::error::ErrorCategory;
use lace_core::estimate::{empirical_dists, fit_decays, qubit_error_rates, LearnedChannel};
use lace_core::models::{self, FactorGraph, FitOptions, MarginalOracle, ModelKind, NoiseModel};
use lace_core::prob;
use lace_core::protocol::{ExperimentPlan, Protocol};
use lace_core::sim::{NoiseConfig, Simulator};
use lace_core::surface::{self, CodeLayout};
use lace_core::{synthetic, BitString, LaceError};

pub mod convert;

fn to_py(e: LaceError) -> PyErr {
    match e.category() {
        ErrorCategory::Numeric => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Distribution over `2ⁿ` error-indicator strings.
#[pyclass(name = "ProbDist", module = "lace", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyProbDist {
    inner: prob::ProbDist,
}

#[pymethods]
impl PyProbDist {
    #[new]
    fn new(n: usize, values: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: prob::ProbDist::new(n, values).map_err(to_py)? })
    }

    #[staticmethod]
    fn delta(n: usize, x: u64) -> PyResult<Self> {
        Ok(Self { inner: prob::ProbDist::delta(n, x).map_err(to_py)? })
    }

    #[staticmethod]
    fn uniform(n: usize) -> PyResult<Self> {
        Ok(Self { inner: prob::ProbDist::uniform(n).map_err(to_py)? })
    }

    #[staticmethod]
    fn product(rates: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: prob::ProbDist::product(&rates).map_err(to_py)? })
    }

    #[getter]
    fn num_sites(&self) -> usize {
        self.inner.num_sites()
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn site_rates(&self) -> Vec<f64> {
        self.inner.site_rates()
    }

    fn mean_site_rate(&self) -> f64 {
        self.inner.mean_site_rate()
    }

    fn tvd(&self, other: &PyProbDist) -> PyResult<f64> {
        self.inner.tvd(&other.inner).map_err(to_py)
    }

    fn eigenvalues(&self) -> PyResult<Vec<f64>> {
        Ok(prob::wht_forward(&self.inner).map_err(to_py)?.into_values())
    }

    fn marginal(&self, sites: Vec<usize>) -> PyResult<Self> {
        Ok(Self { inner: prob::marginalize(&self.inner, &sites).map_err(to_py)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        Ok(Self { inner: prob::ProbDist::from_json(s).map_err(to_py)? })
    }

    fn __len__(&self) -> usize {
        self.inner.values().len()
    }

    fn __repr__(&self) -> String {
        format!("ProbDist(n={}, mean_rate={:.6})", self.inner.num_sites(), self.inner.mean_site_rate())
    }
}

/// Rotated surface-code patch of `rows × cols` data qubits.
#[pyclass(name = "CodeLayout", module = "lace", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyCodeLayout {
    inner: CodeLayout,
}

#[pymethods]
impl PyCodeLayout {
    #[new]
    fn new(rows: usize, cols: usize) -> PyResult<Self> {
        Ok(Self { inner: CodeLayout::new(rows, cols).map_err(to_py)? })
    }

    #[getter]
    fn rows(&self) -> usize {
        self.inner.rows
    }

    #[getter]
    fn cols(&self) -> usize {
        self.inner.cols
    }

    #[getter]
    fn n_data(&self) -> usize {
        self.inner.n_data()
    }

    #[getter]
    fn n_ancillas(&self) -> usize {
        self.inner.n_ancillas()
    }

    #[getter]
    fn distance(&self) -> usize {
        self.inner.distance()
    }

    fn data_edges(&self) -> Vec<(usize, usize)> {
        self.inner.data_edges()
    }

    fn data_neighbors(&self, q: usize) -> Vec<usize> {
        self.inner.data_neighbors(q)
    }

    /// Check that two scheduled rounds compose to the identity.
    fn verify_two_round_identity(&self) -> bool {
        surface::verify_two_round_identity(&self.inner, &surface::stabilizer_prep_round(&self.inner))
    }

    fn syndrome(&self, x_mask: u64, z_mask: u64) -> u64 {
        self.inner.syndrome_masks(x_mask, z_mask)
    }

    fn __repr__(&self) -> String {
        format!("CodeLayout({}x{})", self.inner.rows, self.inner.cols)
    }
}

/// Channel reconstructed from shot data.
#[pyclass(name = "LearnedChannel", module = "lace", frozen)]
pub struct PyLearnedChannel {
    inner: LearnedChannel,
}

#[pymethods]
impl PyLearnedChannel {
    #[getter]
    fn distribution(&self) -> PyProbDist {
        PyProbDist { inner: self.inner.distribution.clone() }
    }

    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues.values().to_vec()
    }

    /// Per-qubit error rates, per stabilizer round by default.
    #[pyo3(signature = (per_round = true))]
    fn qubit_rates(&self, per_round: bool) -> PyResult<Vec<f64>> {
        qubit_error_rates(&self.inner, per_round).map_err(to_py)
    }

    #[getter]
    fn clamped(&self) -> usize {
        self.inner.summary.clamped
    }

    #[getter]
    fn unrecoverable(&self) -> usize {
        self.inner.summary.unrecoverable
    }
}

/// Fitted graphical noise model.
#[pyclass(name = "NoiseModel", module = "lace", frozen)]
pub struct PyNoiseModel {
    inner: NoiseModel,
}

#[pymethods]
impl PyNoiseModel {
    #[getter]
    fn kind(&self) -> String {
        self.inner.kind().to_string()
    }

    #[getter]
    fn parameter_count(&self) -> usize {
        self.inner.graph.parameter_count()
    }

    fn dist(&self) -> PyResult<PyProbDist> {
        Ok(PyProbDist { inner: self.inner.dist().map_err(to_py)? })
    }

    /// Unnormalized `−log p(x) + log p(0)`.
    fn log_prob(&self, x: u64) -> PyResult<f64> {
        let bits = BitString::new(x, self.inner.graph.n).map_err(to_py)?;
        self.inner.log_prob(bits).map_err(to_py)
    }

    #[pyo3(signature = (count, seed))]
    fn sample(&self, count: usize, seed: u64) -> PyResult<Vec<u64>> {
        models::sample_model(&self.inner, count, seed, &models::GibbsOptions::default()).map_err(to_py)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }
}

#[pyfunction]
fn paper_like(layout: &PyCodeLayout) -> PyResult<PyProbDist> {
    Ok(PyProbDist { inner: synthetic::paper_like(&layout.inner).map_err(to_py)? })
}

#[pyfunction]
fn correlated_reference(layout: &PyCodeLayout) -> PyResult<PyProbDist> {
    Ok(PyProbDist { inner: synthetic::correlated_reference(&layout.inner).map_err(to_py)? })
}

#[pyfunction]
fn wht_inverse(eigenvalues: Vec<f64>) -> PyResult<Vec<f64>> {
    let n = convert::sites_of_len(eigenvalues.len()).map_err(to_py)?;
    let l = prob::EigenvalueVector::new(n, eigenvalues).map_err(to_py)?;
    prob::wht_inverse(&l).map_err(to_py)
}

#[pyfunction]
fn project_simplex(values: Vec<f64>) -> Vec<f64> {
    prob::project_simplex_values(&values).0
}

#[pyfunction]
fn xor_convolve(p: &PyProbDist, q: &PyProbDist) -> PyResult<PyProbDist> {
    Ok(PyProbDist { inner: prob::xor_convolve(&p.inner, &q.inner).map_err(to_py)? })
}

#[pyfunction]
fn locally_average(p: &PyProbDist) -> PyProbDist {
    PyProbDist { inner: prob::locally_average(&p.inner) }
}

/// Simulate the randomized protocol under an effective channel and fit it back.
#[pyfunction]
#[pyo3(signature = (truth, layout, m_grid, sequences_per_m, shots, seed))]
fn simulate_and_estimate(
    py: Python<'_>,
    truth: &PyProbDist,
    layout: &PyCodeLayout,
    m_grid: Vec<usize>,
    sequences_per_m: usize,
    shots: usize,
    seed: u64,
) -> PyResult<PyLearnedChannel> {
    let (truth, layout) = (truth.inner.clone(), layout.inner.clone());
    let inner = py
        .detach(move || {
            let protocol = Protocol::new(layout);
            let plan = ExperimentPlan::new(m_grid, sequences_per_m, shots, seed)?;
            let archive = Simulator::new(&protocol, &NoiseConfig::effective(truth))?.run_plan(&plan)?;
            let sites: Vec<usize> = (0..archive.n_data).collect();
            fit_decays(&empirical_dists(&archive, &sites)?)
        })
        .map_err(to_py)?;
    Ok(PyLearnedChannel { inner })
}

#[pyfunction]
#[pyo3(signature = (kind, layout, source, pseudo_total = 1e6))]
fn fit_model(kind: &str, layout: &PyCodeLayout, source: &PyProbDist, pseudo_total: f64) -> PyResult<PyNoiseModel> {
    let kind: ModelKind = kind.parse().map_err(to_py)?;
    let graph = FactorGraph::build(kind, &layout.inner).map_err(to_py)?;
    let oracle = MarginalOracle::new(&source.inner).map_err(to_py)?;
    let inner = models::estimate_couplings(&graph, &oracle, &FitOptions { pseudo_total }).map_err(to_py)?;
    Ok(PyNoiseModel { inner })
}

#[pyfunction]
fn jsd(p: &PyProbDist, q: &PyProbDist) -> PyResult<f64> {
    models::jsd(&p.inner, &q.inner).map_err(to_py)
}

#[pyfunction]
fn cov_diff_norm(p: &PyProbDist, q: &PyProbDist) -> PyResult<f64> {
    models::cov_diff_norm(&p.inner, &q.inner).map_err(to_py)
}

#[pyfunction]
fn conditional_entropy(p: &PyProbDist, target: usize, given: Vec<usize>) -> PyResult<f64> {
    let oracle = MarginalOracle::new(&p.inner).map_err(to_py)?;
    models::conditional_entropy(&oracle, target, &given).map_err(to_py)
}

#[pyfunction]
fn blanket_search(p: &PyProbDist, target: usize, k: usize) -> PyResult<(Vec<usize>, f64)> {
    let oracle = MarginalOracle::new(&p.inner).map_err(to_py)?;
    let r = models::blanket_search(&oracle, target, k).map_err(to_py)?;
    Ok((r.subset, r.entropy))
}

/// Channel at fractional power `t` of `p`.
#[pyfunction]
fn interpolate(p: &PyProbDist, t: f64) -> PyResult<PyProbDist> {
    let l = prob::wht_forward(&p.inner).map_err(to_py)?;
    Ok(PyProbDist { inner: counterfactual::interpolate(&l, t).map_err(to_py)?.distribution })
}

#[pyfunction]
fn t_for_average_rate(p: &PyProbDist, rate: f64) -> PyResult<f64> {
    let l = prob::wht_forward(&p.inner).map_err(to_py)?;
    counterfactual::t_for_average_rate(&l, rate).map_err(to_py)
}

/// Code-capacity logical error rate `(rate, sigma)` of errors drawn from `source`.
#[pyfunction]
#[pyo3(signature = (layout, source, samples = 10000, repeats = 10, seed = 0, decoder = "auto"))]
fn logical_error_rate(
    py: Python<'_>,
    layout: &PyCodeLayout,
    source: &PyProbDist,
    samples: usize,
    repeats: usize,
    seed: u64,
    decoder: &str,
) -> PyResult<(f64, f64)> {
    let config: DecoderConfig = convert::parse_decoder(decoder, &layout.inner).map_err(to_py)?;
    let (layout, source) = (layout.inner.clone(), source.inner.clone());
    let r =
        py.detach(move || logical_error_rate_with(&layout, &source, &config, samples, repeats, seed)).map_err(to_py)?;
    Ok((r.rate, r.sigma))
}

#[pymodule]
fn lace(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProbDist>()?;
    m.add_class::<PyCodeLayout>()?;
    m.add_class::<PyLearnedChannel>()?;
    m.add_class::<PyNoiseModel>()?;
    m.add_function(wrap_pyfunction!(paper_like, m)?)?;
    m.add_function(wrap_pyfunction!(correlated_reference, m)?)?;
    m.add_function(wrap_pyfunction!(wht_inverse, m)?)?;
    m.add_function(wrap_pyfunction!(project_simplex, m)?)?;
    m.add_function(wrap_pyfunction!(xor_convolve, m)?)?;
    m.add_function(wrap_pyfunction!(locally_average, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_and_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(fit_model, m)?)?;
    m.add_function(wrap_pyfunction!(jsd, m)?)?;
    m.add_function(wrap_pyfunction!(cov_diff_norm, m)?)?;
    m.add_function(wrap_pyfunction!(conditional_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(blanket_search, m)?)?;
    m.add_function(wrap_pyfunction!(interpolate, m)?)?;
    m.add_function(wrap_pyfunction!(t_for_average_rate, m)?)?;
    m.add_function(wrap_pyfunction!(logical_error_rate, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
