//! Python bindings: functions, datasets, fitted models, bounds and the sweep runner.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use cubetrees::bounds::{self, BoundReport};
use cubetrees::erm::{fit_erm, ErmParams};
use cubetrees::fourier::{self, Subset};
use cubetrees::greedy::{fit_cart, fit_forest, fit_random_tree, CartParams, ForestParams, TieBreak};
use cubetrees::harness::{self, ExperimentConfig, Suite, ValidationParams};
use cubetrees::{Error, NoiseModel, Point};

fn py_err(e: Error) -> PyErr {
    match e.root() {
        Error::Config(_) | Error::Parse(_) | Error::InvalidArgs(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn point(coords: Vec<i8>) -> PyResult<Point> {
    Point::new(&coords).map_err(py_err)
}

fn tie_break(name: &str) -> PyResult<TieBreak> {
    match name {
        "lowest_index" => Ok(TieBreak::LowestIndex),
        "random" => Ok(TieBreak::Random),
        other => Err(PyValueError::new_err(format!("unknown tie_break {other:?}"))),
    }
}

fn noise(sigma: f64) -> PyResult<NoiseModel> {
    if sigma == 0.0 {
        Ok(NoiseModel::None)
    } else {
        NoiseModel::gaussian(sigma).map_err(py_err)
    }
}

/// Sparse Fourier expansion on {-1,+1}^d.
#[pyclass(name = "SparseFourier", frozen)]
struct PySparseFourier(fourier::SparseFourier);

#[pymethods]
impl PySparseFourier {
    /// Parse a function such as `"x1*x2 + 0.02*x1"` in dimension `d`.
    #[new]
    fn new(text: &str, d: usize) -> PyResult<Self> {
        fourier::SparseFourier::parse(text, d).map(Self).map_err(py_err)
    }

    /// Build from `[(features, coefficient), ...]` with 1-based features.
    #[staticmethod]
    fn from_terms(d: usize, terms: Vec<(Vec<usize>, f64)>) -> PyResult<Self> {
        let terms = terms
            .into_iter()
            .map(|(s, a)| Subset::from_features(&s).map(|s| (s, a)))
            .collect::<cubetrees::Result<Vec<_>>>()
            .map_err(py_err)?;
        fourier::SparseFourier::new(d, terms).map(Self).map_err(py_err)
    }

    /// Fourier expansion of a truth table of length 2^s.
    #[staticmethod]
    fn from_table(table: Vec<f64>) -> PyResult<Self> {
        fourier::wht(&table).map(Self).map_err(py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn terms(&self) -> Vec<(Vec<usize>, f64)> {
        self.0.terms().iter().map(|(s, a)| (s.features(), *a)).collect()
    }

    fn coefficient(&self, features: Vec<usize>) -> PyResult<f64> {
        Ok(self.0.coefficient(Subset::from_features(&features).map_err(py_err)?))
    }

    fn variance(&self) -> f64 {
        self.0.variance()
    }

    fn sup_norm(&self) -> f64 {
        self.0.sup_norm()
    }

    fn support(&self) -> Vec<usize> {
        self.0.support().features()
    }

    fn sparsity(&self) -> usize {
        self.0.sparsity()
    }

    fn eval(&self, x: Vec<i8>) -> PyResult<f64> {
        self.0.eval(&point(x)?).map_err(py_err)
    }

    /// Restriction to the cell given by `[(feature, sign), ...]`.
    fn restrict(&self, constraints: Vec<(usize, i8)>) -> PyResult<Self> {
        let cell = cubetrees::Cell::from_constraints(self.0.dim(), &constraints).map_err(py_err)?;
        self.0.restrict(&cell).map(Self).map_err(py_err)
    }

    fn hash(&self) -> String {
        self.0.hash()
    }

    fn is_msp(&self) -> bool {
        fourier::msp_closure(&self.0).is_msp
    }

    /// Union of the vertices reachable from the empty set.
    fn msp_support(&self) -> Vec<usize> {
        fourier::msp_closure(&self.0).covered.features()
    }

    /// Smallest feature set whose coordinates unlock the unreached vertices.
    fn min_traversal(&self) -> PyResult<Vec<usize>> {
        let c = fourier::msp_closure(&self.0);
        let t = fourier::min_traversal(&c.unreached, c.covered).map_err(py_err)?;
        Ok(t.features.features())
    }

    fn is_smsp(&self) -> PyResult<bool> {
        fourier::is_smsp(&self.0).map_err(py_err)
    }

    fn sid_lambda(&self) -> PyResult<f64> {
        fourier::sid_lambda(&self.0).map_err(py_err)
    }

    fn smsp_lambda(&self) -> PyResult<f64> {
        fourier::smsp_lambda(&self.0).map_err(py_err)
    }

    fn __str__(&self) -> String {
        self.0.to_text()
    }

    fn __repr__(&self) -> String {
        format!("SparseFourier({:?}, d={})", self.0.to_text(), self.0.dim())
    }
}

/// Samples with covariates in {-1,+1}^d.
#[pyclass(name = "Dataset", frozen)]
struct PyDataset(cubetrees::Dataset);

#[pymethods]
impl PyDataset {
    /// Rows are lists of ±1 coordinates.
    #[new]
    fn new(rows: Vec<Vec<i8>>, y: Vec<f64>) -> PyResult<Self> {
        let points = rows.into_iter().map(point).collect::<PyResult<Vec<_>>>()?;
        cubetrees::Dataset::from_points(&points, y).map(Self).map_err(py_err)
    }

    /// Uniform covariates, `Y = f(X) + N(0, sigma^2)`.
    #[staticmethod]
    #[pyo3(signature = (f, n, sigma = 0.0, seed = 0))]
    fn sample(f: &PySparseFourier, n: usize, sigma: f64, seed: u64) -> PyResult<Self> {
        cubetrees::sample_dataset(&f.0, f.0.dim(), n, noise(sigma)?, seed)
            .map(Self)
            .map_err(py_err)
    }

    #[getter]
    fn d(&self) -> usize {
        self.0.d()
    }

    fn __len__(&self) -> usize {
        self.0.n()
    }

    fn rows(&self) -> Vec<Vec<i8>> {
        (0..self.0.n()).map(|i| self.0.point(i).coords()).collect()
    }

    fn responses(&self) -> Vec<f64> {
        self.0.responses().to_vec()
    }
}

/// A fitted tree or forest.
#[pyclass(name = "Model", frozen)]
struct PyModel(cubetrees::Model);

#[pymethods]
impl PyModel {
    fn predict(&self, x: Vec<i8>) -> PyResult<f64> {
        self.0.predict(&point(x)?).map_err(py_err)
    }

    /// `E(f(X) - model(X))^2`; exact where feasible, Monte Carlo otherwise.
    #[pyo3(signature = (f, seed = 0))]
    fn risk(&self, f: &PySparseFourier, seed: u64) -> PyResult<f64> {
        self.0.risk_report(&f.0, seed).map(|r| r.risk).map_err(py_err)
    }

    fn mean_depth(&self) -> f64 {
        self.0.mean_depth()
    }

    fn node_count(&self) -> usize {
        self.0.node_count()
    }

    /// Probability that feature `k` lies on the query path of a uniform point.
    fn coverage(&self, k: usize) -> PyResult<f64> {
        self.0.coverage(k).map_err(py_err)
    }

    fn selection_probability(&self, features: Vec<usize>) -> PyResult<f64> {
        Ok(self
            .0
            .selection_probability(Subset::from_features(&features).map_err(py_err)?))
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }
}

#[pyfunction]
#[pyo3(signature = (data, gamma = 0.0, max_depth = None, tie_break = "lowest_index", mtry = None, seed = 0))]
fn cart(
    data: &PyDataset,
    gamma: f64,
    max_depth: Option<usize>,
    tie_break: &str,
    mtry: Option<usize>,
    seed: u64,
) -> PyResult<PyModel> {
    let params = CartParams {
        gamma,
        max_depth,
        tie_break: self::tie_break(tie_break)?,
        mtry,
        ..CartParams::default()
    };
    fit_cart(&data.0, &params, seed)
        .map(|t| PyModel(cubetrees::Model::Tree(t)))
        .map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (data, trees = 100, mtry = None, gamma = 0.0, bootstrap = true, seed = 0))]
fn forest(
    data: &PyDataset,
    trees: usize,
    mtry: Option<usize>,
    gamma: f64,
    bootstrap: bool,
    seed: u64,
) -> PyResult<PyModel> {
    let params = ForestParams {
        trees,
        bootstrap,
        mtry,
        cart: CartParams {
            gamma,
            ..CartParams::default()
        },
        seed,
    };
    fit_forest(&data.0, &params)
        .map(|f| PyModel(cubetrees::Model::Forest(f)))
        .map_err(py_err)
}

/// Exact empirical-risk minimizer over trees of the given depth.
/// Returns `(model, empirical_risk)`.
#[pyfunction]
#[pyo3(signature = (data, depth = 2, clip = 1e9))]
fn erm(data: &PyDataset, depth: usize, clip: f64) -> PyResult<(PyModel, f64)> {
    let fit = fit_erm(&data.0, &ErmParams::new(depth, clip)).map_err(py_err)?;
    Ok((PyModel(cubetrees::Model::Tree(fit.tree)), fit.empirical_risk))
}

#[pyfunction]
#[pyo3(signature = (data, depth, seed = 0))]
fn random_tree(data: &PyDataset, depth: usize, seed: u64) -> PyResult<PyModel> {
    fit_random_tree(&data.0, depth, seed)
        .map(|t| PyModel(cubetrees::Model::Tree(t)))
        .map_err(py_err)
}

fn report(r: cubetrees::Result<BoundReport>) -> PyResult<String> {
    r.map(|r| r.to_json()).map_err(py_err)
}

/// Bound reports are returned as JSON strings.
#[pyfunction]
#[pyo3(signature = (d, n, m = None))]
fn xor_bound(d: usize, n: f64, m: Option<f64>) -> PyResult<String> {
    report(bounds::xor_bound(d, n, m))
}

#[pyfunction]
#[pyo3(signature = (f, n, m = None))]
fn nonmsp_bound(f: &PySparseFourier, n: f64, m: Option<f64>) -> PyResult<String> {
    report(bounds::nonmsp_bound(&f.0, f.0.dim(), n, m))
}

/// `cut` is a list of vertices, each a list of features.
#[pyfunction]
#[pyo3(signature = (f, n, sigma, cut = None))]
fn robust_bound(f: &PySparseFourier, n: f64, sigma: f64, cut: Option<Vec<Vec<usize>>>) -> PyResult<String> {
    match cut {
        None => report(bounds::best_robust_bound(&f.0, f.0.dim(), n, sigma)),
        Some(cut) => {
            let cut = cut
                .iter()
                .map(|c| Subset::from_features(c))
                .collect::<cubetrees::Result<Vec<_>>>()
                .map_err(py_err)?;
            report(bounds::robust_bound(&f.0, &cut, f.0.dim(), n, sigma))
        }
    }
}

#[pyfunction]
#[pyo3(signature = (f, n, m = None))]
fn nonadaptive_bound(f: &PySparseFourier, n: f64, m: Option<f64>) -> PyResult<String> {
    report(bounds::nonadaptive_bound(&f.0, f.0.dim(), n, m))
}

/// Returns `(tau, window)` with `window` either `None` or `(lo, hi)`.
#[pyfunction]
fn gamma_window(
    f_inf_norm: f64,
    sigma: f64,
    s: usize,
    d: usize,
    n: f64,
    lam: f64,
) -> PyResult<(f64, Option<(f64, f64)>)> {
    let w = bounds::gamma_window(f_inf_norm, sigma, s, d, n, lam).map_err(py_err)?;
    Ok((w.tau, w.window))
}

/// Runs a TOML experiment config and returns the sweep CSV text.
#[pyfunction]
#[pyo3(signature = (config_toml, jobs = 0))]
fn run_sweep(py: Python<'_>, config_toml: &str, jobs: usize) -> PyResult<String> {
    let cfg = ExperimentConfig::from_toml(config_toml).map_err(py_err)?;
    py.detach(|| harness::run_sweep(&cfg, jobs)).map_err(py_err)
}

/// Returns `(statistic, se, bound, passed)` at the suite's default parameters.
#[pyfunction]
#[pyo3(signature = (suite, runs = None, seed = 0))]
fn validate(py: Python<'_>, suite: &str, runs: Option<usize>, seed: u64) -> PyResult<(f64, f64, f64, bool)> {
    let suite: Suite = suite.parse().map_err(py_err)?;
    let mut params = ValidationParams::defaults(suite);
    params.runs = runs.unwrap_or(params.runs);
    params.seed = seed;
    let r = py.detach(|| harness::run_validation(suite, &params)).map_err(py_err)?;
    Ok((r.statistic, r.se, r.bound, r.pass))
}

#[pymodule]
fn pycubetrees(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySparseFourier>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(cart, m)?)?;
    m.add_function(wrap_pyfunction!(forest, m)?)?;
    m.add_function(wrap_pyfunction!(erm, m)?)?;
    m.add_function(wrap_pyfunction!(random_tree, m)?)?;
    m.add_function(wrap_pyfunction!(xor_bound, m)?)?;
    m.add_function(wrap_pyfunction!(nonmsp_bound, m)?)?;
    m.add_function(wrap_pyfunction!(robust_bound, m)?)?;
    m.add_function(wrap_pyfunction!(nonadaptive_bound, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_window, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    Ok(())
}
