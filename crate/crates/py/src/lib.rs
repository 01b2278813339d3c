//! Python bindings: kernels, Lorentz maps and the sphere integrals.
//!
//! Reports come back as plain dicts with the same keys as the command-line JSON.

use ::hyperkernel::isometry::{classify_detailed, default_base, make_translation};
use ::hyperkernel::kernels::{self, BasepointPolicy, TOL_KERNEL};
use ::hyperkernel::minkowski::{HyperbolicPoint, ModelTag};
use ::hyperkernel::quadrature;
use ::hyperkernel::representation::self_representation_orbit;
use ::hyperkernel::{Error, KernelMatrix};
use nalgebra::DMatrix;
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(hyperkernel, NotAKernelError, PyValueError, "The matrix is not a kernel of hyperbolic type.");

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::NotAKernel { .. } => NotAKernelError::new_err(e.to_string()),
        Error::Usage(_) | Error::InvalidInput(_) | Error::Geometry(_) | Error::NotAnAutomorphism { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn to_matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn first_model_point(coords: &[f64]) -> PyResult<HyperbolicPoint> {
    let k = coords.len().saturating_sub(1);
    HyperbolicPoint::from_slice(ModelTag::First { k }, coords).map_err(to_py_err)
}

/// Symmetric matrix with unit diagonal and labelled rows.
#[pyclass(name = "Kernel", module = "hyperkernel", skip_from_py_object)]
#[derive(Clone)]
struct PyKernel {
    inner: KernelMatrix,
}

#[pymethods]
impl PyKernel {
    #[new]
    #[pyo3(signature = (matrix, labels=None))]
    fn new(matrix: Vec<Vec<f64>>, labels: Option<Vec<String>>) -> PyResult<Self> {
        let m = to_matrix(&matrix)?;
        let inner = match labels {
            Some(l) => KernelMatrix::new(l, m),
            None => KernelMatrix::unlabeled(m),
        }
        .map_err(to_py_err)?;
        Ok(Self { inner })
    }

    /// `β(x, y) = −B(x, y)` for points of the first hyperboloid model `(x₀, x₁, …, x_k)`.
    #[staticmethod]
    fn from_points(points: Vec<Vec<f64>>) -> PyResult<Self> {
        let pts = points.iter().map(|p| first_model_point(p)).collect::<PyResult<Vec<_>>>()?;
        let inner = kernels::kernel_from_points(&pts).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    /// `1 + ½‖u_i − u_j‖²` for Euclidean points: always a kernel.
    #[staticmethod]
    fn from_euclidean(points: Vec<Vec<f64>>) -> PyResult<Self> {
        let psi = kernels::CndKernel::from_euclidean(&points).map_err(to_py_err)?;
        let inner = kernels::cnd_to_kht(&psi).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels().to_vec()
    }

    fn matrix(&self) -> Vec<Vec<f64>> {
        rows(self.inner.entries())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Kernel(n={})", self.inner.len())
    }

    #[pyo3(signature = (tol=TOL_KERNEL, basepoint=0, all_basepoints=false))]
    fn validate<'py>(
        &self,
        py: Python<'py>,
        tol: f64,
        basepoint: usize,
        all_basepoints: bool,
    ) -> PyResult<Bound<'py, PyAny>> {
        let policy = if all_basepoints {
            BasepointPolicy::AllBasepoints
        } else {
            BasepointPolicy::OneBasepoint(basepoint)
        };
        let report = kernels::validate_kht(&self.inner, policy, tol).map_err(to_py_err)?;
        to_dict(py, &report)
    }

    /// Entrywise power `β^t`.
    fn power(&self, t: f64) -> PyResult<Self> {
        let inner = kernels::power_kernel(&self.inner, t).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    /// Points of `H^r` realising the kernel, as a dict with `points`, `rank` and `residual`.
    #[pyo3(signature = (basepoint=0, tol=TOL_KERNEL))]
    fn embed<'py>(&self, py: Python<'py>, basepoint: usize, tol: f64) -> PyResult<Bound<'py, PyAny>> {
        let e = kernels::gns_embed(&self.inner, basepoint, tol).map_err(to_py_err)?;
        to_dict(py, &::hyperkernel::io::EmbeddingFile::from(&e))
    }

    /// Whether `β − 1` is conditionally negative, i.e. the points lie on one horosphere.
    #[pyo3(signature = (tol=TOL_KERNEL))]
    fn on_horosphere(&self, tol: f64) -> PyResult<bool> {
        Ok(kernels::kht_to_cnd(&self.inner, tol).map_err(to_py_err)?.horosphere_flag)
    }
}

/// Linear map preserving the hyperboloid of the first model.
#[pyclass(name = "LorentzMap", module = "hyperkernel", skip_from_py_object)]
#[derive(Clone)]
struct PyLorentzMap {
    inner: ::hyperkernel::LorentzMap,
}

#[pymethods]
impl PyLorentzMap {
    #[new]
    fn new(matrix: Vec<Vec<f64>>) -> PyResult<Self> {
        let m = to_matrix(&matrix)?;
        let k = m.nrows().saturating_sub(1);
        let inner = ::hyperkernel::LorentzMap::new(ModelTag::First { k }, m).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    /// Translation of `length` along the first axis of `H^k`.
    #[staticmethod]
    #[pyo3(signature = (length, k=2))]
    fn translation(length: f64, k: usize) -> PyResult<Self> {
        let model = ModelTag::First { k };
        let o = HyperbolicPoint::reference(model);
        let mut c = vec![0.0; k + 1];
        c[0] = 1f64.cosh();
        c[1] = 1f64.sinh();
        let dir = HyperbolicPoint::from_slice(model, &c).map_err(to_py_err)?;
        let inner = make_translation(&o, &dir, length).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    /// Rotation `1 ⊕ A` for an orthogonal `A`.
    #[staticmethod]
    fn rotation(spatial: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = ::hyperkernel::LorentzMap::rotation(&to_matrix(&spatial)?).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    fn matrix(&self) -> Vec<Vec<f64>> {
        rows(self.inner.matrix())
    }

    fn compose(&self, other: PyRef<'_, Self>) -> PyResult<Self> {
        let inner = self.inner.compose(&other.inner).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    fn inverse(&self) -> Self {
        Self {
            inner: self.inner.inverse(),
        }
    }

    fn apply(&self, point: Vec<f64>) -> PyResult<Vec<f64>> {
        let p = first_model_point(&point)?;
        let q = self.inner.apply(&p).map_err(to_py_err)?;
        Ok(q.coords().iter().copied().collect())
    }

    fn drift(&self) -> f64 {
        self.inner.drift()
    }

    #[pyo3(signature = (horizon=64, base=None))]
    fn classify<'py>(
        &self,
        py: Python<'py>,
        horizon: usize,
        base: Option<Vec<f64>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let p = match base {
            Some(c) => first_model_point(&c)?,
            None => default_base(self.inner.model()),
        };
        let report = classify_detailed(&self.inner, &p, horizon).map_err(to_py_err)?;
        to_dict(py, &report)
    }

    /// Embeds the orbit kernel raised to `t` and reads off the induced translation length.
    #[pyo3(signature = (base, t, horizon=64))]
    fn orbit_experiment<'py>(
        &self,
        py: Python<'py>,
        base: Vec<f64>,
        t: f64,
        horizon: usize,
    ) -> PyResult<Bound<'py, PyAny>> {
        let p = first_model_point(&base)?;
        let e = self_representation_orbit(&self.inner, &p, t, horizon).map_err(to_py_err)?;
        to_dict(py, &e.report())
    }

    fn __repr__(&self) -> String {
        format!("LorentzMap(dim={})", self.inner.matrix().nrows())
    }
}

/// `∫ (cosh u − x sinh u)^t dμ_n(x)` after the change of variables.
#[pyfunction]
fn beta_n(u: f64, t: f64, n: usize) -> PyResult<f64> {
    quadrature::beta_n_post(u, t, n).map_err(to_py_err)
}

/// The same integral before the change of variables.
#[pyfunction]
fn beta_n_pre(u: f64, t: f64, n: usize) -> PyResult<f64> {
    quadrature::beta_n_pre(u, t, n).map_err(to_py_err)
}

#[pyfunction]
fn cosh_power(u: f64, t: f64) -> f64 {
    quadrature::cosh_power(u, t)
}

/// `arcosh(cosh^t u) − t u`.
#[pyfunction]
fn snowflake_gap(u: f64, t: f64) -> PyResult<f64> {
    quadrature::snowflake_gap(u, t).map_err(to_py_err)
}

#[pyfunction]
fn convergence_table<'py>(py: Python<'py>, u: f64, t: f64, ns: Vec<usize>) -> PyResult<Bound<'py, PyAny>> {
    let table = quadrature::convergence_table(u, t, &ns).map_err(to_py_err)?;
    to_dict(py, &table)
}

#[pyfunction]
fn bounds_check<'py>(py: Python<'py>, u: f64, t: f64, n: usize) -> PyResult<Bound<'py, PyAny>> {
    let report = quadrature::bounds_check(u, t, n).map_err(to_py_err)?;
    to_dict(py, &report)
}

/// Seeded search over four points of `H²` for a kernel whose power `t` is not a kernel.
#[pyfunction]
#[pyo3(signature = (t, seed=quadrature::MONTE_CARLO_SEED, max_trials=100_000))]
fn search_power_counterexample(t: f64, seed: u64, max_trials: usize) -> PyResult<Option<PyKernel>> {
    let found = kernels::search_power_counterexample(4, 2, t, seed, -1e-6, max_trials).map_err(to_py_err)?;
    Ok(found.map(|c| PyKernel { inner: c.kernel }))
}

#[pymodule(name = "hyperkernel")]
fn py_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKernel>()?;
    m.add_class::<PyLorentzMap>()?;
    m.add("NotAKernelError", m.py().get_type::<NotAKernelError>())?;
    m.add_function(wrap_pyfunction!(beta_n, m)?)?;
    m.add_function(wrap_pyfunction!(beta_n_pre, m)?)?;
    m.add_function(wrap_pyfunction!(cosh_power, m)?)?;
    m.add_function(wrap_pyfunction!(snowflake_gap, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_table, m)?)?;
    m.add_function(wrap_pyfunction!(bounds_check, m)?)?;
    m.add_function(wrap_pyfunction!(search_power_counterexample, m)?)?;
    Ok(())
}
