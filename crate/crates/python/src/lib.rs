//! Python module `isovol`.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use isovol::crofton::{self as cr, BodyKind, CountableBody, McOptions};
use isovol::hamflow::{self as hf, FlowConfig, Hamiltonian};
use isovol::polynomial::{BinaryForm, ImplicitRealLocus};
use isovol::projective::{CVec, ProjPoint, C64};
use isovol::submanifolds as sm;
use isovol::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidInput(_)
        | Error::DimensionMismatch { .. }
        | Error::Unsupported(_)
        | Error::ParameterMismatch { .. }
        | Error::Json(_)
        | Error::ZeroForm
        | Error::NotUnit(_)
        | Error::NotHorizontal(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for isovol::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn locus(json: &str) -> PyResult<ImplicitRealLocus> {
    ImplicitRealLocus::from_json(json).py()
}

/// Unitary matrix acting on C^{n+1}.
#[pyclass(module = "isovol", frozen)]
struct GroupElement(isovol::GroupElement);

#[pymethods]
impl GroupElement {
    /// Haar-random element of U(n+1), reproducible from (seed, index).
    #[staticmethod]
    fn sample_unitary(dim: usize, seed: u64, index: u64) -> PyResult<Self> {
        Ok(Self(isovol::sample_unitary(dim, seed, index).py()?))
    }

    #[staticmethod]
    fn identity(dim: usize) -> Self {
        Self(isovol::GroupElement::identity(dim))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    /// Row-major entries.
    fn matrix(&self) -> Vec<Vec<C64>> {
        let m = self.0.matrix();
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
    }

    fn apply(&self, v: Vec<C64>) -> PyResult<Vec<C64>> {
        let v = CVec::new(v).py()?;
        if v.len() != self.0.dim() {
            return Err(PyValueError::new_err(format!("expected {} entries, got {}", self.0.dim(), v.len())));
        }
        Ok(self.0.apply(&v).into_inner())
    }

    fn compose(&self, other: &GroupElement) -> Self {
        Self(self.0.compose(&other.0))
    }

    fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    fn determinant(&self) -> C64 {
        self.0.determinant()
    }

    fn unitarity_defect(&self) -> f64 {
        self.0.unitarity_defect()
    }

    fn __repr__(&self) -> String {
        format!("GroupElement(dim={})", self.0.dim())
    }
}

/// Hamiltonian function family with an optional time schedule.
#[pyclass(module = "isovol", frozen, skip_from_py_object)]
#[derive(Clone)]
struct HamiltonianSpec(hf::HamiltonianSpec);

#[pymethods]
impl HamiltonianSpec {
    #[staticmethod]
    fn constant(c: f64) -> Self {
        Self(hf::HamiltonianSpec::constant(c))
    }

    #[staticmethod]
    #[pyo3(signature = (re, im=None))]
    fn hermitian(re: Vec<Vec<f64>>, im: Option<Vec<Vec<f64>>>) -> Self {
        Self(hf::HamiltonianSpec::hermitian(re, im))
    }

    /// `Re(z^a conj(z)^b) / |z|^{2d}`.
    #[staticmethod]
    fn monomial_re(a: Vec<u32>, b: Vec<u32>) -> Self {
        Self(hf::HamiltonianSpec::monomial_re(a, b))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self(hf::HamiltonianSpec::from_json(text).py()?))
    }

    /// One of `builtin_names()`.
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        hf::builtin_nonlinear_specs()
            .into_iter()
            .find(|(n, _)| *n == name)
            .map(|(_, s)| Self(s))
            .ok_or_else(|| PyValueError::new_err(format!("unknown built-in `{name}`")))
    }

    #[staticmethod]
    fn builtin_names() -> Vec<&'static str> {
        hf::builtin_nonlinear_specs().into_iter().map(|(n, _)| n).collect()
    }

    /// Piecewise-linear `s(t)` through `(t, s)` knots.
    fn with_schedule(&self, knots: Vec<(f64, f64)>) -> Self {
        Self(self.0.clone().with_schedule(knots))
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    /// Value of the Hamiltonian at a point of S^{2n+1}.
    #[pyo3(signature = (x, t=0.0))]
    fn value(&self, x: Vec<C64>, t: f64) -> PyResult<f64> {
        let x = CVec::new(x).py()?;
        let h = Hamiltonian::new(&self.0, x.len() - 1).py()?;
        Ok(h.value(&x, t))
    }

    fn __repr__(&self) -> String {
        format!("HamiltonianSpec({})", self.0.to_json())
    }
}

#[pyclass(module = "isovol", frozen)]
struct CroftonEstimate {
    #[pyo3(get)]
    m: usize,
    #[pyo3(get)]
    n: usize,
    #[pyo3(get)]
    body: String,
    #[pyo3(get)]
    seed: u64,
    #[pyo3(get)]
    n_samples: usize,
    #[pyo3(get)]
    mean_count: f64,
    #[pyo3(get)]
    stderr: f64,
    #[pyo3(get)]
    degenerate_fraction: f64,
    /// Count → number of transversal samples.
    #[pyo3(get)]
    histogram: BTreeMap<usize, u64>,
    #[pyo3(get)]
    warning: Option<String>,
    inner: cr::CroftonEstimate,
}

#[pymethods]
impl CroftonEstimate {
    /// `(value, low, high)` of the implied volume, with a ±3 standard-error band.
    fn volume(&self) -> PyResult<(f64, f64, f64)> {
        let v = cr::crofton_volume(&self.inner, self.m, self.n).py()?;
        Ok((v.value, v.low, v.high))
    }

    /// `(holds, margin_sigmas, reference_volume)`.
    fn minimization(&self) -> PyResult<(bool, f64, f64)> {
        let r = cr::verify_minimization_inequality(&self.inner).py()?;
        Ok((r.holds, r.margin_sigmas, r.reference_volume))
    }

    fn __repr__(&self) -> String {
        format!(
            "CroftonEstimate(body={}, m={}, n={}, mean_count={}, stderr={})",
            self.body, self.m, self.n, self.mean_count, self.stderr
        )
    }
}

impl From<cr::CroftonEstimate> for CroftonEstimate {
    fn from(e: cr::CroftonEstimate) -> Self {
        Self {
            m: e.m,
            n: e.n,
            body: e.body.clone(),
            seed: e.seed,
            n_samples: e.n_samples,
            mean_count: e.mean_count,
            stderr: e.stderr,
            degenerate_fraction: e.degenerate_fraction,
            histogram: e.histogram.clone(),
            warning: e.warning.clone(),
            inner: e,
        }
    }
}

#[pyclass(module = "isovol", frozen, get_all)]
struct SigmaEstimate {
    m: usize,
    n: usize,
    seed: u64,
    n_samples: usize,
    n_planes: usize,
    mean_wedge: f64,
    stderr: f64,
    plane_choice_spread: f64,
    plane_means: Vec<f64>,
    kappa: f64,
}

#[pymethods]
impl SigmaEstimate {
    fn __repr__(&self) -> String {
        format!(
            "SigmaEstimate(m={}, n={}, mean_wedge={}, spread={})",
            self.m, self.n, self.mean_wedge, self.plane_choice_spread
        )
    }
}

/// Monitors of a flow at each checkpoint.
#[pyclass(module = "isovol", frozen, get_all)]
struct FlowRun {
    times: Vec<f64>,
    sphere_volumes: Vec<f64>,
    projected_volumes: Vec<f64>,
    horizontality_defects: Vec<f64>,
    truncation: Vec<f64>,
    norm_drift: Vec<f64>,
    reference_volume: f64,
    min_projected_volume: f64,
    minimization_holds: bool,
    suspension_relative_errors: Vec<f64>,
}

#[pymethods]
impl FlowRun {
    fn __repr__(&self) -> String {
        format!(
            "FlowRun(checkpoints={}, min_projected_volume={}, holds={})",
            self.times.len(),
            self.min_projected_volume,
            self.minimization_holds
        )
    }
}

/// Fubini–Study distance between the lines through `p` and `q`.
#[pyfunction]
fn fs_distance(p: Vec<C64>, q: Vec<C64>) -> PyResult<f64> {
    let p = ProjPoint::new(CVec::new(p).py()?).py()?;
    let q = ProjPoint::new(CVec::new(q).py()?).py()?;
    isovol::projective::fs_distance(&p, &q).py()
}

/// Closed-form volume of `sphere`, `rp` or `cp` of dimension `k`.
#[pyfunction]
fn closed_form_volume(kind: &str, k: usize) -> PyResult<f64> {
    let kind = match kind {
        "sphere" => BodyKind::Sphere,
        "rp" => BodyKind::Rp,
        "cp" => BodyKind::Cp,
        other => return Err(PyValueError::new_err(format!("unknown kind `{other}`"))),
    };
    cr::closed_form_volumes(kind, k).py()
}

/// Quadrature volume `(value, error)` of `rp`, `cp`, `sphere`, `clifford` or a
/// real algebraic `locus` given as polynomial JSON.
#[pyfunction]
#[pyo3(signature = (body, k=0, n=0, locus_json=None, grid=48))]
fn volume(py: Python<'_>, body: &str, k: usize, n: usize, locus_json: Option<&str>, grid: usize) -> PyResult<(f64, f64)> {
    let parsed = locus_json.map(locus).transpose()?;
    let body = body.to_string();
    let v = py
        .detach(move || match body.as_str() {
            "rp" => sm::geodesic_rp(k, n)?.volume(),
            "cp" => sm::coordinate_cp(k, n)?.volume(),
            "sphere" => sm::round_sphere(k, n)?.volume(),
            "clifford" => sm::clifford_torus(n)?.volume(),
            "locus" => match &parsed {
                Some(l) => sm::real_locus_charts(l, grid)?.volume(),
                None => Err(Error::InvalidInput("body `locus` needs locus_json".into())),
            },
            other => Err(Error::InvalidInput(format!("unknown body `{other}`"))),
        })
        .py()?;
    Ok((v.value, v.error))
}

/// Haar-averaged count of `P ∩ g CP^{n−m}`; `P` is RP^{2m} or a hypersurface locus.
#[pyfunction]
#[pyo3(signature = (m, n, n_samples, seed, locus_json=None, special_unitary=false))]
fn mc_expected_count(
    py: Python<'_>,
    m: usize,
    n: usize,
    n_samples: usize,
    seed: u64,
    locus_json: Option<&str>,
    special_unitary: bool,
) -> PyResult<CroftonEstimate> {
    let body = match locus_json {
        Some(j) => CountableBody::Hypersurface(locus(j)?),
        None => CountableBody::Rp2m,
    };
    let opts = McOptions { special_unitary };
    let est = py
        .detach(|| cr::mc_expected_count_with(&body, m, n, n_samples, seed, opts))
        .py()?;
    Ok(est.into())
}

#[pyfunction]
fn estimate_sigma(py: Python<'_>, m: usize, n: usize, n_samples: usize, n_planes: usize, seed: u64) -> PyResult<SigmaEstimate> {
    let s = py.detach(|| cr::estimate_sigma(m, n, n_samples, n_planes, seed)).py()?;
    Ok(SigmaEstimate {
        m: s.m,
        n: s.n,
        seed: s.seed,
        n_samples: s.n_samples,
        n_planes: s.n_planes,
        mean_wedge: s.mean_wedge,
        stderr: s.stderr,
        plane_choice_spread: s.plane_choice_spread,
        plane_means: s.plane_means,
        kappa: s.kappa,
    })
}

/// Distinct real projective roots of `Σ coeffs[k] s^k t^{d−k}`, as `(count, transversal)`.
#[pyfunction]
fn count_real_roots(coeffs: Vec<f64>) -> PyResult<(usize, bool)> {
    if coeffs.is_empty() {
        return Err(PyValueError::new_err("empty form"));
    }
    let r = isovol::intersect::count_real_projective_roots(&BinaryForm::new(coeffs)).py()?;
    Ok((r.count, r.transversal))
}

#[pyfunction]
fn bezout_bound(locus_json: &str) -> PyResult<u64> {
    Ok(isovol::intersect::bezout_bound(&locus(locus_json)?))
}

/// `(vol(ΣS^k), vol(S^k), ∫_0^π sin^k)` with both volumes by quadrature.
#[pyfunction]
fn suspension_volume(py: Python<'_>, k: usize) -> PyResult<(f64, f64, f64)> {
    py.detach(|| {
        let base = sm::round_sphere(k, k)?;
        let b = base.volume()?.value;
        let s = sm::suspend(&base)?.volume()?.value;
        Ok((s, b, isovol::numeric::wallis_integral(k)))
    })
    .py()
}

/// Flow of the horizontal S^m over RP^m in S^{2n+1} under `spec`.
#[pyfunction]
#[pyo3(signature = (spec, m=1, n=2, t_max=1.0, dt=1e-3, checkpoints=10, mesh_scale=64, theta_res=128))]
#[allow(clippy::too_many_arguments)]
fn integrate_flow(
    py: Python<'_>,
    spec: &HamiltonianSpec,
    m: usize,
    n: usize,
    t_max: f64,
    dt: f64,
    checkpoints: usize,
    mesh_scale: usize,
    theta_res: usize,
) -> PyResult<FlowRun> {
    let spec = spec.0.clone();
    py.detach(move || {
        let body = sm::round_sphere(m, n)?;
        let h = Hamiltonian::new(&spec, n)?;
        let cfg = FlowConfig {
            t_max,
            dt,
            checkpoints,
            mesh_scale,
        };
        let states = hf::integrate_flow(&body, &h, &cfg)?;
        let volumes = hf::volume_along_flow(&states)?;
        let horiz: Vec<_> = states.iter().map(hf::horizontality_monitor).collect();
        let check = hf::check_minimization(&states, m, theta_res)?;
        Ok(FlowRun {
            times: states.iter().map(|s| s.t).collect(),
            sphere_volumes: volumes.iter().map(|v| v.sphere_volume).collect(),
            projected_volumes: volumes.iter().map(|v| v.projected_volume).collect(),
            horizontality_defects: horiz.iter().map(|r| r.defect).collect(),
            truncation: horiz.iter().map(|r| r.truncation).collect(),
            norm_drift: states.iter().map(|s| s.max_step_drift).collect(),
            reference_volume: check.reference_volume,
            min_projected_volume: check.min_projected_volume,
            minimization_holds: check.holds,
            suspension_relative_errors: check.suspension.iter().map(|s| s.relative_error).collect(),
        })
    })
    .py()
}

/// Runs the acceptance suite; returns `(id, title, passed, details)` per criterion.
#[pyfunction]
#[pyo3(signature = (seed=42))]
fn run_selftest(py: Python<'_>, seed: u64) -> Vec<(u8, String, bool, Vec<String>)> {
    let cfg = isovol::selftest::SelftestConfig {
        seed,
        ..Default::default()
    };
    py.detach(|| isovol::selftest::run_all(&cfg))
        .into_iter()
        .map(|r| (r.id, r.title.to_string(), r.passed, r.details))
        .collect()
}

#[pymodule]
#[pyo3(name = "isovol")]
pub fn isovol_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<GroupElement>()?;
    m.add_class::<HamiltonianSpec>()?;
    m.add_class::<CroftonEstimate>()?;
    m.add_class::<SigmaEstimate>()?;
    m.add_class::<FlowRun>()?;
    m.add_function(wrap_pyfunction!(fs_distance, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_volume, m)?)?;
    m.add_function(wrap_pyfunction!(volume, m)?)?;
    m.add_function(wrap_pyfunction!(mc_expected_count, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(count_real_roots, m)?)?;
    m.add_function(wrap_pyfunction!(bezout_bound, m)?)?;
    m.add_function(wrap_pyfunction!(suspension_volume, m)?)?;
    m.add_function(wrap_pyfunction!(integrate_flow, m)?)?;
    m.add_function(wrap_pyfunction!(run_selftest, m)?)?;
    Ok(())
}
