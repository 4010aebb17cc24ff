//! Python bindings. Grids cross the boundary as `Grid` objects; reports come
//! back as plain dicts.

use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;
use twingraph as tg;

create_exception!(
    pytwingraph,
    DomainError,
    PyValueError,
    "Bad geometry, parameters or file format."
);
create_exception!(
    pytwingraph,
    NumericError,
    PyArithmeticError,
    "Numerical precondition or convergence failure."
);

fn err(e: tg::Error) -> PyErr {
    let msg = format!("{}: {e}", e.kind());
    match e.class() {
        tg::ErrorClass::Domain => DomainError::new_err(msg),
        tg::ErrorClass::Numeric => NumericError::new_err(msg),
    }
}

trait OrPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> OrPy<T> for tg::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(err)
    }
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(a) => {
            let items = a.iter().map(|x| to_py(py, x)).collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any()
        }
        Value::Object(m) => {
            let d = PyDict::new(py);
            for (k, x) in m {
                d.set_item(k, to_py(py, x)?)?;
            }
            d.into_any()
        }
    })
}

fn report<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    to_py(
        py,
        &serde_json::to_value(v).map_err(|e| PyValueError::new_err(e.to_string()))?,
    )
}

fn shape(spec: &str, h: f64) -> PyResult<tg::DomainSpec> {
    let bad = || DomainError::new_err(format!("bad shape '{spec}': expected disk:R or rect:a,b"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    match spec.split_once(':') {
        Some(("disk", r)) => tg::DomainSpec::disk(num(r)?, h).py_err(),
        Some(("rect", ab)) => {
            let (a, b) = ab.split_once(',').ok_or_else(bad)?;
            tg::DomainSpec::rect(num(a)?, num(b)?, h).py_err()
        }
        _ => Err(bad()),
    }
}

/// Model space E(κ,τ) (`lorentzian=False`) or L(κ,τ).
#[pyclass(name = "SpaceParams", module = "pytwingraph", frozen, eq, from_py_object)]
#[derive(Clone, Copy, PartialEq)]
struct PySpaceParams(tg::SpaceParams);

#[pymethods]
impl PySpaceParams {
    #[new]
    #[pyo3(signature = (kappa, bundle, lorentzian = false))]
    fn new(kappa: f64, bundle: f64, lorentzian: bool) -> Self {
        let causal = if lorentzian {
            tg::Causal::Lorentzian
        } else {
            tg::Causal::Riemannian
        };
        Self(tg::SpaceParams::new(kappa, bundle, causal))
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.0.kappa
    }

    #[getter]
    fn bundle(&self) -> f64 {
        self.0.bundle
    }

    #[getter]
    fn lorentzian(&self) -> bool {
        self.0.causal == tg::Causal::Lorentzian
    }

    fn discriminant(&self) -> f64 {
        self.0.discriminant()
    }

    /// Twin space for a source of mean curvature `h`.
    fn dual(&self, h: f64) -> Self {
        Self(self.0.dual(h))
    }

    fn __repr__(&self) -> String {
        let name = if self.lorentzian() { "L" } else { "E" };
        format!("SpaceParams({name}({}, {}))", self.0.kappa, self.0.bundle)
    }
}

/// A graph on a masked grid together with its ambient space.
#[pyclass(name = "Grid", module = "pytwingraph", skip_from_py_object)]
#[derive(Clone)]
struct PyGrid(tg::GridFile);

#[pymethods]
impl PyGrid {
    /// Row-major values, `NaN` on masked nodes.
    #[new]
    #[pyo3(signature = (x0, y0, h, nx, ny, values, params, h_expected = None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        x0: f64,
        y0: f64,
        h: f64,
        nx: usize,
        ny: usize,
        values: Vec<f64>,
        params: PySpaceParams,
        h_expected: Option<f64>,
    ) -> PyResult<Self> {
        let mask = values.iter().map(|v| !v.is_nan()).collect();
        let dom = tg::DomainSpec::new(x0, y0, h, nx, ny)
            .py_err()?
            .with_mask(mask)
            .py_err()?;
        let field = tg::ScalarField::new(dom, values).py_err()?;
        Ok(Self(tg::GridFile::new(field, params.0, h_expected)))
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        tg::GridFile::read(path).py_err().map(Self)
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        tg::GridFile::parse(text).py_err().map(Self)
    }

    /// Catalog surface `name` with parameter `H` on `shape` (`disk:R`,
    /// `rect:a,b`) at spacing `h`.
    #[staticmethod]
    #[pyo3(signature = (name, H = 1.0, shape = "disk:0.8", h = 0.02))]
    #[allow(non_snake_case)]
    fn example(name: &str, H: f64, shape: &str, h: f64) -> PyResult<Self> {
        let e: tg::Example = name.parse().py_err()?;
        let s = tg::generate(e, H, &self::shape(shape, h)?).py_err()?;
        Ok(Self(tg::GridFile::new(s.field, s.params, Some(s.mean_curvature))))
    }

    fn to_text(&self) -> String {
        self.0.to_text()
    }

    fn write(&self, path: &str) -> PyResult<()> {
        self.0.write(path).py_err()
    }

    fn write_obj(&self, path: &str) -> PyResult<()> {
        let mut buf = Vec::new();
        tg::write_obj(&self.0.field, &mut buf).py_err()?;
        std::fs::write(path, buf).map_err(|e| err(e.into()))
    }

    #[getter]
    fn params(&self) -> PySpaceParams {
        PySpaceParams(self.0.params)
    }

    #[getter]
    fn h_expected(&self) -> Option<f64> {
        self.0.h_expected
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        let d = self.0.field.domain();
        (d.ny, d.nx)
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.0.field.domain().h
    }

    #[getter]
    fn origin(&self) -> (f64, f64) {
        let d = self.0.field.domain();
        (d.x0, d.y0)
    }

    fn values(&self) -> Vec<f64> {
        self.0.field.values().to_vec()
    }

    fn active_count(&self) -> usize {
        self.0.field.domain().active_count()
    }

    /// Value at node `(i, j)`, or `None` when masked.
    fn at(&self, i: isize, j: isize) -> Option<f64> {
        self.0.field.get(i, j)
    }

    /// Mean curvature field on interior nodes.
    fn mean_curvature(&self) -> PyResult<Self> {
        let hf = tg::mean_curvature(&self.0.field, &self.0.params).py_err()?;
        Ok(Self(tg::GridFile::new(hf, self.0.params, None)))
    }

    /// `max |self − other − c|` over common nodes with the best constant `c`.
    fn diff_mod_constant(&self, other: &PyGrid) -> PyResult<f64> {
        Ok(tg::max_diff_mod_constant(&self.0.field, &other.0.field).py_err()?.0)
    }

    fn __repr__(&self) -> String {
        let d = self.0.field.domain();
        format!(
            "Grid({}x{}, h={}, active={}, {})",
            d.nx,
            d.ny,
            d.h,
            d.active_count(),
            self.params().__repr__()
        )
    }
}

/// Twin graph and residual report. `anchor` is a chart point; the twin
/// vanishes at the nearest node with four active neighbours.
#[pyfunction]
#[pyo3(signature = (grid, anchor = None, cmc_check = true))]
fn dualize<'py>(
    py: Python<'py>,
    grid: &PyGrid,
    anchor: Option<(f64, f64)>,
    cmc_check: bool,
) -> PyResult<(PyGrid, Bound<'py, PyAny>)> {
    let g = &grid.0;
    let anchor = match anchor {
        Some((x, y)) => Some(
            g.field
                .domain()
                .core()
                .nearest_active(x, y)
                .ok_or_else(|| DomainError::new_err("no usable anchor node"))?,
        ),
        None => None,
    };
    let mut opts = tg::DualizeOptions {
        anchor,
        mean_curvature: g.h_expected,
        ..tg::DualizeOptions::default()
    };
    if !cmc_check {
        opts.cmc_check = None;
    }
    let pair = tg::dualize_with(&g.field, &g.params, &opts).py_err()?;
    let mut rep = serde_json::to_value(pair.residuals).expect("residuals serialize");
    rep["roundtrip_residual"] = tg::roundtrip_error(&pair).py_err()?.into();
    rep["anchor"] = serde_json::json!([pair.anchor.0, pair.anchor.1]);
    let target = tg::GridFile::new(pair.target, pair.target_params, Some(pair.source_params.bundle));
    Ok((PyGrid(target), to_py(py, &rep)?))
}

/// Dirichlet problem with constant boundary value `bc`.
#[pyfunction]
#[pyo3(signature = (params, H, shape = "disk:0.5", h = 0.02, bc = 0.0, tol = 1e-10, max_iter = 200))]
#[allow(non_snake_case, clippy::too_many_arguments)]
fn solve<'py>(
    py: Python<'py>,
    params: PySpaceParams,
    H: f64,
    shape: &str,
    h: f64,
    bc: f64,
    tol: f64,
    max_iter: usize,
) -> PyResult<(PyGrid, Bound<'py, PyAny>)> {
    let problem = tg::DirichletProblem::new(params.0, H, self::shape(shape, h)?, |_, _| bc)
        .py_err()?
        .with_controls(tg::SolverControls {
            tolerance: tol,
            max_iterations: max_iter,
            ..tg::SolverControls::default()
        });
    let (u, rep) = tg::solve_dirichlet(&problem).py_err()?;
    Ok((PyGrid(tg::GridFile::new(u, params.0, Some(H))), report(py, &rep)?))
}

/// Hessian-one potential of a minimal graph in R³.
#[pyfunction]
fn hessian<'py>(py: Python<'py>, grid: &PyGrid) -> PyResult<(PyGrid, Bound<'py, PyAny>)> {
    let sol = tg::hessian_from_minimal(&grid.0.field, None).py_err()?;
    let f = tg::GridFile::new(sol.f, tg::SpaceParams::riemannian(0.0, 0.0), None);
    Ok((PyGrid(f), report(py, &sol.diagnostics)?))
}

#[pyfunction]
fn feasibility<'py>(py: Python<'py>, kappa: f64, tau: f64) -> PyResult<Bound<'py, PyAny>> {
    let p = tg::SpaceParams::lorentzian(kappa, tau);
    let radii = tg::timelike_circle_range(&p).py_err()?.map(|r| (r.lower, r.upper));
    let v = serde_json::json!({
        "kappa": kappa,
        "tau": tau,
        "discriminant": p.discriminant(),
        "verdict": tg::existence_classifier(&p).py_err()?,
    });
    let d = to_py(py, &v)?;
    // Infinite upper radii do not survive JSON, so set them directly.
    d.set_item("timelike_circle_radii", radii)?;
    Ok(d)
}

#[pyfunction]
fn heinz<'py>(py: Python<'py>, grid: &PyGrid, radii: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    let g = &grid.0;
    report(
        py,
        &tg::heinz_flux_check(&g.field, &g.params, &radii, g.h_expected).py_err()?,
    )
}

#[pyfunction]
#[pyo3(signature = (grid, radii = Vec::new()))]
fn cheng_yau<'py>(py: Python<'py>, grid: &PyGrid, radii: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    let g = &grid.0;
    report(
        py,
        &tg::cheng_yau_check(&g.field, &g.params, &radii, g.h_expected).py_err()?,
    )
}

#[pyfunction]
#[pyo3(signature = (grid, radii = Vec::new()))]
fn nil_growth<'py>(py: Python<'py>, grid: &PyGrid, radii: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    report(
        py,
        &tg::nil_growth_check(&grid.0.field, &grid.0.params, &radii).py_err()?,
    )
}

#[pyfunction]
#[pyo3(signature = (grid, radius, f = None))]
fn coarea<'py>(py: Python<'py>, grid: &PyGrid, radius: f64, f: Option<&PyGrid>) -> PyResult<Bound<'py, PyAny>> {
    let g = &grid.0;
    let one;
    let test = match f {
        Some(t) => &t.0.field,
        None => {
            one = tg::ScalarField::constant(g.field.domain().clone(), 1.0).py_err()?;
            &one
        }
    };
    report(py, &tg::coarea_identity(&g.field, &g.params, test, radius).py_err()?)
}

#[pyfunction]
fn angle_probe<'py>(py: Python<'py>, grid: &PyGrid, radii: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    report(
        py,
        &tg::angle_integrability_probe(&grid.0.field, &grid.0.params, &radii).py_err()?,
    )
}

#[pymodule]
fn pytwingraph(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpaceParams>()?;
    m.add_class::<PyGrid>()?;
    m.add("DomainError", m.py().get_type::<DomainError>())?;
    m.add("NumericError", m.py().get_type::<NumericError>())?;
    m.add_function(wrap_pyfunction!(dualize, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(hessian, m)?)?;
    m.add_function(wrap_pyfunction!(feasibility, m)?)?;
    m.add_function(wrap_pyfunction!(heinz, m)?)?;
    m.add_function(wrap_pyfunction!(cheng_yau, m)?)?;
    m.add_function(wrap_pyfunction!(nil_growth, m)?)?;
    m.add_function(wrap_pyfunction!(coarea, m)?)?;
    m.add_function(wrap_pyfunction!(angle_probe, m)?)?;
    Ok(())
}
