//! Python bindings: lattices, presheaf modalities, programs and the property
//! harness. Reports come back as plain dicts.

use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use sealc_core::harness::{self, GenConfig};
use sealc_core::lattice::{self, Level, Open};
use sealc_core::presheaf::{self, Limits, RawPresheaf};
use sealc_core::semantics::{self, Outcome, Run, StageOptions};
use sealc_core::syntax::{self, Tm};
use sealc_core::typecheck;

create_exception!(sealc, SealcError, PyException);
create_exception!(sealc, ParseError, SealcError);
create_exception!(sealc, IllTyped, SealcError);

fn err(e: impl std::fmt::Display) -> PyErr {
    SealcError::new_err(e.to_string())
}

/// Hands a serializable report to Python as nested dicts and lists.
fn to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

#[pyclass(name = "Lattice", frozen)]
#[derive(Clone)]
struct PyLattice {
    inner: Arc<lattice::Lattice>,
}

impl PyLattice {
    fn level(&self, name: &str) -> PyResult<Level> {
        self.inner.level(name).map_err(err)
    }

    fn names_of(&self, bits: impl Iterator<Item = Level>) -> Vec<String> {
        bits.map(|l| self.inner.name(l).to_string()).collect()
    }

    fn policy(&self, gens: Vec<String>) -> PyResult<Open> {
        self.inner.lower_closure_of_names(&gens).map_err(err)
    }
}

#[pymethods]
impl PyLattice {
    /// Parses a lattice file (`elements`, `order`, optional `meets`).
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let inner = lattice::Lattice::from_toml(text).map_err(err)?;
        Ok(PyLattice {
            inner: Arc::new(inner),
        })
    }

    #[staticmethod]
    fn chain4() -> Self {
        PyLattice {
            inner: Arc::new(lattice::Lattice::chain4()),
        }
    }

    #[staticmethod]
    fn diamond() -> Self {
        PyLattice {
            inner: Arc::new(lattice::Lattice::diamond()),
        }
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.names().to_vec()
    }

    #[getter]
    fn top(&self) -> String {
        self.inner.name(self.inner.top()).to_string()
    }

    fn leq(&self, a: &str, b: &str) -> PyResult<bool> {
        Ok(self.inner.leq(self.level(a)?, self.level(b)?))
    }

    fn meet(&self, a: &str, b: &str) -> PyResult<String> {
        let m = self.inner.meet(self.level(a)?, self.level(b)?);
        Ok(self.inner.name(m).to_string())
    }

    /// `↓l` as a list of level names.
    fn principal_policy(&self, l: &str) -> PyResult<Vec<String>> {
        Ok(self.names_of(self.inner.principal_policy(self.level(l)?).members()))
    }

    #[pyo3(signature = (limit = 1 << 24))]
    fn filters(&self, limit: u64) -> PyResult<Vec<Vec<String>>> {
        let found = self.inner.enumerate_filters(limit).map_err(err)?;
        Ok(found.iter().map(|f| self.names_of(f.members())).collect())
    }

    #[pyo3(signature = (limit = 1 << 24))]
    fn opens(&self, limit: u64) -> PyResult<Vec<Vec<String>>> {
        let found = self.inner.enumerate_opens(limit).map_err(err)?;
        Ok(found.iter().map(|u| self.names_of(u.members())).collect())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Lattice({})", self.inner.names().join(", "))
    }
}

#[pyclass(name = "Presheaf", frozen)]
struct PyPresheaf {
    inner: presheaf::Presheaf,
    lattice: PyLattice,
}

impl PyPresheaf {
    fn wrap(&self, inner: presheaf::Presheaf) -> PyPresheaf {
        PyPresheaf {
            inner,
            lattice: self.lattice.clone(),
        }
    }
}

#[pymethods]
impl PyPresheaf {
    /// Parses a presheaf literal (`[carriers]` and `[[maps]]`) over `lattice`.
    #[staticmethod]
    fn from_toml(lattice: &PyLattice, text: &str) -> PyResult<Self> {
        let raw = RawPresheaf::from_toml(text).map_err(err)?;
        let inner = presheaf::validate_presheaf(lattice.inner.clone(), &raw).map_err(err)?;
        Ok(PyPresheaf {
            inner,
            lattice: lattice.clone(),
        })
    }

    /// Carrier sizes in lattice order.
    fn sizes(&self) -> Vec<usize> {
        self.inner.sizes()
    }

    /// `○_U` of this presheaf, `U` the lower closure of `open`.
    fn open_modality(&self, open: Vec<String>) -> PyResult<PyPresheaf> {
        let u = self.lattice.policy(open)?;
        let o = presheaf::open_modality(u, &self.inner, &Limits::default()).map_err(err)?;
        Ok(self.wrap(o.presheaf))
    }

    fn closed_modality(&self, open: Vec<String>) -> PyResult<PyPresheaf> {
        let u = self.lattice.policy(open)?;
        Ok(self.wrap(presheaf::closed_modality(u, &self.inner).presheaf))
    }

    fn fracture(&self, open: Vec<String>) -> PyResult<bool> {
        let u = self.lattice.policy(open)?;
        presheaf::fracture_check(u, &self.inner, &Limits::default()).map_err(err)
    }

    fn is_sealed(&self, open: Vec<String>) -> PyResult<bool> {
        Ok(presheaf::is_sealed(self.lattice.policy(open)?, &self.inner))
    }

    /// Number of natural transformations into `other`.
    fn homcount(&self, other: &PyPresheaf) -> PyResult<usize> {
        let maps = presheaf::enumerate_nat_trans(&self.inner, &other.inner, &Limits::default())
            .map_err(err)?;
        Ok(maps.len())
    }

    fn __str__(&self) -> String {
        self.inner.render_rows()
    }
}

#[pyclass(name = "Program", unsendable)]
struct PyProgram {
    term: Tm,
    lattice: PyLattice,
}

fn run_dict(py: Python<'_>, lat: &lattice::Lattice, stage: &str, run: &Run) -> PyResult<Py<PyAny>> {
    let (outcome, value) = match &run.outcome {
        Outcome::Converged(v) => ("converged", Some(v.display(lat).to_string())),
        Outcome::OutOfFuel => ("out_of_fuel", None),
    };
    to_py(
        py,
        &serde_json::json!({
            "stage": stage,
            "outcome": outcome,
            "value": value,
            "fuel_used": run.fuel_used,
        }),
    )
}

#[pymethods]
impl PyProgram {
    /// Parses a `.dcc` program body; a `;! lattice:` header is ignored here.
    #[new]
    fn new(lattice: &PyLattice, source: &str) -> PyResult<Self> {
        let body = syntax::read_program(source).body;
        let term = syntax::parse_term(&body, &lattice.inner)
            .map_err(|e| ParseError::new_err(e.to_string()))?;
        Ok(PyProgram {
            term,
            lattice: lattice.clone(),
        })
    }

    /// Infers the type, or checks against `ty`. Returns the printed type.
    #[pyo3(signature = (ty = None, strict = false))]
    fn check(&self, ty: Option<&str>, strict: bool) -> PyResult<String> {
        let lat = &self.lattice.inner;
        let found = match ty {
            Some(t) => {
                let expected =
                    syntax::parse_type(t, lat).map_err(|e| ParseError::new_err(e.to_string()))?;
                typecheck::check_closed(lat, &self.term, &expected, strict).map(|_| expected)
            }
            None => typecheck::infer_closed(lat, &self.term, strict).map(|(t, _)| t),
        };
        let found = found.map_err(|e| IllTyped::new_err(e.to_string()))?;
        Ok(syntax::print_type(&found, lat))
    }

    /// Evaluates at `level` (default top). Returns stage, outcome, value and
    /// fuel_used.
    #[pyo3(signature = (level = None, fuel = 10_000, trace = false))]
    fn eval(
        &self,
        py: Python<'_>,
        level: Option<&str>,
        fuel: i64,
        trace: bool,
    ) -> PyResult<Py<PyAny>> {
        let lat = &self.lattice.inner;
        let k = match level {
            Some(name) => self.lattice.level(name)?,
            None => lat.top(),
        };
        let fuel = semantics::fuel_from_i64(fuel).map_err(err)?;
        let run = semantics::eval_stage_with(lat, &self.term, k, StageOptions { fuel, trace })
            .map_err(err)?;
        let out = run_dict(py, lat, lat.name(k), &run)?;
        if trace {
            out.bind(py).set_item("trace", run.trace)?;
        }
        Ok(out)
    }

    /// Runs the level-blind operational machine.
    #[pyo3(signature = (fuel = 10_000))]
    fn eval_operational(&self, py: Python<'_>, fuel: i64) -> PyResult<Py<PyAny>> {
        let lat = &self.lattice.inner;
        let fuel = semantics::fuel_from_i64(fuel).map_err(err)?;
        let run = semantics::eval_operational(lat, &self.term, fuel).map_err(err)?;
        run_dict(py, lat, "operational", &run)
    }

    /// Levels at which the program converges within `fuel`.
    #[pyo3(signature = (fuel = 10_000))]
    fn support(&self, fuel: i64) -> PyResult<Vec<String>> {
        let lat = &self.lattice.inner;
        let fuel = semantics::fuel_from_i64(fuel).map_err(err)?;
        let s = semantics::support(lat, &self.term, fuel).map_err(err)?;
        Ok(self.lattice.names_of(s.open.members()))
    }

    fn __str__(&self) -> String {
        syntax::print_term(&self.term, &self.lattice.inner)
    }
}

fn config(lattice: &PyLattice, trials: usize, seed: u64, fuel: u64, size: usize) -> GenConfig {
    let mut cfg = GenConfig::new(lattice.inner.clone());
    cfg.trials = trials;
    cfg.seed = seed;
    cfg.fuel = fuel;
    cfg.size = size;
    cfg
}

/// Termination-insensitive noninterference at `level` on generated programs.
#[pyfunction]
#[pyo3(signature = (lattice, level, trials = 1000, seed = harness::DEFAULT_SEED, fuel = 1000, size = 40))]
fn check_tini(
    py: Python<'_>,
    lattice: &PyLattice,
    level: &str,
    trials: usize,
    seed: u64,
    fuel: u64,
    size: usize,
) -> PyResult<Py<PyAny>> {
    let l = lattice.level(level)?;
    let cfg = config(lattice, trials, seed, fuel, size);
    let verdict = harness::check_tini(&cfg, l).map_err(err)?;
    to_py(py, &verdict)
}

/// Every harness property on generated programs.
#[pyfunction]
#[pyo3(signature = (lattice, trials = 200, seed = harness::DEFAULT_SEED, fuel = 1000, size = 40))]
fn run_suite(
    py: Python<'_>,
    lattice: &PyLattice,
    trials: usize,
    seed: u64,
    fuel: u64,
    size: usize,
) -> PyResult<Py<PyAny>> {
    let cfg = config(lattice, trials, seed, fuel, size);
    let report = harness::run_suite(&cfg, &[]).map_err(err)?;
    to_py(py, &report)
}

#[pymodule]
fn sealc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add_class::<PyLattice>()?;
    m.add_class::<PyPresheaf>()?;
    m.add_class::<PyProgram>()?;
    m.add_function(wrap_pyfunction!(check_tini, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    m.add("SealcError", py.get_type::<SealcError>())?;
    m.add("ParseError", py.get_type::<ParseError>())?;
    m.add("IllTyped", py.get_type::<IllTyped>())?;
    Ok(())
}
