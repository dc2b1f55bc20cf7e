//! Python bindings. Reports cross the boundary as JSON and are returned as
//! plain Python dicts.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use lowdeg::agreement::{agreement_exact, agreement_mc, agreement_pointwise, check_equivalence, TestSpec};
use lowdeg::decoder::{decode as run_decode, DecoderMode, DecoderParams};
use lowdeg::spectral::{build_graph, case_report, sampling_suite as run_suite, GraphCase};
use lowdeg::table::TableShape;
use lowdeg::{rng, Error, FieldCtx, SubspaceTable, DEFAULT_CAP};

create_exception!(lowdeg_py, LowdegError, PyException, "Error raised by the lowdeg library; `args[1]` is the CLI exit code.");

fn err(e: Error) -> PyErr {
    LowdegError::new_err((e.to_string(), e.exit_code()))
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, x: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(x).map_err(|e| err(e.into()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A subspace table.
#[pyclass(name = "Table", module = "lowdeg_py", frozen)]
struct PyTable {
    inner: SubspaceTable,
}

#[pymethods]
impl PyTable {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        SubspaceTable::from_json_bytes(text.as_bytes()).map(|inner| PyTable { inner }).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        SubspaceTable::load(path).map(|inner| PyTable { inner }).map_err(err)
    }

    /// Writes the table and returns its content hash.
    fn save(&self, path: &str) -> PyResult<String> {
        self.inner.save(path).map_err(err)
    }

    fn to_json(&self) -> String {
        String::from_utf8(self.inner.to_json_bytes()).expect("table JSON is UTF-8")
    }

    fn content_hash(&self) -> String {
        self.inner.content_hash()
    }

    fn header<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, self.inner.header())
    }

    #[getter]
    fn q(&self) -> u32 {
        self.inner.field().q()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn s(&self) -> usize {
        self.inner.s()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        let h = self.inner.header();
        format!("Table(q={}, m={}, s={}, d={}, generator={}, entries={})", self.q(), h.m, h.s, h.d, h.generator.name(), self.inner.len())
    }
}

fn field(q: u32, e: u32) -> Result<FieldCtx, Error> {
    if e == 1 {
        return FieldCtx::prime(q);
    }
    let p = (2..=q).find(|p| (*p as u64).checked_pow(e) >= Some(q as u64)).unwrap_or(q);
    if (p as u64).checked_pow(e) != Some(q as u64) {
        return Err(Error::Invalid(format!("{q} is not a {e}-th power")));
    }
    FieldCtx::new(p, e, None)
}

/// Generates a table. Plants are drawn from `seed`; `generator` is one of
/// honest, planted, halfhalf, mixture, random.
#[pyfunction]
#[pyo3(signature = (q, m, s, d, generator, seed, rho = 0.5, weights = None, e = 1))]
#[allow(clippy::too_many_arguments)]
fn gen_table(py: Python<'_>, q: u32, m: usize, s: usize, d: usize, generator: &str, seed: u64, rho: f64, weights: Option<Vec<f64>>, e: u32) -> PyResult<PyTable> {
    let weights = weights.unwrap_or_else(|| vec![0.5, 0.5]);
    let kind = generator.to_ascii_lowercase();
    py.detach(move || {
        let shape = TableShape::new(field(q, e)?, m, s, d)?;
        let mut r = rng::stream(seed, 1 << 40);
        match kind.as_str() {
            "honest" => SubspaceTable::gen_honest(&shape, &shape.random_global(&mut r), seed),
            "planted" => SubspaceTable::gen_planted(&shape, &shape.random_global(&mut r), rho, seed),
            "halfhalf" => SubspaceTable::gen_halfhalf(&shape, seed),
            "mixture" => {
                let gs: Vec<_> = weights.iter().map(|_| shape.random_global(&mut r)).collect();
                SubspaceTable::gen_mixture(&shape, &gs, &weights, seed)
            }
            "random" => SubspaceTable::gen_random(&shape, seed),
            other => Err(Error::Invalid(format!("unknown generator {other:?}"))),
        }
    })
    .map(|inner| PyTable { inner })
    .map_err(err)
}

/// Agreement of a table under a test (`cxc`, `plp`, `pxp`, `clc` or
/// `"s,k,r"`). `mode` is exact, pointwise or mc (mc needs `seed`).
#[pyfunction]
#[pyo3(signature = (table, spec = "cxc", mode = "exact", samples = 100_000, seed = None, cap = DEFAULT_CAP))]
fn agreement<'py>(py: Python<'py>, table: &PyTable, spec: &str, mode: &str, samples: u64, seed: Option<u64>, cap: u128) -> PyResult<Bound<'py, PyAny>> {
    let spec = TestSpec::parse(spec).map_err(err)?;
    let t = &table.inner;
    let est = py
        .detach(|| match mode {
            "exact" => agreement_exact(t, spec, cap),
            "pointwise" => agreement_pointwise(t, cap),
            "mc" => match seed {
                Some(s) => agreement_mc(t, spec, samples, s),
                None => Err(Error::Invalid("mc mode needs a seed".into())),
            },
            other => Err(Error::Invalid(format!("unknown mode {other:?}"))),
        })
        .map_err(err)?;
    to_py(py, &est.report(&t.content_hash(), vec![]))
}

/// Relations between the (s,r,r), (s,k,k) and (s,k,r) tests on one table.
#[pyfunction]
#[pyo3(signature = (table, s, k, r, kappa = 2.0, cap = DEFAULT_CAP))]
fn equivalence<'py>(py: Python<'py>, table: &PyTable, s: usize, k: usize, r: usize, kappa: f64, cap: u128) -> PyResult<Bound<'py, PyAny>> {
    let rep = py.detach(|| check_equivalence(&table.inner, s, k, r, kappa, cap)).map_err(err)?;
    to_py(py, &rep)
}

/// Decodes a cube table; raises `LowdegError` with code 4 when no
/// candidate passes.
#[pyfunction]
#[pyo3(signature = (table, seed, epsilon = None, gamma = None, faithful = false, list = false, cap = DEFAULT_CAP))]
#[allow(clippy::too_many_arguments)]
fn decode<'py>(py: Python<'py>, table: &PyTable, seed: u64, epsilon: Option<f64>, gamma: Option<f64>, faithful: bool, list: bool, cap: u128) -> PyResult<Bound<'py, PyAny>> {
    let params = DecoderParams {
        epsilon,
        gamma,
        mode: if faithful { DecoderMode::Faithful } else { DecoderMode::Practical },
        seed,
        list,
        ..Default::default()
    };
    let rep = py.detach(|| run_decode(&table.inner, &params, cap)).map_err(err)?;
    to_py(py, &rep)
}

/// Spectral report for one inclusion-graph case (`"g1"` .. `"g6"`).
#[pyfunction]
#[pyo3(signature = (case, m, q, cap = DEFAULT_CAP))]
fn spectral_report<'py>(py: Python<'py>, case: &str, m: usize, q: u32, cap: u128) -> PyResult<Bound<'py, PyAny>> {
    let case = GraphCase::parse(case).map_err(err)?;
    let rep = py.detach(|| case_report(&FieldCtx::prime(q)?, case, m, cap)).map_err(err)?;
    to_py(py, &rep)
}

/// Sampling checks with random subsets of the lower-dimensional side.
#[pyfunction]
#[pyo3(signature = (case, m, q, seed, mus = vec![0.125, 0.25, 0.5], trials = 20, indicators = 100, cap = DEFAULT_CAP))]
#[allow(clippy::too_many_arguments)]
fn sampling_suite<'py>(py: Python<'py>, case: &str, m: usize, q: u32, seed: u64, mus: Vec<f64>, trials: usize, indicators: usize, cap: u128) -> PyResult<Bound<'py, PyAny>> {
    let case = GraphCase::parse(case).map_err(err)?;
    let suite = py
        .detach(|| {
            let g = build_graph(&FieldCtx::prime(q)?, case, m, cap)?;
            let g = if g.left()[0].dim() < g.right()[0].dim() { g.swapped() } else { g };
            run_suite(&g, &mus, trials, true, indicators, seed, cap)
        })
        .map_err(err)?;
    to_py(py, &suite)
}

#[pymodule]
pub fn lowdeg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", lowdeg::VERSION)?;
    m.add("LowdegError", m.py().get_type::<LowdegError>())?;
    m.add_class::<PyTable>()?;
    m.add_function(wrap_pyfunction!(gen_table, m)?)?;
    m.add_function(wrap_pyfunction!(agreement, m)?)?;
    m.add_function(wrap_pyfunction!(equivalence, m)?)?;
    m.add_function(wrap_pyfunction!(decode, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_report, m)?)?;
    m.add_function(wrap_pyfunction!(sampling_suite, m)?)?;
    Ok(())
}
