// Copyright (c) The ConflictSync Authors
// SPDX-License-Identifier: Apache-2.0

//! Python module `conflictsync`.

use conflictsync_core::bloom::BloomFilter;
use conflictsync_core::digest::{Digest64, Digester};
use conflictsync_core::lattice::{delta, GSet, Item, Lattice};
use conflictsync_core::protocol::Algorithm;
use conflictsync_core::riblt::{DecodeStatus, Reconciler, SymbolStream};
use conflictsync_core::simnet::{self, SessionReport};
use conflictsync_core::workload::{self, PairSpec};
use conflictsync_core::Error;
use pyo3::exceptions::{PyRuntimeError, PyTypeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict, PyString};

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(msg) => PyValueError::new_err(msg),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Accepts `bytes` as-is and `str` as UTF-8.
fn item_from(obj: &Bound<'_, PyAny>) -> PyResult<Item> {
    if let Ok(b) = obj.cast::<PyBytes>() {
        Ok(Item::new(b.as_bytes()))
    } else if let Ok(s) = obj.cast::<PyString>() {
        Ok(Item::new(s.to_str()?))
    } else {
        Err(PyTypeError::new_err("GSet items must be bytes or str"))
    }
}

/// Grow-only set of byte strings.
#[pyclass(name = "GSet", module = "conflictsync", eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
pub struct PyGSet {
    inner: GSet,
}

#[pymethods]
impl PyGSet {
    #[new]
    #[pyo3(signature = (items=None))]
    fn new(items: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let mut inner = GSet::new();
        if let Some(items) = items {
            for obj in items.try_iter()? {
                inner.add(item_from(&obj?)?);
            }
        }
        Ok(PyGSet { inner })
    }

    fn add(&mut self, item: &Bound<'_, PyAny>) -> PyResult<()> {
        self.inner.add(item_from(item)?);
        Ok(())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __contains__(&self, item: &Bound<'_, PyAny>) -> PyResult<bool> {
        Ok(self.inner.contains_item(&item_from(item)?))
    }

    /// Items in canonical (byte-wise) order.
    fn items<'py>(&self, py: Python<'py>) -> Vec<Bound<'py, PyBytes>> {
        self.inner.iter().map(|i| PyBytes::new(py, i.as_bytes())).collect()
    }

    fn join(&self, other: &PyGSet) -> PyGSet {
        PyGSet { inner: self.inner.join(&other.inner) }
    }

    /// Smallest state that, joined with `other`, gives `self | other`.
    fn delta(&self, other: &PyGSet) -> PyGSet {
        PyGSet { inner: delta(&self.inner, &other.inner) }
    }

    fn leq(&self, other: &PyGSet) -> bool {
        self.inner.leq(&other.inner)
    }

    /// Sum of item lengths in bytes.
    fn payload_bytes(&self) -> usize {
        self.inner.payload_bytes()
    }

    fn __repr__(&self) -> String {
        format!("GSet(<{} items, {} bytes>)", self.inner.len(), self.inner.payload_bytes())
    }
}

/// A synchronization algorithm with its parameters.
#[pyclass(name = "Algorithm", module = "conflictsync", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
pub struct PyAlgorithm {
    inner: Algorithm,
}

#[pymethods]
impl PyAlgorithm {
    /// `name` is one of Baseline, Bu, Ra, BlBu, BlRa, BuRa, BlBuRa.
    #[new]
    #[pyo3(signature = (name, eps=None, load_factor=None))]
    fn new(name: &str, eps: Option<f64>, load_factor: Option<f64>) -> PyResult<Self> {
        Algorithm::from_parts(name, eps, load_factor).map(|inner| PyAlgorithm { inner }).map_err(to_py_err)
    }

    /// The nineteen configurations of the standard benchmark.
    #[staticmethod]
    fn standard_grid() -> Vec<PyAlgorithm> {
        Algorithm::standard_grid().into_iter().map(|inner| PyAlgorithm { inner }).collect()
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    #[getter]
    fn params(&self) -> String {
        self.inner.params()
    }

    #[getter]
    fn eps(&self) -> Option<f64> {
        self.inner.epsilon()
    }

    #[getter]
    fn load_factor(&self) -> Option<f64> {
        self.inner.load_factor()
    }

    /// `(messages, round_trips, streamed)`.
    fn latency(&self) -> (usize, f64, bool) {
        let l = self.inner.latency();
        (l.messages, l.round_trips, l.streamed)
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Algorithm({})", self.inner)
    }
}

/// Byte accounting of one session.
#[pyclass(name = "SessionReport", module = "conflictsync", frozen, get_all)]
pub struct PySessionReport {
    algorithm: String,
    cardinality: usize,
    similarity: f64,
    metadata_bytes: u64,
    redundant_bytes: u64,
    necessary_bytes: u64,
    total_bytes: u64,
    framing_bytes: u64,
    messages: usize,
    symbols: u64,
    converged: bool,
    transcript_hash: u64,
}

impl From<&SessionReport> for PySessionReport {
    fn from(r: &SessionReport) -> Self {
        PySessionReport {
            algorithm: r.algorithm.to_string(),
            cardinality: r.cardinality,
            similarity: r.similarity_measured,
            metadata_bytes: r.metadata_bytes,
            redundant_bytes: r.redundant_bytes,
            necessary_bytes: r.necessary_bytes,
            total_bytes: r.total_bytes(),
            framing_bytes: r.framing_bytes,
            messages: r.messages,
            symbols: r.symbols,
            converged: r.converged,
            transcript_hash: r.transcript_hash,
        }
    }
}

#[pymethods]
impl PySessionReport {
    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        d.set_item("algorithm", &self.algorithm)?;
        d.set_item("cardinality", self.cardinality)?;
        d.set_item("similarity", self.similarity)?;
        d.set_item("metadata_bytes", self.metadata_bytes)?;
        d.set_item("redundant_bytes", self.redundant_bytes)?;
        d.set_item("necessary_bytes", self.necessary_bytes)?;
        d.set_item("total_bytes", self.total_bytes)?;
        d.set_item("framing_bytes", self.framing_bytes)?;
        d.set_item("messages", self.messages)?;
        d.set_item("symbols", self.symbols)?;
        d.set_item("converged", self.converged)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "SessionReport({}: total={} metadata={} redundant={} necessary={} converged={})",
            self.algorithm,
            self.total_bytes,
            self.metadata_bytes,
            self.redundant_bytes,
            self.necessary_bytes,
            self.converged
        )
    }
}

/// Synchronize `a` (initiator) with `b` (responder).
/// Returns `(report, final_a, final_b)`.
#[pyfunction]
#[pyo3(signature = (algorithm, a, b, seed=0))]
fn run_session(
    py: Python<'_>,
    algorithm: &PyAlgorithm,
    a: &PyGSet,
    b: &PyGSet,
    seed: u64,
) -> PyResult<(PySessionReport, PyGSet, PyGSet)> {
    let (algo, a, b) = (algorithm.inner, a.inner.clone(), b.inner.clone());
    let out = py.detach(move || simnet::run_session(algo, &a, &b, seed)).map_err(to_py_err)?;
    Ok((PySessionReport::from(&out.report), PyGSet { inner: out.initiator }, PyGSet { inner: out.responder }))
}

/// Two replicas of `cardinality` random alphanumeric items each with the
/// requested Jaccard similarity.
#[pyfunction]
#[pyo3(signature = (cardinality, similarity, seed=0, min_len=5, max_len=80))]
fn generate_pair(
    py: Python<'_>,
    cardinality: usize,
    similarity: f64,
    seed: u64,
    min_len: usize,
    max_len: usize,
) -> PyResult<(PyGSet, PyGSet)> {
    let spec = PairSpec::new(cardinality, similarity, seed).with_item_len(min_len, max_len);
    let (a, b) = py.detach(|| workload::generate_pair(&spec)).map_err(to_py_err)?;
    Ok((PyGSet { inner: a }, PyGSet { inner: b }))
}

#[pyfunction]
fn jaccard(a: &PyGSet, b: &PyGSet) -> f64 {
    workload::jaccard(&a.inner, &b.inner)
}

/// 64-bit digest of `data` under a session `seed`.
#[pyfunction]
#[pyo3(signature = (data, seed=0))]
fn digest(data: &[u8], seed: u64) -> u64 {
    Digester::new(seed).digest_bytes(data).0
}

#[pyclass(name = "BloomFilter", module = "conflictsync")]
pub struct PyBloomFilter {
    inner: BloomFilter,
}

#[pymethods]
impl PyBloomFilter {
    /// Filter sized for `capacity` members at false-positive rate `eps`.
    #[new]
    fn new(capacity: usize, eps: f64) -> PyResult<Self> {
        BloomFilter::for_capacity(capacity, eps).map(|inner| PyBloomFilter { inner }).map_err(to_py_err)
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        BloomFilter::from_bytes(data).map(|inner| PyBloomFilter { inner }).map_err(to_py_err)
    }

    fn insert(&mut self, item: &Bound<'_, PyAny>) -> PyResult<()> {
        self.inner.insert_bytes(item_from(item)?.as_bytes());
        Ok(())
    }

    fn __contains__(&self, item: &Bound<'_, PyAny>) -> PyResult<bool> {
        Ok(self.inner.contains_bytes(item_from(item)?.as_bytes()))
    }

    #[getter]
    fn num_bits(&self) -> u64 {
        self.inner.num_bits()
    }

    #[getter]
    fn num_hashes(&self) -> u32 {
        self.inner.num_hashes()
    }

    /// Encoded size, header included.
    fn wire_len(&self) -> usize {
        self.inner.wire_len()
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.to_bytes())
    }
}

/// The first `count` coded symbols of a digest set, as
/// `(id_sum, hash_sum, count)` tuples.
#[pyfunction]
fn coded_symbols(digests: Vec<u64>, count: usize) -> Vec<(u64, u64, i64)> {
    let mut stream = SymbolStream::new(digests.into_iter().map(Digest64));
    (0..count)
        .map(|_| {
            let s = stream.next_symbol();
            (s.id_sum, s.hash_sum, s.count)
        })
        .collect()
}

/// Reconcile two digest sets with a rateless stream from `remote`.
/// Returns `(remote_only, local_only, symbols_used)`.
#[pyfunction]
#[pyo3(signature = (local, remote, max_symbols=None))]
fn reconcile(local: Vec<u64>, remote: Vec<u64>, max_symbols: Option<u64>) -> PyResult<(Vec<u64>, Vec<u64>, u64)> {
    let budget = max_symbols.unwrap_or_else(|| simnet::symbol_budget(local.len() + remote.len()));
    let mut stream = SymbolStream::new(remote.into_iter().map(Digest64));
    let mut decoder = Reconciler::new(local.into_iter().map(Digest64));
    for index in 0..budget {
        let status = decoder.receive(index, stream.next_symbol()).map_err(to_py_err)?;
        if let DecodeStatus::Done { mut remote_only, mut local_only } = status {
            remote_only.sort_unstable();
            local_only.sort_unstable();
            let raw = |v: Vec<Digest64>| v.into_iter().map(|d| d.0).collect();
            return Ok((raw(remote_only), raw(local_only), index + 1));
        }
    }
    Err(to_py_err(Error::SymbolBudgetExceeded { budget }))
}

/// Populate `m` with the module contents; shared by the extension entry
/// point and embedders.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGSet>()?;
    m.add_class::<PyAlgorithm>()?;
    m.add_class::<PySessionReport>()?;
    m.add_class::<PyBloomFilter>()?;
    m.add_function(wrap_pyfunction!(run_session, m)?)?;
    m.add_function(wrap_pyfunction!(generate_pair, m)?)?;
    m.add_function(wrap_pyfunction!(jaccard, m)?)?;
    m.add_function(wrap_pyfunction!(digest, m)?)?;
    m.add_function(wrap_pyfunction!(coded_symbols, m)?)?;
    m.add_function(wrap_pyfunction!(reconcile, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

#[pymodule]
fn conflictsync(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}
