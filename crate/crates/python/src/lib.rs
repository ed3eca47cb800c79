//! Python bindings. Case, pool, label and report records cross the boundary
//! as plain dicts in the same shape as the JSONL files.

use std::path::PathBuf;

use glitchscope_core::audit::{self, CaseCatalog, CaseLabel};
use glitchscope_core::daf::{self, DafParams, DiscrepancyCase};
use glitchscope_core::datastore::{self, load_manifest};
use glitchscope_core::scorer::{self, ScorerBinding};
use glitchscope_core::simindex::{self, SimIndex, SimilarityMetric};
use glitchscope_core::tcac::{self, CaptionPool, PoolScope, TcacCase, TcacParams};
use glitchscope_core::transform::{self, SuiteConfig};
use glitchscope_core::{Error, ErrorClass};
use pyo3::exceptions::{PyConnectionError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn err(e: Error) -> PyErr {
    match e.class() {
        ErrorClass::Validation => PyValueError::new_err(e.to_string()),
        ErrorClass::Io => PyOSError::new_err(e.to_string()),
        ErrorClass::Remote => PyConnectionError::new_err(e.to_string()),
    }
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

/// Named vectors with a model id.
#[pyclass(module = "glitchscope", frozen)]
struct EmbeddingStore(datastore::EmbeddingStore);

#[pymethods]
impl EmbeddingStore {
    #[new]
    fn new(model_id: String, ids: Vec<String>, vectors: Vec<Vec<f32>>) -> PyResult<Self> {
        if ids.len() != vectors.len() {
            return Err(PyValueError::new_err("ids and vectors differ in length"));
        }
        let rows = ids.into_iter().zip(vectors).collect();
        datastore::EmbeddingStore::from_rows(model_id, rows).map(Self).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        datastore::read_embeddings(path).map(Self).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        datastore::write_embeddings(&self.0, path).map_err(err)
    }

    #[getter]
    fn model_id(&self) -> &str {
        self.0.model_id()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn ids(&self) -> Vec<String> {
        self.0.ids().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn get(&self, id: &str) -> Option<Vec<f32>> {
        self.0.get(id).map(<[f32]>::to_vec)
    }

    /// `(id, score)` pairs, best first; ties broken by ascending id.
    #[pyo3(signature = (query_id, k = 10, metric = "cosine", exclude_self = true))]
    fn query_topk(&self, query_id: &str, k: usize, metric: &str, exclude_self: bool) -> PyResult<Vec<(String, f64)>> {
        let metric: SimilarityMetric = parse(metric)?;
        let list = SimIndex::build(&self.0).query_topk(query_id, k, metric, exclude_self).map_err(err)?;
        Ok(list.entries.into_iter().map(|n| (n.id, n.score)).collect())
    }

    fn __repr__(&self) -> String {
        format!("EmbeddingStore(model_id={:?}, len={}, dim={})", self.0.model_id(), self.0.len(), self.0.dim())
    }
}

/// An RGB8 image.
#[pyclass(module = "glitchscope", frozen)]
struct Image(transform::ImageBuffer);

#[pymethods]
impl Image {
    #[new]
    fn new(width: u32, height: u32, pixels: Vec<u8>) -> PyResult<Self> {
        transform::ImageBuffer::new(width, height, pixels).map(Self).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        transform::ImageBuffer::load(path).map(Self).map_err(err)
    }

    #[getter]
    fn width(&self) -> u32 {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.0.height()
    }

    fn pixels<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, self.0.pixels())
    }

    fn to_png<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.0.to_png())
    }

    fn save_png(&self, path: PathBuf) -> PyResult<()> {
        self.0.save_png(path).map_err(err)
    }

    /// Applies one named transform; `params` overrides its defaults.
    #[pyo3(signature = (kind, image_id, seed = 0, params = None))]
    fn transform(&self, kind: &str, image_id: &str, seed: u64, params: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let overrides: toml::Table = match params {
            Some(p) => {
                let value: serde_json::Value = from_py(p)?;
                toml::Table::try_from(value).map_err(|e| PyValueError::new_err(e.to_string()))?
            }
            None => toml::Table::new(),
        };
        let kind: transform::TransformKind = parse(kind)?;
        let suite = transform::make_suite(&SuiteConfig::empty().with(kind.name(), overrides), seed).map_err(err)?;
        Ok(Self(transform::apply(&suite[0], image_id, &self.0)))
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.0 == other.0
    }

    fn __repr__(&self) -> String {
        format!("Image({}x{})", self.0.width(), self.0.height())
    }
}

/// A scorer opened from a binding string such as `toy:seed=1,dim=64`.
#[pyclass(module = "glitchscope", frozen)]
struct Scorer(Box<dyn scorer::Scorer>);

#[pymethods]
impl Scorer {
    #[new]
    fn new(binding: &str) -> PyResult<Self> {
        let binding: ScorerBinding = parse(binding)?;
        binding.open().map(Self).map_err(err)
    }

    #[getter]
    fn model_id(&self) -> &str {
        self.0.model_id()
    }

    fn embed_texts(&self, py: Python<'_>, texts: Vec<String>) -> PyResult<EmbeddingStore> {
        py.detach(|| self.0.embed_texts(&texts)).map(EmbeddingStore).map_err(err)
    }

    fn embed_images(&self, py: Python<'_>, images: Vec<(String, PyRef<'_, Image>)>) -> PyResult<EmbeddingStore> {
        let images: Vec<(String, transform::ImageBuffer)> = images.into_iter().map(|(id, i)| (id, i.0.clone())).collect();
        py.detach(|| self.0.embed_images(&images)).map(EmbeddingStore).map_err(err)
    }

    fn score_image_captions(&self, image_id: &str, image: PyRef<'_, Image>, captions: Vec<String>) -> PyResult<Vec<f32>> {
        self.0.score_image_captions(image_id, &image.0, &captions).map_err(err)
    }
}

/// Case files indexed for labeling.
#[pyclass(module = "glitchscope", name = "CaseCatalog", frozen)]
struct CaseCatalogPy(CaseCatalog);

#[pymethods]
impl CaseCatalogPy {
    #[staticmethod]
    fn load(paths: Vec<PathBuf>) -> PyResult<Self> {
        CaseCatalog::load_files(&paths).map(Self).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (daf = None, tcac = None))]
    fn from_cases(daf: Option<&Bound<'_, PyAny>>, tcac: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let daf: Vec<DiscrepancyCase> = daf.map(from_py).transpose()?.unwrap_or_default();
        let tcac: Vec<TcacCase> = tcac.map(from_py).transpose()?.unwrap_or_default();
        CaseCatalog::new(daf, tcac).map(Self).map_err(err)
    }

    /// `(source, case_id)` for every case, DAF first.
    fn refs(&self) -> Vec<(String, String)> {
        self.0.refs().map(|r| (r.source.to_string(), r.case_id)).collect()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// Append-only label log; in memory when `path` is omitted.
#[pyclass(module = "glitchscope")]
struct LabelStore(audit::LabelStore);

#[pymethods]
impl LabelStore {
    #[new]
    #[pyo3(signature = (path = None))]
    fn new(path: Option<PathBuf>) -> PyResult<Self> {
        match path {
            Some(p) => audit::LabelStore::open(p).map(Self).map_err(err),
            None => Ok(Self(audit::LabelStore::in_memory())),
        }
    }

    /// Validates and appends `{case_ref: {source, case_id}, fault_ids, note, annotator, timestamp}`.
    fn record_label(&mut self, label: &Bound<'_, PyAny>, catalog: PyRef<'_, CaseCatalogPy>) -> PyResult<()> {
        let label: CaseLabel = from_py(label)?;
        self.0.record_label(label, &catalog.0).map_err(err)
    }

    fn flush(&mut self) -> PyResult<()> {
        self.0.flush().map_err(err)
    }

    fn history(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.0.history())
    }

    fn report(&self, py: Python<'_>, catalog: PyRef<'_, CaseCatalogPy>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.0.report(&catalog.0))
    }
}

#[pyfunction]
fn cosine(a: Vec<f32>, b: Vec<f32>) -> PyResult<f64> {
    simindex::cosine(&a, &b).map_err(err)
}

#[pyfunction]
fn l2(a: Vec<f32>, b: Vec<f32>) -> PyResult<f64> {
    simindex::l2(&a, &b).map_err(err)
}

#[pyfunction]
fn jaccard(a: Vec<String>, b: Vec<String>) -> f64 {
    daf::jaccard(&a, &b)
}

#[pyfunction]
#[pyo3(signature = (a, b, p = daf::DEFAULT_RBO_P))]
fn rbo_ext(a: Vec<String>, b: Vec<String>, p: f64) -> PyResult<f64> {
    daf::rbo_ext(&a, &b, p).map_err(err)
}

#[pyfunction]
fn mean_displacement(a: Vec<String>, b: Vec<String>) -> f64 {
    daf::mean_displacement(&a, &b)
}

/// Flagged cases as dicts, most divergent first.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (a, b, k = daf::DEFAULT_K, threshold = daf::DEFAULT_THRESHOLD, metric = "cosine", rbo_p = daf::DEFAULT_RBO_P, manifest = None))]
fn run_daf(
    py: Python<'_>,
    a: PyRef<'_, EmbeddingStore>,
    b: PyRef<'_, EmbeddingStore>,
    k: usize,
    threshold: f64,
    metric: &str,
    rbo_p: f64,
    manifest: Option<PathBuf>,
) -> PyResult<Py<PyAny>> {
    let params = DafParams {
        k,
        metric: parse(metric)?,
        threshold,
        rbo_p,
    };
    let mut cases = daf::run_daf(&a.0, &b.0, &params).map_err(err)?;
    if let Some(path) = manifest {
        let manifest = load_manifest(path).map_err(err)?;
        daf::attach_captions(&mut cases, &manifest).map_err(err)?;
    }
    to_py(py, &cases)
}

#[pyfunction]
#[pyo3(signature = (cases, caption_policy = "longest"))]
fn emit_gpt_prompt(cases: &Bound<'_, PyAny>, caption_policy: &str) -> PyResult<String> {
    let cases: Vec<DiscrepancyCase> = from_py(cases)?;
    daf::emit_gpt_prompt(&cases, parse(caption_policy)?).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (manifest, text_store, per_caption = tcac::DEFAULT_PER_CAPTION, scope = "per-image"))]
fn build_pools(
    py: Python<'_>,
    manifest: PathBuf,
    text_store: PyRef<'_, EmbeddingStore>,
    per_caption: usize,
    scope: &str,
) -> PyResult<Py<PyAny>> {
    let manifest = load_manifest(manifest).map_err(err)?;
    let scope: PoolScope = parse(scope)?;
    let pools = tcac::build_pools(&manifest, &text_store.0, per_caption, scope).map_err(err)?;
    to_py(py, &pools)
}

#[pyfunction]
#[pyo3(signature = (logits, temperature_scale = tcac::DEFAULT_TEMPERATURE))]
fn softmax(logits: Vec<f32>, temperature_scale: f64) -> PyResult<Vec<f64>> {
    tcac::softmax(&logits, temperature_scale).map_err(err)
}

/// All scored cases; pass `config` as TOML text to replace the standard suite.
#[pyfunction]
#[pyo3(signature = (manifest, pools, scorer, seed = 0, config = None, elastic = false, k = tcac::DEFAULT_K, temperature_scale = tcac::DEFAULT_TEMPERATURE, images_out = None))]
#[allow(clippy::too_many_arguments)]
fn run_tcac(
    py: Python<'_>,
    manifest: PathBuf,
    pools: &Bound<'_, PyAny>,
    scorer: PyRef<'_, Scorer>,
    seed: u64,
    config: Option<&str>,
    elastic: bool,
    k: usize,
    temperature_scale: f64,
    images_out: Option<PathBuf>,
) -> PyResult<Py<PyAny>> {
    let manifest = load_manifest(manifest).map_err(err)?;
    let pools: Vec<CaptionPool> = from_py(pools)?;
    let mut suite = match config {
        Some(text) => SuiteConfig::from_toml_str(text).map_err(err)?,
        None => SuiteConfig::default(),
    };
    if elastic {
        suite = suite.with_elastic();
    }
    let specs = transform::make_suite(&suite, seed).map_err(err)?;
    let params = TcacParams { k, temperature_scale };
    let scorer = &*scorer.0;
    let cases = py
        .detach(|| tcac::run_tcac(&manifest, &pools, scorer, &specs, &params, images_out.as_deref()))
        .map_err(err)?;
    to_py(py, &cases)
}

#[pyfunction]
#[pyo3(signature = (cases, per_transform = tcac::DEFAULT_PER_TRANSFORM))]
fn select_cases(py: Python<'_>, cases: &Bound<'_, PyAny>, per_transform: usize) -> PyResult<Py<PyAny>> {
    let cases: Vec<TcacCase> = from_py(cases)?;
    to_py(py, &tcac::select_cases(&cases, per_transform))
}

#[pyfunction]
fn taxonomy(py: Python<'_>) -> PyResult<Py<PyAny>> {
    to_py(py, &audit::taxonomy())
}

#[pyfunction]
fn aggregate_report(py: Python<'_>, labels: &Bound<'_, PyAny>, catalog: PyRef<'_, CaseCatalogPy>) -> PyResult<Py<PyAny>> {
    let labels: Vec<CaseLabel> = from_py(labels)?;
    to_py(py, &audit::aggregate_report(&labels, &catalog.0))
}

#[pymodule(name = "glitchscope")]
fn glitchscope_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ANALYSIS_INSTRUCTIONS", daf::ANALYSIS_INSTRUCTIONS)?;
    m.add_class::<EmbeddingStore>()?;
    m.add_class::<Image>()?;
    m.add_class::<Scorer>()?;
    m.add_class::<CaseCatalogPy>()?;
    m.add_class::<LabelStore>()?;
    m.add_function(wrap_pyfunction!(cosine, m)?)?;
    m.add_function(wrap_pyfunction!(l2, m)?)?;
    m.add_function(wrap_pyfunction!(jaccard, m)?)?;
    m.add_function(wrap_pyfunction!(rbo_ext, m)?)?;
    m.add_function(wrap_pyfunction!(mean_displacement, m)?)?;
    m.add_function(wrap_pyfunction!(run_daf, m)?)?;
    m.add_function(wrap_pyfunction!(emit_gpt_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(build_pools, m)?)?;
    m.add_function(wrap_pyfunction!(softmax, m)?)?;
    m.add_function(wrap_pyfunction!(run_tcac, m)?)?;
    m.add_function(wrap_pyfunction!(select_cases, m)?)?;
    m.add_function(wrap_pyfunction!(taxonomy, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate_report, m)?)?;
    Ok(())
}
