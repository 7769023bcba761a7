use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::Serialize;
use serde_json::Value;

use ::corpusforge as core;
use core::config::PipelineConfig;
use core::mlm::{self, MaskingPolicy};
use core::overlap::{self, EmbeddingSet, PairSearch};
use core::relations::RelationTable;
use core::tokenizer::SubwordVocab;
use core::verbalizer::NameList;

fn py_err(e: core::Error) -> PyErr {
    match e {
        core::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        core::Error::Format { .. } | core::Error::Config(_) => PyValueError::new_err(e.to_string()),
        core::Error::Data(_) => PyRuntimeError::new_err(e.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => i.into_pyobject(py)?.into_any(),
            (None, Some(u)) => u.into_pyobject(py)?.into_any(),
            _ => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, json_to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, &v)
}

/// Applies the deterministic grammar rules to one sentence.
#[pyfunction]
fn normalize(text: &str) -> String {
    core::grammar::normalize(text)
}

/// Renders one ATOMIC-2020 triple with the shipped templates and names.
/// The result is not grammar-normalized.
#[pyfunction]
#[pyo3(signature = (head, relation, tail, id=0, seed=42))]
fn verbalize(head: &str, relation: &str, tail: &str, id: u64, seed: u64) -> PyResult<String> {
    let table = RelationTable::shipped();
    let template = table
        .get_any(relation)
        .ok_or_else(|| PyValueError::new_err(format!("unknown relation {relation:?}")))?;
    let names = NameList::shipped().assign(seed, id);
    Ok(names.substitute(&template.render(head, tail)))
}

#[pyfunction]
fn relation_names() -> Vec<String> {
    RelationTable::shipped().entries().iter().map(|t| t.name.clone()).collect()
}

/// (train, dev) sizes for a 90/10 split of `n` items.
#[pyfunction]
fn split_sizes(n: usize) -> (usize, usize) {
    core::split::split_sizes(n)
}

/// Loads a COPA-format XML file as a list of dicts, optionally prompted.
#[pyfunction]
#[pyo3(signature = (path, prompt=false))]
fn load_copa<'py>(py: Python<'py>, path: PathBuf, prompt: bool) -> PyResult<Bound<'py, PyAny>> {
    let mut items = core::bench::load_copa(&path).map_err(py_err)?;
    if prompt {
        items = items.iter().map(core::bench::add_prompt).collect();
    }
    to_py(py, &items)
}

/// Applies the question-type prompt to a choice-instance dict as returned
/// by `load_copa`. Idempotent.
#[pyfunction]
fn add_prompt<'py>(py: Python<'py>, instance: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let text: String = py.import("json")?.call_method1("dumps", (instance,))?.extract()?;
    let inst: core::bench::ChoiceInstance =
        serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &core::bench::add_prompt(&inst))
}

#[pyfunction]
fn cosine(u: Vec<f64>, v: Vec<f64>) -> PyResult<f64> {
    if u.len() != v.len() {
        return Err(PyValueError::new_err("vectors differ in length"));
    }
    Ok(overlap::cosine(&u, &v))
}

/// All (bench_id, corpus_id, score) with cosine similarity >= threshold,
/// sorted by score descending.
#[pyfunction]
#[pyo3(signature = (bench, corpus, threshold, prefilter=true))]
fn pairs_above(
    bench: Vec<(String, Vec<f64>)>,
    corpus: Vec<(String, Vec<f64>)>,
    threshold: f64,
    prefilter: bool,
) -> PyResult<Vec<(String, String, f64)>> {
    let bench = EmbeddingSet::new("bench", bench).map_err(py_err)?;
    let corpus = EmbeddingSet::new("corpus", corpus).map_err(py_err)?;
    let pairs = overlap::pairs_above(&bench, &corpus, threshold, PairSearch { prefilter }).map_err(py_err)?;
    Ok(pairs.into_iter().map(|p| (p.bench_id, p.corpus_id, p.score)).collect())
}

/// Runs a pipeline subcommand (e.g. "verbalize", "all") and returns the
/// stage directories written.
#[pyfunction]
#[pyo3(signature = (command, config=None, out=None, seed=None, workers=None))]
fn run(
    py: Python<'_>,
    command: &str,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    workers: Option<usize>,
) -> PyResult<Vec<(String, PathBuf)>> {
    let command: core::pipeline::Command = command.parse().map_err(py_err)?;
    let mut cfg = PipelineConfig::load(config.as_deref(), std::env::vars()).map_err(py_err)?;
    if out.is_some() {
        cfg.out_dir = out;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if workers.is_some() {
        cfg.workers = workers;
    }
    let summary = py
        .detach(|| core::pipeline::run(command, &cfg))
        .map_err(py_err)?;
    Ok(summary
        .stages
        .into_iter()
        .map(|(c, dir)| (c.name().to_string(), dir))
        .collect())
}

#[pyclass(module = "corpusforge", frozen)]
struct Vocab {
    inner: SubwordVocab,
}

#[pymethods]
impl Vocab {
    #[staticmethod]
    fn wordpiece(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: SubwordVocab::wordpiece_from_file(&path).map_err(py_err)? })
    }

    /// WordPiece vocabulary from the text of a vocab.txt.
    #[staticmethod]
    fn wordpiece_from_text(text: &str) -> PyResult<Self> {
        Ok(Self { inner: SubwordVocab::wordpiece_from_str(text).map_err(py_err)? })
    }

    #[staticmethod]
    fn bpe(vocab: PathBuf, merges: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: SubwordVocab::bpe_from_files(&vocab, &merges).map_err(py_err)? })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn hash(&self) -> String {
        self.inner.hash().to_string()
    }

    /// Ids with the sequence delimiters added.
    fn tokenize(&self, text: &str) -> Vec<u32> {
        self.inner.tokenize(text)
    }

    /// (ids, truncated) with at most `max_len` positions, delimiters included.
    #[pyo3(signature = (text, max_len=mlm::MAX_SEQ_LEN))]
    fn encode(&self, text: &str, max_len: usize) -> (Vec<u32>, bool) {
        let enc = self.inner.encode(text, max_len);
        (enc.ids, enc.truncated)
    }

    fn detokenize(&self, ids: Vec<u32>) -> String {
        self.inner.detokenize(&ids)
    }

    fn canonical_text(&self, text: &str) -> String {
        self.inner.canonical_text(text)
    }

    /// Masks a delimited id sequence; returns a dict with `input_ids`,
    /// `attention_mask`, `masked_positions` and `labels`.
    #[pyo3(signature = (ids, sample_id, seed=42, mask_rate=0.15, whole_word=false))]
    fn mask<'py>(
        &self,
        py: Python<'py>,
        ids: Vec<u32>,
        sample_id: u64,
        seed: u64,
        mask_rate: f64,
        whole_word: bool,
    ) -> PyResult<Bound<'py, PyAny>> {
        let policy = MaskingPolicy { mask_rate, whole_word, ..Default::default() };
        policy.validate().map_err(py_err)?;
        to_py(py, &mlm::mask_example(&ids, sample_id, seed, &policy, &self.inner))
    }
}

#[pymodule]
fn corpusforge(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", core::VERSION)?;
    m.add("PROMPT_CAUSE", core::bench::PROMPT_CAUSE)?;
    m.add("PROMPT_EFFECT", core::bench::PROMPT_EFFECT)?;
    m.add_class::<Vocab>()?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(verbalize, m)?)?;
    m.add_function(wrap_pyfunction!(relation_names, m)?)?;
    m.add_function(wrap_pyfunction!(split_sizes, m)?)?;
    m.add_function(wrap_pyfunction!(load_copa, m)?)?;
    m.add_function(wrap_pyfunction!(add_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(cosine, m)?)?;
    m.add_function(wrap_pyfunction!(pairs_above, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
