//! Python bindings: metrics, agreement, LoRA accounting, extraction and
//! split sizing. Structured results cross the boundary as JSON-decoded
//! Python objects.

use forge_core::annotation::{self, AgreementMatrix};
use forge_core::dataset::{self, DEFAULT_RATIOS};
use forge_core::extract::{self, RecordLine};
use forge_core::lora::{self, ArchitectureSpec, LoraConfig};
use forge_core::metrics::{self, BleuMode, MetricConfig, RougeMode, ScorePair};
use forge_core::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Validation(_) | Error::Config(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_mode<T: serde::de::DeserializeOwned>(name: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(name.into()))
        .map_err(|_| PyValueError::new_err(format!("unknown mode {name:?}")))
}

/// Scores `(candidate, reference)` pairs; returns bleu, r1, r2, rl, rlsum
/// and pair counts.
#[pyfunction]
#[pyo3(signature = (pairs, rouge_mode = "recall", bleu_mode = "corpus"))]
fn score_pairs<'py>(
    py: Python<'py>,
    pairs: Vec<(String, String)>,
    rouge_mode: &str,
    bleu_mode: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = MetricConfig {
        rouge_mode: parse_mode::<RougeMode>(rouge_mode)?,
        bleu_mode: parse_mode::<BleuMode>(bleu_mode)?,
        ..MetricConfig::default()
    };
    let pairs: Vec<ScorePair> = pairs
        .into_iter()
        .map(|(c, r)| ScorePair::new(c, r))
        .collect();
    let report = py
        .detach(|| metrics::score_pairs(&pairs, &cfg))
        .map_err(py_err)?;
    to_py(py, &report)
}

/// Default tokenization of a description.
#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    metrics::tokens(text, &Default::default())
}

/// Fleiss' kappa over an items × categories count matrix.
#[pyfunction]
fn fleiss_kappa(rows: Vec<Vec<usize>>) -> PyResult<f64> {
    let m = AgreementMatrix::new(rows).map_err(py_err)?;
    annotation::fleiss_kappa(&m).map_err(py_err)
}

/// Trainable LoRA parameters for an architecture given as JSON text.
#[pyfunction]
#[pyo3(signature = (spec_json, rank = 16))]
fn lora_params(spec_json: &str, rank: u64) -> PyResult<u64> {
    let spec = ArchitectureSpec::from_json(spec_json).map_err(py_err)?;
    lora::lora_params(&spec, &LoraConfig::with_rank(rank)).map_err(py_err)
}

/// Checks the shipped architectures against their reference counts.
#[pyfunction]
#[pyo3(signature = (rank = 16))]
fn verify_table3(py: Python<'_>, rank: u64) -> PyResult<Bound<'_, PyAny>> {
    let rows = lora::verify_table3(&lora::shipped_specs(), &LoraConfig::with_rank(rank))
        .map_err(py_err)?;
    to_py(py, &rows)
}

/// Extracts documented declarations from one Java source text.
#[pyfunction]
#[pyo3(signature = (content, repo = "repo", rel_path = "Main.java", license_id = "MIT"))]
fn extract_source<'py>(
    py: Python<'py>,
    content: &str,
    repo: &str,
    rel_path: &str,
    license_id: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let out = extract::extract_source(content, repo, rel_path, license_id);
    let value = serde_json::json!({
        "records": out.records.iter().map(RecordLine::from).collect::<Vec<_>>(),
        "orphans": out.orphans,
        "parse_degraded": out.parse_degraded,
    });
    to_py(py, &value)
}

/// Train/validation/test sizes for `n` entries.
#[pyfunction]
#[pyo3(signature = (n, ratios = DEFAULT_RATIOS))]
fn split_sizes(n: usize, ratios: [f64; 3]) -> PyResult<(usize, usize, usize)> {
    dataset::validate_ratios(ratios).map_err(py_err)?;
    let [a, b, c] = dataset::cut_sizes(n, ratios);
    Ok((a, b, c))
}

/// Stable dataset entry id for a declaration span.
#[pyfunction]
fn entry_id(repo: &str, rel_path: &str, start: usize, end: usize) -> String {
    dataset::entry_id(repo, rel_path, (start, end))
}

#[pymodule]
fn javadoc_forge(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(score_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(fleiss_kappa, m)?)?;
    m.add_function(wrap_pyfunction!(lora_params, m)?)?;
    m.add_function(wrap_pyfunction!(verify_table3, m)?)?;
    m.add_function(wrap_pyfunction!(extract_source, m)?)?;
    m.add_function(wrap_pyfunction!(split_sizes, m)?)?;
    m.add_function(wrap_pyfunction!(entry_id, m)?)?;
    Ok(())
}
