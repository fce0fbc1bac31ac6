//! Python bindings for the self-training toolkit.
//!
//! Labels cross the boundary as strings (`"O"`, `"B-MethodName"`, `"amb"`),
//! probability vectors as lists of 15 floats in class order, and reports as
//! plain dicts.

use std::fs::File;
use std::str::FromStr;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;

use sciner_core::autoannotate::{self, GateConfig, WordProbs};
use sciner_core::dataset::{AnnotatedParagraph, Provenance, TrainingExample};
use sciner_core::selftrain::{self, LoopConfig};
use sciner_core::tag_schema::{self, Label, NUM_CLASSES};
use sciner_core::tagger::{self, TaggerModel, TokenProbs, TrainConfig};
use sciner_core::{eval, ingest, synthetic, Error};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::IoPath { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py(py: Python<'_>, v: &serde_json::Value) -> PyResult<PyObject> {
    use serde_json::Value;
    match v {
        Value::Null => Ok(py.None()),
        Value::Bool(b) => b.into_py_any(py),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_py_any(py),
            None => n.as_f64().unwrap_or(f64::NAN).into_py_any(py),
        },
        Value::String(s) => s.into_py_any(py),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_py_any(py)
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, to_py(py, item)?)?;
            }
            dict.into_py_any(py)
        }
    }
}

fn serde_to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<PyObject> {
    let json = serde_json::to_value(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &json)
}

fn parse_label(s: &str) -> PyResult<Label> {
    Label::from_str(s).map_err(py_err)
}

fn parse_labels(labels: &[String]) -> PyResult<Vec<Label>> {
    labels.iter().map(|s| parse_label(s)).collect()
}

fn probs_array(v: &[f64]) -> PyResult<[f64; NUM_CLASSES]> {
    v.try_into()
        .map_err(|_| PyValueError::new_err(format!("expected {NUM_CLASSES} probabilities, got {}", v.len())))
}

fn gate(gamma: f64) -> PyResult<GateConfig> {
    GateConfig::new(gamma).map_err(py_err)
}

/// The 15 class names in classifier order.
#[pyfunction]
fn labels() -> Vec<String> {
    Label::classes().map(|l| l.to_string()).collect()
}

/// Whether `next` may follow `prev` (`None` for the sequence start).
#[pyfunction]
#[pyo3(signature = (prev, next))]
fn is_legal_transition(prev: Option<&str>, next: &str) -> PyResult<bool> {
    let prev = prev.map(parse_label).transpose()?;
    Ok(tag_schema::is_legal_transition(prev, parse_label(next)?))
}

/// Positions of illegal transitions.
#[pyfunction]
fn validate_sequence(labels: Vec<String>) -> PyResult<Vec<usize>> {
    Ok(tag_schema::validate_sequence(&parse_labels(&labels)?).iter().map(|v| v.position).collect())
}

/// `(type, start, end)` spans, `end` exclusive.
#[pyfunction]
fn spans(labels: Vec<String>) -> PyResult<Vec<(String, usize, usize)>> {
    Ok(tag_schema::spans_from_labels(&parse_labels(&labels)?)
        .into_iter()
        .map(|s| (s.entity_type.to_string(), s.start, s.end))
        .collect())
}

/// Per-class product over a word's subword distributions.
#[pyfunction]
fn aggregate_word_probs(subwords: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let pieces = subwords
        .iter()
        .map(|v| probs_array(v).map(TokenProbs))
        .collect::<PyResult<Vec<_>>>()?;
    Ok(autoannotate::aggregate_word_probs(&pieces).map_err(py_err)?.0.to_vec())
}

#[pyfunction]
#[pyo3(signature = (word_probs, gamma = autoannotate::DEFAULT_GAMMA))]
fn gate_label(word_probs: Vec<f64>, gamma: f64) -> PyResult<String> {
    Ok(autoannotate::gate_label(&WordProbs(probs_array(&word_probs)?), &gate(gamma)?).to_string())
}

/// Greedy decoding under the BIO rules, then the confidence gate.
#[pyfunction]
#[pyo3(signature = (words, gamma = autoannotate::DEFAULT_GAMMA))]
fn constrained_decode(words: Vec<Vec<f64>>, gamma: f64) -> PyResult<Vec<String>> {
    let words = words
        .iter()
        .map(|v| probs_array(v).map(WordProbs))
        .collect::<PyResult<Vec<_>>>()?;
    Ok(autoannotate::constrained_decode(&words, &gate(gamma)?).iter().map(ToString::to_string).collect())
}

#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    ingest::tokenize(text)
}

#[pyfunction]
fn hash_url(url: &str) -> PyResult<String> {
    ingest::hash_url(url).map_err(py_err)
}

/// `(records, skipped)`; records are dicts of the catalog columns plus
/// `venue` and `paper_id`.
#[pyfunction]
fn parse_bibtex(py: Python<'_>, text: &str) -> PyResult<(Vec<PyObject>, usize)> {
    let parsed = ingest::parse_bibtex(text);
    let records = parsed
        .records
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("title", &r.title)?;
            d.set_item("url", &r.url)?;
            for (k, v) in [
                ("editor", &r.editor),
                ("month", &r.month),
                ("year", &r.year),
                ("address", &r.address),
                ("publisher", &r.publisher),
                ("author", &r.author),
                ("booktitle", &r.booktitle),
                ("pages", &r.pages),
            ] {
                d.set_item(k, v.as_deref())?;
            }
            d.set_item("venue", r.venue.to_string())?;
            d.set_item("paper_id", &r.paper_id)?;
            d.into_py_any(py)
        })
        .collect::<PyResult<_>>()?;
    Ok((records, parsed.skipped()))
}

fn paragraphs_from(rows: Vec<(Vec<String>, Vec<String>)>) -> PyResult<Vec<AnnotatedParagraph>> {
    rows.into_iter()
        .enumerate()
        .map(|(i, (words, labels))| {
            let labels = parse_labels(&labels)?;
            let p = AnnotatedParagraph {
                paper_id: format!("p{i}"),
                paragraph_index: 0,
                words,
                labels,
                provenance: Provenance::Manual,
                annotator: None,
                confidence: None,
            };
            if p.words.len() != p.labels.len() {
                return Err(PyValueError::new_err(format!("paragraph {i}: words and labels differ in length")));
            }
            Ok(p)
        })
        .collect()
}

fn label_rows(gold: Vec<Vec<String>>) -> Vec<(Vec<String>, Vec<String>)> {
    gold.into_iter().map(|l| ((0..l.len()).map(|i| format!("w{i}")).collect(), l)).collect()
}

/// Scores for label sequences (one list per paragraph).
#[pyfunction]
fn score(py: Python<'_>, gold: Vec<Vec<String>>, predicted: Vec<Vec<String>>) -> PyResult<PyObject> {
    let g = paragraphs_from(label_rows(gold))?;
    let p = paragraphs_from(label_rows(predicted))?;
    serde_to_py(py, &eval::score(&g, &p).map_err(py_err)?)
}

#[pyfunction]
#[pyo3(signature = (gold, predictions_a, predictions_b, draws = eval::DEFAULT_DRAWS, draw_size = eval::DEFAULT_DRAW_SIZE, seed = 0))]
fn bootstrap_compare(
    py: Python<'_>,
    gold: Vec<Vec<String>>,
    predictions_a: Vec<Vec<String>>,
    predictions_b: Vec<Vec<String>>,
    draws: usize,
    draw_size: usize,
    seed: u64,
) -> PyResult<PyObject> {
    let g = paragraphs_from(label_rows(gold))?;
    let a = paragraphs_from(label_rows(predictions_a))?;
    let b = paragraphs_from(label_rows(predictions_b))?;
    serde_to_py(py, &eval::bootstrap_compare(&g, &a, &b, draws, draw_size, seed).map_err(py_err)?)
}

/// The hashed-feature subword tagger.
#[pyclass(name = "Tagger", module = "sciner")]
struct PyTagger {
    model: TaggerModel,
}

#[pymethods]
impl PyTagger {
    #[new]
    #[pyo3(signature = (feature_bits = tagger::DEFAULT_FEATURE_BITS))]
    fn new(feature_bits: u32) -> PyResult<Self> {
        if !(1..=31).contains(&feature_bits) {
            return Err(PyValueError::new_err("feature_bits must be in 1..=31"));
        }
        Ok(PyTagger { model: TaggerModel::new(feature_bits) })
    }

    /// Continue training on `(words, labels)` pairs; `amb` labels are masked.
    #[pyo3(signature = (paragraphs, epochs = 20, learning_rate = tagger::DEFAULT_LEARNING_RATE, batch_size = 8, seed = 0))]
    fn train(
        &mut self,
        py: Python<'_>,
        paragraphs: Vec<(Vec<String>, Vec<String>)>,
        epochs: usize,
        learning_rate: f64,
        batch_size: usize,
        seed: u64,
    ) -> PyResult<Vec<f64>> {
        let examples: Vec<TrainingExample> = paragraphs_from(paragraphs)?
            .iter()
            .map(TrainingExample::from_annotated)
            .collect();
        let config = TrainConfig { epochs, learning_rate, batch_size, seed };
        let init = self.model.clone();
        self.model = py
            .allow_threads(|| tagger::train(&examples, &config, Some(init)))
            .map_err(py_err)?;
        Ok(self.model.meta.epoch_losses.clone())
    }

    /// `(word_index, subword_index, probs)` per subword.
    fn predict_probs(&self, words: Vec<String>) -> Vec<(usize, usize, Vec<f64>)> {
        self.model
            .predict_probs(&words)
            .into_iter()
            .map(|s| (s.word_index, s.subword_index, s.probs.0.to_vec()))
            .collect()
    }

    /// Word labels; with `gamma`, low-confidence words become `amb`.
    #[pyo3(signature = (words, gamma = None))]
    fn predict(&self, words: Vec<String>, gamma: Option<f64>) -> PyResult<Vec<String>> {
        let config = match gamma {
            Some(g) => gate(g)?,
            None => GateConfig { gamma: 0.0 },
        };
        let paragraph = sciner_core::dataset::Paragraph { paper_id: String::new(), paragraph_index: 0, words };
        let (out, _) = autoannotate::annotate_corpus(autoannotate::ProbSource::Model(&self.model), &[paragraph], &config)
            .map_err(py_err)?;
        Ok(out[0].labels.iter().map(ToString::to_string).collect())
    }

    fn save(&self, path: &str) -> PyResult<()> {
        sciner_core::fsutil::write_atomic(std::path::Path::new(path), |w| self.model.write(w)).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let file = File::open(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
        Ok(PyTagger { model: TaggerModel::read(file).map_err(py_err)? })
    }

    #[getter]
    fn feature_bits(&self) -> u32 {
        self.model.feature_bits()
    }

    #[getter]
    fn epochs_run(&self) -> usize {
        self.model.meta.epochs_run
    }
}

/// Run the self-training loop on a generated corpus and return the
/// iteration records.
#[pyfunction]
#[pyo3(signature = (manual = 100, auto = 1700, test = 200, iterations = 2, gamma = autoannotate::DEFAULT_GAMMA, seed = 2024))]
fn run_synthetic_loop(
    py: Python<'_>,
    manual: usize,
    auto: usize,
    test: usize,
    iterations: usize,
    gamma: f64,
    seed: u64,
) -> PyResult<PyObject> {
    let config = LoopConfig { iterations, gate: gate(gamma)?, seed, ..LoopConfig::default() };
    let records = py
        .allow_threads(|| {
            let corpus = synthetic::generate(&synthetic::SyntheticConfig { manual, auto, test, seed, ..Default::default() });
            selftrain::run_loop(&corpus.manual, &corpus.auto_paragraphs(), &corpus.test, &config, None)
        })
        .map_err(py_err)?
        .records;
    serde_to_py(py, &records)
}

#[pymodule]
fn sciner(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NUM_CLASSES", NUM_CLASSES)?;
    m.add("DEFAULT_GAMMA", autoannotate::DEFAULT_GAMMA)?;
    m.add_class::<PyTagger>()?;
    m.add_function(wrap_pyfunction!(labels, m)?)?;
    m.add_function(wrap_pyfunction!(is_legal_transition, m)?)?;
    m.add_function(wrap_pyfunction!(validate_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(spans, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate_word_probs, m)?)?;
    m.add_function(wrap_pyfunction!(gate_label, m)?)?;
    m.add_function(wrap_pyfunction!(constrained_decode, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(hash_url, m)?)?;
    m.add_function(wrap_pyfunction!(parse_bibtex, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(bootstrap_compare, m)?)?;
    m.add_function(wrap_pyfunction!(run_synthetic_loop, m)?)?;
    Ok(())
}
