//! Python bindings: models, pre/postprocessing, filtering, noise, epochs and BLEU.

use std::collections::HashMap;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use robustmt::corpusbuild::{self, TypeTag};
use robustmt::eval;
use robustmt::filtering::{self, AttentionMatrix, CorpusFilter, Decision, FilterConfig};
use robustmt::noise::{self, NoiseRuleSet, VariantMap};
use robustmt::pipeline::{self, PostprocessOptions, PreprocessOptions};
use robustmt::placeholder::{self, PlaceholderMap};
use robustmt::subword::{self, SubwordError, META_SYMBOL};
use robustmt::SentencePair;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn subword_err(e: SubwordError) -> PyErr {
    match e {
        SubwordError::Io(e) => PyIOError::new_err(e.to_string()),
        e => value_err(e),
    }
}

/// Trained BPE merges and vocabulary.
#[pyclass(name = "SubwordModel", module = "robustmt", from_py_object)]
#[derive(Clone)]
pub struct PySubwordModel {
    inner: subword::SubwordModel,
}

#[pymethods]
impl PySubwordModel {
    /// Trains on raw lines exactly as `Preprocessor` will segment them.
    #[staticmethod]
    #[pyo3(signature = (lines, vocab_size, vocab_threshold = 0, normalize_chars = true, placeholders = true))]
    fn train(
        lines: Vec<String>,
        vocab_size: usize,
        vocab_threshold: u64,
        normalize_chars: bool,
        placeholders: bool,
    ) -> PyResult<Self> {
        let opts = PreprocessOptions {
            normalize_chars,
            placeholders,
        };
        pipeline::train_model(&lines, vocab_size, vocab_threshold, META_SYMBOL, &opts)
            .map(|inner| Self { inner })
            .map_err(subword_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        subword::SubwordModel::load(path).map(|inner| Self { inner }).map_err(subword_err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(subword_err)
    }

    #[getter]
    fn merges(&self) -> Vec<(String, String)> {
        self.inner.merges().to_vec()
    }

    #[getter]
    fn vocab(&self) -> HashMap<String, u64> {
        self.inner.vocab().iter().map(|(k, v)| (k.clone(), *v)).collect()
    }

    /// Pieces of one lowercase unit.
    fn apply(&self, unit: &str) -> Vec<String> {
        subword::apply_bpe_unit(unit, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "SubwordModel(merges={}, vocab={})",
            self.inner.merges().len(),
            self.inner.vocab().len()
        )
    }
}

/// Normalize, encode placeholders, case-encode and segment.
#[pyclass(name = "Preprocessor", module = "robustmt")]
pub struct PyPreprocessor {
    inner: pipeline::Preprocessor,
}

#[pymethods]
impl PyPreprocessor {
    #[new]
    #[pyo3(signature = (model, normalize_chars = true, placeholders = true))]
    fn new(model: PySubwordModel, normalize_chars: bool, placeholders: bool) -> Self {
        let opts = PreprocessOptions {
            normalize_chars,
            placeholders,
        };
        Self {
            inner: pipeline::Preprocessor::new(model.inner, opts),
        }
    }

    /// Returns `(piece line, placeholder sidecar)`.
    #[pyo3(signature = (line, corpus = None, type_tag = None))]
    fn preprocess(&self, line: &str, corpus: Option<&str>, type_tag: Option<&str>) -> PyResult<(String, String)> {
        let prefix = match type_tag {
            None if corpus.is_some() => return Err(value_err("a corpus tag needs a type tag")),
            None => String::new(),
            Some(t) => {
                let t = TypeTag::parse(t).ok_or_else(|| value_err(format!("unknown type tag `{t}`")))?;
                pipeline::tag_prefix(corpus, t).map_err(value_err)?
            }
        };
        let p = self.inner.preprocess(line).map_err(subword_err)?;
        Ok((p.to_line(&prefix), p.placeholders.to_sidecar()))
    }
}

/// Turns model output back into text; returns `(text, report)`. Never fails
/// on malformed output.
#[pyfunction]
#[pyo3(signature = (line, sidecar = "", target_lang = "en", normalize_punct = false))]
fn postprocess(line: &str, sidecar: &str, target_lang: &str, normalize_punct: bool) -> PyResult<(String, HashMap<String, u64>)> {
    let map = PlaceholderMap::from_sidecar(sidecar).map_err(value_err)?;
    let opts = PostprocessOptions {
        normalize_punct,
        ..PostprocessOptions::for_target(target_lang)
    };
    let (text, r) = pipeline::Postprocessor::new(META_SYMBOL, opts).postprocess(line, &map);
    let report = HashMap::from([
        ("repaired_markers".to_string(), r.repaired_markers),
        ("stripped_tags".to_string(), r.stripped_tags),
        ("placeholder_surplus".to_string(), r.placeholders.total_surplus() as u64),
        ("placeholder_unused".to_string(), r.placeholders.total_unused() as u64),
        ("anomalies".to_string(), r.anomalies()),
    ]);
    Ok((text, report))
}

/// Inline casing of already-segmented pieces.
#[pyfunction]
fn case_encode(pieces: Vec<String>) -> PyResult<String> {
    subword::case_encode(&pieces).map(|s| s.to_string()).map_err(subword_err)
}

/// Returns `(encoded text, sidecar)`.
#[pyfunction]
fn encode_placeholders(text: &str) -> (String, String) {
    let (encoded, map) = placeholder::encode_placeholders(text);
    (encoded, map.to_sidecar())
}

#[pyfunction]
fn decode_placeholders(text: &str, sidecar: &str) -> PyResult<String> {
    let map = PlaceholderMap::from_sidecar(sidecar).map_err(value_err)?;
    Ok(placeholder::decode_placeholders(text, &map).0)
}

/// Filters `(source, target, origin)` triples; returns kept indices and counts.
#[pyfunction]
#[pyo3(signature = (pairs, max_ratio = Some(filtering::DEFAULT_MAX_RATIO), copy = true, lid = None))]
fn filter_pairs(
    pairs: Vec<(String, String, String)>,
    max_ratio: Option<f64>,
    copy: bool,
    lid: Option<(String, String)>,
) -> PyResult<(Vec<usize>, HashMap<String, u64>)> {
    let cfg = FilterConfig {
        copy,
        max_ratio,
        lid: lid.map(|(source_lang, target_lang)| filtering::LidConfig {
            source_lang,
            target_lang,
        }),
        ..FilterConfig::default()
    };
    let ngram = filtering::NgramIdentifier::builtin();
    let classifier: Option<&dyn filtering::LanguageIdentifier> = cfg.lid.as_ref().map(|_| &ngram as _);
    let filter = CorpusFilter::new(cfg, classifier).map_err(value_err)?;
    let pairs: Vec<SentencePair> = pairs
        .into_iter()
        .enumerate()
        .map(|(i, (s, t, o))| SentencePair::new(s, t, o, i as u64))
        .collect();
    let (kept_pairs, report) = filter.filter_chunk(pairs, None).map_err(value_err)?;
    let kept = kept_pairs.iter().map(|p| p.line_no as usize).collect();
    let t = report.totals;
    let counts = HashMap::from([
        ("input".to_string(), t.input),
        ("dropped_excluded".to_string(), t.dropped_excluded),
        ("dropped_copy".to_string(), t.dropped_copy),
        ("dropped_lid".to_string(), t.dropped_lid),
        ("dropped_lid_failure".to_string(), t.dropped_lid_failure),
        ("dropped_length".to_string(), t.dropped_length),
        ("dropped_attention".to_string(), t.dropped_attention),
        ("kept".to_string(), t.kept),
    ]);
    Ok((kept, counts))
}

/// Would the default attention rule keep this pair?
#[pyfunction]
fn attention_keeps(rows: Vec<Vec<f64>>) -> PyResult<bool> {
    let m = AttentionMatrix::from_rows(&rows).map_err(value_err)?;
    let d = CorpusFilter::new(
        FilterConfig {
            attention: Some(filtering::AttentionFilterConfig::default()),
            copy: false,
            max_ratio: None,
            ..FilterConfig::default()
        },
        None,
    )
    .map_err(value_err)?
    .decide_chunk(&[SentencePair::new("a", "b", "x", 0)], Some(&[m]))
    .map_err(value_err)?;
    Ok(d[0] == Decision::Keep)
}

/// `(mean row entropy, {θ: share of source words below θ})`.
#[pyfunction]
fn attention_stats(rows: Vec<Vec<f64>>) -> PyResult<(f64, Vec<(f64, f64)>)> {
    let m = AttentionMatrix::from_rows(&rows).map_err(value_err)?;
    let s = filtering::attention_stats(&m);
    Ok((s.mean_row_entropy, s.frac_below))
}

/// Noised copy of a source line; `probability` overrides every rule rate.
#[pyfunction]
#[pyo3(signature = (line, lang, seed, probability = None))]
fn apply_noise(line: &str, lang: &str, seed: u64, probability: Option<f64>) -> PyResult<String> {
    let mut rules = NoiseRuleSet::for_language(lang).map_err(value_err)?;
    if let Some(p) = probability {
        rules = rules.with_all_probabilities(p);
    }
    rules.validate().map_err(value_err)?;
    Ok(noise::apply_noise(line, &rules, &VariantMap::default(), seed))
}

#[pyfunction]
fn extended_edit_distance(a: &str, b: &str) -> usize {
    noise::extended_edit_distance(a, b)
}

/// Half-open `(start, end)` slice of a pool for a 1-based epoch.
#[pyfunction]
fn rotation_slice(pool_size: usize, k: usize, epoch: usize) -> PyResult<(usize, usize)> {
    corpusbuild::rotation_slice(pool_size, k, epoch)
        .map(|r| (r.start, r.end))
        .map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (line, type_tag, corpus = None))]
fn tag_line(line: &str, type_tag: &str, corpus: Option<&str>) -> PyResult<String> {
    let t = TypeTag::parse(type_tag).ok_or_else(|| value_err(format!("unknown type tag `{type_tag}`")))?;
    corpusbuild::tag_line(line, corpus, t).map_err(value_err)
}

/// Corpus BLEU; returns score, precisions (percent), brevity penalty and signature.
#[pyfunction]
#[pyo3(signature = (hyps, refs, tokenize = "13a"))]
fn corpus_bleu(hyps: Vec<String>, refs: Vec<String>, tokenize: &str) -> PyResult<(f64, Vec<f64>, f64, String)> {
    let pretokenized = match tokenize {
        "13a" => false,
        "none" => true,
        other => return Err(value_err(format!("unknown tokenizer `{other}`"))),
    };
    let b = eval::pretokenized_bleu(&hyps, &refs, pretokenized).map_err(value_err)?;
    let precisions = b.precisions.iter().map(|p| p * 100.0).collect();
    Ok((b.score, precisions, b.brevity_penalty, b.signature.to_string()))
}

#[pymodule]
#[pyo3(name = "robustmt")]
fn robustmt_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySubwordModel>()?;
    m.add_class::<PyPreprocessor>()?;
    m.add_function(wrap_pyfunction!(postprocess, m)?)?;
    m.add_function(wrap_pyfunction!(case_encode, m)?)?;
    m.add_function(wrap_pyfunction!(encode_placeholders, m)?)?;
    m.add_function(wrap_pyfunction!(decode_placeholders, m)?)?;
    m.add_function(wrap_pyfunction!(filter_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(attention_stats, m)?)?;
    m.add_function(wrap_pyfunction!(attention_keeps, m)?)?;
    m.add_function(wrap_pyfunction!(apply_noise, m)?)?;
    m.add_function(wrap_pyfunction!(extended_edit_distance, m)?)?;
    m.add_function(wrap_pyfunction!(rotation_slice, m)?)?;
    m.add_function(wrap_pyfunction!(tag_line, m)?)?;
    m.add_function(wrap_pyfunction!(corpus_bleu, m)?)?;
    m.add("META_SYMBOL", META_SYMBOL.to_string())?;
    Ok(())
}
