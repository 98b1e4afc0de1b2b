//! Python bindings for the attack-structure laboratory.
//!
//! Compiles to an extension module named `ransim_py` exposing the whole
//! pipeline: run a scenario document against a fresh virtual filesystem,
//! read the trace, extract the feature vector, classify it, and validate
//! the category's recoverability claim. Structured results cross the
//! boundary as JSON strings so Python sees exactly the same documents the
//! CLI emits; `python/smoke_test.py` exercises the module end to end.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ransim_core::attack::{AttackError, AttackerKeySet};
use ransim_core::classify::{classify, Category, ClassifierMode};
use ransim_core::corpus::{builtin_corpus, classify_corpus, corpus_stats};
use ransim_core::extract::extract_features as core_extract_features;
use ransim_core::features::enumerate_valid_vectors;
use ransim_core::image::{load_image, run_scenario_doc, store_image, AttackImage};
use ransim_core::recover::{attempt_recovery, predict_recoverability, RecoveryStrategy};
use ransim_core::scenario::parse_scenario_json;
use ransim_core::trace::{emit_trace, parse_trace};

// ==== argument parsing helpers ===============================================

fn parse_mode(name: &str) -> PyResult<ClassifierMode> {
    match name {
        "literal" => Ok(ClassifierMode::Literal),
        "key-locality" | "key_locality" => Ok(ClassifierMode::KeyLocality),
        other => Err(PyValueError::new_err(format!(
            "unknown classifier mode {other:?}; use \"literal\" or \"key-locality\""
        ))),
    }
}

fn parse_category(name: &str) -> PyResult<Category> {
    Category::parse(name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown category {name:?}; use CAT1..CAT5")))
}

fn parse_strategy_names(names: &[String]) -> PyResult<Vec<RecoveryStrategy>> {
    names
        .iter()
        .map(|name| {
            RecoveryStrategy::ALL
                .into_iter()
                .find(|s| s.as_str() == name)
                .ok_or_else(|| PyValueError::new_err(format!("unknown strategy {name:?}")))
        })
        .collect()
}

fn to_json<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string_pretty(value)
        .map_err(|e| PyRuntimeError::new_err(format!("serializing result: {e}")))
}

// ==== attack runs ============================================================

/// One finished scenario run: the post-attack filesystem image plus its
/// trace, artifacts, and the attacker-side key escrow.
#[pyclass]
struct AttackRun {
    image: AttackImage,
}

#[pymethods]
impl AttackRun {
    /// Scenario identifier the run was produced from.
    #[getter]
    fn scenario_id(&self) -> String {
        self.image.trace.scenario_id.clone()
    }

    /// Number of events in the execution trace.
    #[getter]
    fn event_count(&self) -> usize {
        self.image.trace.events.len()
    }

    /// The execution trace in its line-oriented text format.
    fn trace_text(&self) -> String {
        emit_trace(&self.image.trace)
    }

    /// Feature vector extracted from the trace, as JSON.
    fn features_json(&self) -> PyResult<String> {
        let vector = core_extract_features(&self.image.trace)
            .map_err(|e| PyValueError::new_err(format!("extracting features: {e}")))?;
        to_json(&vector)
    }

    /// Full classification (category, sublabel, rationale) as JSON.
    #[pyo3(signature = (mode = "key-locality"))]
    fn classify_json(&self, mode: &str) -> PyResult<String> {
        let vector = core_extract_features(&self.image.trace)
            .map_err(|e| PyValueError::new_err(format!("extracting features: {e}")))?;
        let classification = classify(&vector, parse_mode(mode)?)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        to_json(&classification)
    }

    /// Just the category label, e.g. "CAT3".
    #[pyo3(signature = (mode = "key-locality"))]
    fn category(&self, mode: &str) -> PyResult<String> {
        let vector = core_extract_features(&self.image.trace)
            .map_err(|e| PyValueError::new_err(format!("extracting features: {e}")))?;
        let classification = classify(&vector, parse_mode(mode)?)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(classification.category.as_str().to_string())
    }

    /// Attempt recovery with the named strategies and return the report as
    /// JSON. `use_attacker_keys=True` hands the attacker's stored escrow to
    /// the engine — the paid-ransom model.
    #[pyo3(signature = (strategies, use_attacker_keys = false))]
    fn recover_json(&self, strategies: Vec<String>, use_attacker_keys: bool) -> PyResult<String> {
        let strategies = parse_strategy_names(&strategies)?;
        let keys: Option<&AttackerKeySet> =
            use_attacker_keys.then_some(&self.image.attacker_keys);
        let report = attempt_recovery(&self.image, &strategies, keys);
        to_json(&report)
    }

    /// Byte-weighted fraction of target content recovered bit-exact.
    #[pyo3(signature = (strategies, use_attacker_keys = false))]
    fn recovered_fraction(
        &self,
        strategies: Vec<String>,
        use_attacker_keys: bool,
    ) -> PyResult<f64> {
        let strategies = parse_strategy_names(&strategies)?;
        let keys: Option<&AttackerKeySet> =
            use_attacker_keys.then_some(&self.image.attacker_keys);
        Ok(attempt_recovery(&self.image, &strategies, keys).fraction)
    }

    /// Write the image to a directory in the same layout `ransim simulate`
    /// uses (fs/, baseline/, trace.trace, artifacts.json, ...).
    fn store(&self, dir: &str) -> PyResult<()> {
        store_image(&self.image, std::path::Path::new(dir))
            .map_err(|e| PyRuntimeError::new_err(format!("storing image: {e}")))
    }

    /// Load a stored image back from a directory.
    #[staticmethod]
    fn load(dir: &str) -> PyResult<AttackRun> {
        let image = load_image(std::path::Path::new(dir))
            .map_err(|e| PyValueError::new_err(format!("loading image: {e}")))?;
        Ok(AttackRun { image })
    }

    fn __repr__(&self) -> String {
        format!(
            "AttackRun(scenario_id={:?}, events={})",
            self.image.trace.scenario_id,
            self.image.trace.events.len()
        )
    }
}

// ==== module functions =======================================================

/// Run a scenario document (JSON text) against a fresh virtual filesystem
/// with an in-process key endpoint. `seed` overrides the document's RNG
/// seed when given.
#[pyfunction]
#[pyo3(signature = (scenario_json, seed = None))]
fn simulate(scenario_json: &str, seed: Option<u64>) -> PyResult<AttackRun> {
    let mut doc = parse_scenario_json(scenario_json)
        .map_err(|e| PyValueError::new_err(format!("parsing scenario: {e}")))?;
    if let Some(seed) = seed {
        doc.scenario.rng_seed = seed;
    }
    let image = run_scenario_doc(&doc).map_err(|e| match e {
        AttackError::Config(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(format!("attack aborted: {other}")),
    })?;
    Ok(AttackRun { image })
}

/// Extract the feature vector from trace text; returns the vector as JSON.
#[pyfunction]
fn extract_features(trace_text: &str) -> PyResult<String> {
    let log = parse_trace(trace_text)
        .map_err(|e| PyValueError::new_err(format!("parsing trace: {e}")))?;
    let vector = core_extract_features(&log)
        .map_err(|e| PyValueError::new_err(format!("extracting features: {e}")))?;
    to_json(&vector)
}

/// Classify a feature vector (JSON text) and return the classification as
/// JSON.
#[pyfunction]
#[pyo3(signature = (features_json, mode = "key-locality"))]
fn classify_features(features_json: &str, mode: &str) -> PyResult<String> {
    let vector: ransim_core::features::FeatureVector = serde_json::from_str(features_json)
        .map_err(|e| PyValueError::new_err(format!("parsing feature vector: {e}")))?;
    let classification =
        classify(&vector, parse_mode(mode)?).map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_json(&classification)
}

/// Recoverability claim for a category ("CAT1".."CAT5") as JSON.
#[pyfunction]
fn predict(category: &str) -> PyResult<String> {
    to_json(&predict_recoverability(parse_category(category)?))
}

/// Classify the built-in sample corpus against its documented categories;
/// returns the per-sample report as JSON.
#[pyfunction]
#[pyo3(signature = (mode = "key-locality"))]
fn corpus_verify(mode: &str) -> PyResult<String> {
    let report = classify_corpus(&builtin_corpus(), parse_mode(mode)?)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_json(&report)
}

/// Descriptive statistics over the built-in corpus as JSON.
#[pyfunction]
fn corpus_stats_json() -> PyResult<String> {
    to_json(&corpus_stats(&builtin_corpus()))
}

/// Number of structurally valid feature vectors.
#[pyfunction]
fn valid_vector_count() -> usize {
    enumerate_valid_vectors().len()
}

/// Number of valid vectors the two classifier modes disagree on.
#[pyfunction]
fn mode_divergence_count() -> PyResult<usize> {
    let mut count = 0;
    for vector in enumerate_valid_vectors() {
        let literal = classify(&vector, ClassifierMode::Literal)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        let locality = classify(&vector, ClassifierMode::KeyLocality)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        if literal.category != locality.category {
            count += 1;
        }
    }
    Ok(count)
}

#[pymodule]
fn ransim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<AttackRun>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(extract_features, m)?)?;
    m.add_function(wrap_pyfunction!(classify_features, m)?)?;
    m.add_function(wrap_pyfunction!(predict, m)?)?;
    m.add_function(wrap_pyfunction!(corpus_verify, m)?)?;
    m.add_function(wrap_pyfunction!(corpus_stats_json, m)?)?;
    m.add_function(wrap_pyfunction!(valid_vector_count, m)?)?;
    m.add_function(wrap_pyfunction!(mode_divergence_count, m)?)?;
    Ok(())
}

// ==== sanity =================================================================
