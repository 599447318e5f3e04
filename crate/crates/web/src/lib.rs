//! Browser bindings: an SVD filter explorer and a caption scorer.
//!
//! The plain functions are testable natively; the `#[wasm_bindgen]` wrappers
//! only convert errors for JavaScript.

use more_core::linalg::{svd, Matrix};
use more_core::metrics::{bleu, meteor_exact, rouge_l, tokenize};
use more_core::nn::ParameterSet;
use more_core::rng::seeded;
use more_core::svd_filter::{apply_filter, ExpertSpec};
use rand::Rng;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn to_matrix(rows: usize, cols: usize, data: &[f64]) -> Result<Matrix, String> {
    Matrix::from_vec(rows, cols, data.to_vec()).map_err(|e| e.to_string())
}

/// Row-major matrix with entries uniform in [-1, 1).
pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeded(seed);
    (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Singular values, largest first.
pub fn spectrum(rows: usize, cols: usize, data: &[f64]) -> Result<Vec<f64>, String> {
    Ok(svd(&to_matrix(rows, cols, data)?).map_err(|e| e.to_string())?.s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterView {
    pub filtered: Vec<f64>,
    pub k: f64,
    pub retained: usize,
    pub full: usize,
    pub removed_norm: f64,
}

/// What expert `index` of `experts` does to the matrix.
pub fn filter_for_expert(
    rows: usize,
    cols: usize,
    data: &[f64],
    index: usize,
    experts: usize,
) -> Result<FilterView, String> {
    let mut ps = ParameterSet::new();
    let id = ps.add("w", to_matrix(rows, cols, data)?).map_err(|e| e.to_string())?;
    let spec = ExpertSpec::new(index, experts, vec!["w".into()]).map_err(|e| e.to_string())?;
    let report = apply_filter(&mut ps, &spec).map_err(|e| e.to_string())?;
    Ok(FilterView {
        filtered: ps.value(id).as_slice().to_vec(),
        k: spec.k,
        retained: report[0].retained,
        full: report[0].full,
        removed_norm: report[0].removed_norm,
    })
}

/// Sentence-level scores of `hypothesis` against newline-separated references, as JSON.
pub fn caption_scores(hypothesis: &str, references: &str) -> Result<String, String> {
    let hyp = tokenize(hypothesis);
    let refs: Vec<Vec<String>> = references.lines().map(tokenize).filter(|r| !r.is_empty()).collect();
    let err = |e: more_core::metrics::MetricError| e.to_string();
    let bleus = (1..=4)
        .map(|n| bleu(&hyp, &refs, n))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    Ok(json!({
        "tokens": hyp,
        "bleu": bleus,
        "meteor_exact": meteor_exact(&hyp, &refs).map_err(err)?,
        "rouge_l": rouge_l(&hyp, &refs).map_err(err)?,
    })
    .to_string())
}

fn js(e: String) -> JsError {
    JsError::new(&e)
}

#[wasm_bindgen(js_name = randomMatrix)]
pub fn random_matrix_js(rows: usize, cols: usize, seed: u32) -> Vec<f64> {
    random_matrix(rows, cols, seed as u64)
}

#[wasm_bindgen(js_name = svdSpectrum)]
pub fn svd_spectrum_js(rows: usize, cols: usize, data: &[f64]) -> Result<Vec<f64>, JsError> {
    spectrum(rows, cols, data).map_err(js)
}

/// Filtered matrix followed by `[k, retained, full, removed_norm]`.
#[wasm_bindgen(js_name = filterForExpert)]
pub fn filter_for_expert_js(
    rows: usize,
    cols: usize,
    data: &[f64],
    index: usize,
    experts: usize,
) -> Result<Vec<f64>, JsError> {
    let v = filter_for_expert(rows, cols, data, index, experts).map_err(js)?;
    let mut out = v.filtered;
    out.extend([v.k, v.retained as f64, v.full as f64, v.removed_norm]);
    Ok(out)
}

#[wasm_bindgen(js_name = captionScores)]
pub fn caption_scores_js(hypothesis: &str, references: &str) -> Result<String, JsError> {
    caption_scores(hypothesis, references).map_err(js)
}
