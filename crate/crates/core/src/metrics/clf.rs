//! Binary 1,2-gram logistic regression deciding whether a caption is styled.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{MetricError, Result};
use crate::nn::sigmoid;
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq)]
pub struct ClfConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub folds: usize,
    pub seed: u64,
}

impl Default for ClfConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            epochs: 300,
            l2: 1e-4,
            folds: 5,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClfModel {
    /// Unigram `w` or bigram `w1 w2` → weight index.
    pub features: BTreeMap<String, usize>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub threshold: f64,
}

fn feature_names(tokens: &[String]) -> Vec<String> {
    let mut names: Vec<String> = tokens.to_vec();
    names.extend(tokens.windows(2).map(|w| format!("{} {}", w[0], w[1])));
    names.sort_unstable();
    names.dedup();
    names
}

impl ClfModel {
    /// Indices of the known features present in `tokens` (binary occurrence).
    pub fn featurize(&self, tokens: &[String]) -> Vec<usize> {
        feature_names(tokens)
            .iter()
            .filter_map(|f| self.features.get(f).copied())
            .collect()
    }

    pub fn score_features(&self, active: &[usize]) -> f64 {
        sigmoid(self.bias + active.iter().map(|&i| self.weights[i]).sum::<f64>())
    }

    /// `σ(w·φ(s) + b)`.
    pub fn predict_proba(&self, tokens: &[String]) -> f64 {
        self.score_features(&self.featurize(tokens))
    }

    pub fn is_styled(&self, tokens: &[String]) -> bool {
        self.predict_proba(tokens) > self.threshold
    }

    pub fn weight(&self, feature: &str) -> Option<f64> {
        self.features.get(feature).map(|&i| self.weights[i])
    }
}

fn fit(samples: &[(&[String], bool)], config: &ClfConfig) -> ClfModel {
    let mut features = BTreeMap::new();
    for (tokens, _) in samples {
        for f in feature_names(tokens) {
            let next = features.len();
            features.entry(f).or_insert(next);
        }
    }
    let mut model = ClfModel {
        weights: vec![0.0; features.len()],
        features,
        bias: 0.0,
        threshold: 0.5,
    };
    let encoded: Vec<(Vec<usize>, f64)> = samples
        .iter()
        .map(|(t, y)| (model.featurize(t), if *y { 1.0 } else { 0.0 }))
        .collect();
    let n = encoded.len() as f64;
    let mut grad = vec![0.0; model.weights.len()];
    for _ in 0..config.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (active, y) in &encoded {
            let err = model.score_features(active) - y;
            for &i in active {
                grad[i] += err / n;
            }
            grad_b += err / n;
        }
        for (w, g) in model.weights.iter_mut().zip(&grad) {
            *w -= config.learning_rate * (g + config.l2 * *w);
        }
        model.bias -= config.learning_rate * grad_b;
    }
    model
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub folds: usize,
    /// True when a small class forced fewer folds than configured.
    pub reduced: bool,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClfTraining {
    pub model: ClfModel,
    pub cv: CvReport,
}

/// Trains on all data and reports stratified k-fold precision/recall for the
/// styled class. Precision is 0 when no held-out caption is predicted styled.
pub fn train_clf(styled: &[Vec<String>], descriptive: &[Vec<String>], config: &ClfConfig) -> Result<ClfTraining> {
    for (class, set) in [("styled", styled), ("descriptive", descriptive)] {
        if set.len() < 2 {
            return Err(MetricError::TooFewExamples {
                class,
                count: set.len(),
            });
        }
    }
    let smallest = styled.len().min(descriptive.len());
    let folds = config.folds.max(2).min(smallest);
    let reduced = folds < config.folds;
    if reduced {
        log::warn!(
            "smallest class has {smallest} examples; using {folds} folds instead of {}",
            config.folds
        );
    }

    let samples: Vec<(&[String], bool)> = styled
        .iter()
        .map(|s| (s.as_slice(), true))
        .chain(descriptive.iter().map(|s| (s.as_slice(), false)))
        .collect();
    let mut rng = seeded(config.seed);
    let mut fold_of = vec![0; samples.len()];
    for (start, len) in [(0, styled.len()), (styled.len(), descriptive.len())] {
        let mut idx: Vec<usize> = (start..start + len).collect();
        idx.shuffle(&mut rng);
        for (pos, i) in idx.into_iter().enumerate() {
            fold_of[i] = pos % folds;
        }
    }

    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for f in 0..folds {
        let train: Vec<_> = samples
            .iter()
            .zip(&fold_of)
            .filter(|(_, &k)| k != f)
            .map(|(s, _)| *s)
            .collect();
        let model = fit(&train, config);
        for ((tokens, y), _) in samples.iter().zip(&fold_of).filter(|(_, &k)| k == f) {
            match (model.is_styled(tokens), *y) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(ClfTraining {
        model: fit(&samples, config),
        cv: CvReport {
            folds,
            reduced,
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
        },
    })
}

/// Share of captions the classifier labels styled.
pub fn clf_fraction(model: &ClfModel, captions: &[Vec<String>]) -> Result<f64> {
    if captions.is_empty() {
        return Err(MetricError::EmptyCaptions);
    }
    let styled = captions.iter().filter(|c| model.is_styled(c)).count();
    Ok(styled as f64 / captions.len() as f64)
}
