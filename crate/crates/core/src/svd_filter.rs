//! Epoch-boundary low-rank filtering of recurrent weight matrices.
//!
//! Expert `i` of `R` keeps the leading `l = round(k · min(m, n))` singular
//! components of each targeted matrix, where `k = i / R` is its diversity
//! factor. The filtered matrix replaces the learned one and training resumes
//! from it.

use thiserror::Error;

use crate::linalg::{svd, truncated_reconstruct, LinalgError, Matrix};
use crate::nn::ParameterSet;

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("expert index {index} outside 1..={count}")]
    ExpertOutOfRange { index: usize, count: usize },
    #[error("diversity factor {0} outside (0, 1]")]
    InvalidFactor(f64),
    #[error("filter targets not found in parameter set: {}", .0.join(", "))]
    MissingTargets(Vec<String>),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, FilterError>;

/// `k = i / R`.
pub fn diversity_factor(index: usize, count: usize) -> Result<f64> {
    if index == 0 || index > count {
        return Err(FilterError::ExpertOutOfRange { index, count });
    }
    Ok(index as f64 / count as f64)
}

/// `round_half_up(k · min(rows, cols))`, never below 1.
pub fn retained_rank(k: f64, w: &Matrix) -> Result<usize> {
    if !(k > 0.0 && k <= 1.0) {
        return Err(FilterError::InvalidFactor(k));
    }
    let full = w.rows().min(w.cols());
    // The slack absorbs representation error in k (e.g. 5/6 · 3 landing just under 2.5).
    let l = (k * full as f64 + 0.5 + 1e-9).floor() as usize;
    Ok(l.clamp(1, full.max(1)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpertSpec {
    pub index: usize,
    pub expert_count: usize,
    pub k: f64,
    pub target_names: Vec<String>,
}

impl ExpertSpec {
    pub fn new(index: usize, expert_count: usize, target_names: Vec<String>) -> Result<Self> {
        Ok(Self {
            index,
            expert_count,
            k: diversity_factor(index, expert_count)?,
            target_names,
        })
    }
}

/// Outcome for one filtered matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredMatrix {
    pub name: String,
    pub retained: usize,
    pub full: usize,
    /// `‖W − W_l‖_F`.
    pub removed_norm: f64,
}

/// Replaces every targeted matrix by its rank-`l` SVD reconstruction.
/// Untargeted entries, gradients and optimizer state are not touched.
pub fn apply_filter(params: &mut ParameterSet, spec: &ExpertSpec) -> Result<Vec<FilteredMatrix>> {
    let missing: Vec<String> = spec
        .target_names
        .iter()
        .filter(|n| params.id(n).is_none())
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(FilterError::MissingTargets(missing));
    }
    let mut report = Vec::with_capacity(spec.target_names.len());
    for name in &spec.target_names {
        let id = params.id(name).expect("checked above");
        let w = params.value(id);
        let l = retained_rank(spec.k, w)?;
        let decomposition = svd(w)?;
        let filtered = truncated_reconstruct(&decomposition, l)?;
        let removed_norm = decomposition.s[l..].iter().fold(0.0, |acc, s| acc + s * s).sqrt();
        report.push(FilteredMatrix {
            name: name.clone(),
            retained: l,
            full: decomposition.s.len(),
            removed_norm,
        });
        *params.value_mut(id) = filtered;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    #[test]
    fn factors() {
        assert_eq!(diversity_factor(1, 3).unwrap(), 1.0 / 3.0);
        assert_eq!(diversity_factor(3, 3).unwrap(), 1.0);
        assert_eq!(diversity_factor(2, 2).unwrap(), 1.0);
        assert_eq!(
            diversity_factor(0, 3),
            Err(FilterError::ExpertOutOfRange { index: 0, count: 3 })
        );
        assert!(diversity_factor(4, 3).is_err());
    }

    #[test]
    fn ranks() {
        assert_eq!(retained_rank(1.0, &Matrix::zeros(512, 512)).unwrap(), 512);
        assert_eq!(retained_rank(2.0 / 3.0, &Matrix::zeros(512, 600)).unwrap(), 341);
        assert_eq!(retained_rank(1.0 / 3.0, &Matrix::zeros(2, 9)).unwrap(), 1);
        assert_eq!(retained_rank(2.0 / 3.0, &Matrix::zeros(6, 6)).unwrap(), 4);
        assert_eq!(retained_rank(0.5, &Matrix::zeros(3, 3)).unwrap(), 2);
        assert_eq!(retained_rank(5.0 / 6.0, &Matrix::zeros(3, 3)).unwrap(), 3);
        assert!(retained_rank(0.0, &Matrix::zeros(3, 3)).is_err());
        assert!(retained_rank(1.5, &Matrix::zeros(3, 3)).is_err());
    }

    fn random_params(seed: u64) -> ParameterSet {
        let mut rng = seeded(seed);
        let mut ps = ParameterSet::new();
        for (name, r, c) in [("a", 6, 6), ("b", 5, 8), ("bias", 6, 1)] {
            ps.add(name, Matrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0)))
                .unwrap();
        }
        ps
    }

    #[test]
    fn full_factor_is_identity() {
        let mut ps = random_params(1);
        let before = ps.clone();
        let spec = ExpertSpec::new(3, 3, vec!["a".into(), "b".into()]).unwrap();
        apply_filter(&mut ps, &spec).unwrap();
        for name in ["a", "b"] {
            let id = ps.id(name).unwrap();
            assert!(ps.value(id).max_abs_diff(before.value(id)) < 1e-8);
        }
    }

    #[test]
    fn truncates_diagonal_by_hand() {
        let mut ps = ParameterSet::new();
        let id = ps.add("w", Matrix::from_diag(&[3.0, 2.0, 1.0])).unwrap();
        let spec = ExpertSpec::new(2, 3, vec!["w".into()]).unwrap();
        let report = apply_filter(&mut ps, &spec).unwrap();
        assert_eq!(report[0].retained, 2);
        assert!((report[0].removed_norm - 1.0).abs() < 1e-12);
        assert!(ps.value(id).max_abs_diff(&Matrix::from_diag(&[3.0, 2.0, 0.0])) < 1e-12);
    }

    #[test]
    fn untargeted_entries_are_bit_identical() {
        let mut ps = random_params(2);
        let before = ps.clone();
        let spec = ExpertSpec::new(1, 3, vec!["a".into()]).unwrap();
        apply_filter(&mut ps, &spec).unwrap();
        for name in ["b", "bias"] {
            let id = ps.id(name).unwrap();
            assert_eq!(ps.value(id), before.value(id));
        }
    }

    #[test]
    fn missing_target_is_listed() {
        let mut ps = random_params(3);
        let spec = ExpertSpec::new(1, 3, vec!["a".into(), "nope".into(), "gone".into()]).unwrap();
        let err = apply_filter(&mut ps, &spec).unwrap_err();
        assert_eq!(err, FilterError::MissingTargets(vec!["nope".into(), "gone".into()]));
        assert!(err.to_string().contains("nope, gone"));
    }

    #[test]
    fn idempotent_rank_bounded_and_monotone() {
        let base = random_params(4);
        let mut previous_gap = f64::INFINITY;
        for i in 1..=6 {
            let spec = ExpertSpec::new(i, 6, vec!["a".into()]).unwrap();
            let mut once = base.clone();
            apply_filter(&mut once, &spec).unwrap();
            let mut twice = once.clone();
            apply_filter(&mut twice, &spec).unwrap();
            let id = once.id("a").unwrap();
            assert!(twice.value(id).max_abs_diff(once.value(id)) < 1e-8);

            let l = retained_rank(spec.k, once.value(id)).unwrap();
            assert!(svd(once.value(id)).unwrap().numerical_rank(1e-10) <= l);

            let gap = once.value(id).sub(base.value(id)).unwrap().frobenius_norm();
            assert!(gap <= previous_gap + 1e-12);
            previous_gap = gap;
        }
    }
}
