//! Caption relevance metrics, the style classifier and the diversity report.

use std::collections::BTreeMap;

use thiserror::Error;

mod bleu;
mod cider;
mod clf;
mod diversity;
mod meteor;
mod rouge;

pub use bleu::{bleu, brevity_penalty, corpus_bleu, modified_precision};
pub use cider::{cider, CiderScores, CorpusStats};
pub use clf::{clf_fraction, train_clf, ClfConfig, ClfModel, ClfTraining, CvReport};
pub use diversity::{diversity_report, DiversityReport, DiversityRow, VocabularyOverlap};
pub use meteor::{meteor_exact, Alignment};
pub use rouge::{lcs_length, rouge_l, ROUGE_BETA};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("no reference captions supplied")]
    NoReferences,
    #[error("n-gram order {0} outside 1..=4")]
    InvalidOrder(usize),
    #[error("{hyps} hypotheses but {refs} reference sets")]
    LengthMismatch { hyps: usize, refs: usize },
    #[error("CIDEr needs at least 2 images, got {0}")]
    TooFewImages(usize),
    #[error("caption list is empty")]
    EmptyCaptions,
    #[error("class '{class}' has {count} examples; at least 2 are needed for cross-validation")]
    TooFewExamples { class: &'static str, count: usize },
}

pub type Result<T> = std::result::Result<T, MetricError>;

pub const MAX_ORDER: usize = 4;

/// Lowercases and splits on whitespace; punctuation becomes separate tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        let mut current = String::new();
        for ch in word.chars() {
            if ch.is_alphanumeric() || ch == '_' {
                current.extend(ch.to_lowercase());
            } else {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                tokens.push(ch.to_string());
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    tokens
}

/// n-gram multiset per order `1..=max_order`.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramCounts {
    orders: Vec<BTreeMap<Vec<String>, usize>>,
}

impl NGramCounts {
    pub fn new(tokens: &[String], max_order: usize) -> Self {
        let orders = (1..=max_order)
            .map(|n| {
                let mut counts = BTreeMap::new();
                for gram in tokens.windows(n) {
                    *counts.entry(gram.to_vec()).or_insert(0) += 1;
                }
                counts
            })
            .collect();
        Self { orders }
    }

    pub fn order(&self, n: usize) -> &BTreeMap<Vec<String>, usize> {
        &self.orders[n - 1]
    }

    pub fn total(&self, n: usize) -> usize {
        self.order(n).values().sum()
    }
}

fn check_order(n: usize) -> Result<()> {
    if (1..=MAX_ORDER).contains(&n) {
        Ok(())
    } else {
        Err(MetricError::InvalidOrder(n))
    }
}

fn check_refs(refs: &[Vec<String>]) -> Result<()> {
    if refs.is_empty() {
        Err(MetricError::NoReferences)
    } else {
        Ok(())
    }
}

#[cfg(test)]
pub(crate) fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_splits_punctuation() {
        assert_eq!(tokenize("A Dog, running."), vec!["a", "dog", ",", "running", "."]);
        assert_eq!(tokenize("  "), Vec::<String>::new());
        assert_eq!(tokenize("it's"), vec!["it", "'", "s"]);
    }

    #[test]
    fn ngram_totals() {
        let c = NGramCounts::new(&toks("a b a b"), 4);
        assert_eq!(c.total(1), 4);
        assert_eq!(c.total(2), 3);
        assert_eq!(c.order(2)[&toks("a b")], 2);
        assert_eq!(c.total(4), 1);
        assert_eq!(NGramCounts::new(&toks("a"), 4).total(3), 0);
    }

    use proptest::prelude::*;

    fn sentence() -> impl Strategy<Value = Vec<String>> {
        proptest::collection::vec(prop_oneof![Just("a"), Just("b"), Just("c"), Just("d")], 0..7)
            .prop_map(|v| v.into_iter().map(String::from).collect())
    }

    proptest! {
        #[test]
        fn scores_in_range_and_reference_order_free(
            hyp in sentence(),
            refs in proptest::collection::vec(sentence(), 1..4),
        ) {
            let mut reversed = refs.clone();
            reversed.reverse();
            for n in 1..=4 {
                let b = bleu(&hyp, &refs, n).unwrap();
                prop_assert!((0.0..=1.0).contains(&b));
                prop_assert_eq!(b, bleu(&hyp, &reversed, n).unwrap());
            }
            let r = rouge_l(&hyp, &refs).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
            prop_assert_eq!(r, rouge_l(&hyp, &reversed).unwrap());
            let m = meteor_exact(&hyp, &refs).unwrap();
            prop_assert!((0.0..=1.0).contains(&m));
            prop_assert_eq!(m, meteor_exact(&hyp, &reversed).unwrap());
        }

        #[test]
        fn cider_in_range(hyps in proptest::collection::vec(sentence(), 2..5)) {
            let refs: Vec<Vec<Vec<String>>> = hyps.iter().rev().map(|h| vec![h.clone(), toks("a b c")]).collect();
            let s = cider(&hyps, &refs).unwrap();
            for v in s.per_image {
                prop_assert!((0.0..=10.0 + 1e-9).contains(&v));
            }
        }
    }
}
