//! CIDEr without the Gaussian length penalty.

use std::collections::{BTreeMap, BTreeSet};

use super::{MetricError, NGramCounts, Result, MAX_ORDER};

/// Reference document frequencies: an n-gram counts once per image whose
/// reference set contains it.
#[derive(Debug, Clone)]
pub struct CorpusStats {
    df: BTreeMap<Vec<String>, usize>,
    images: usize,
}

impl CorpusStats {
    pub fn from_refs(refs: &[Vec<Vec<String>>]) -> Self {
        let mut df = BTreeMap::new();
        for image in refs {
            let mut seen: BTreeSet<Vec<String>> = BTreeSet::new();
            for r in image {
                let counts = NGramCounts::new(r, MAX_ORDER);
                for n in 1..=MAX_ORDER {
                    seen.extend(counts.order(n).keys().cloned());
                }
            }
            for gram in seen {
                *df.entry(gram).or_insert(0) += 1;
            }
        }
        Self { df, images: refs.len() }
    }

    pub fn images(&self) -> usize {
        self.images
    }

    pub fn df(&self, gram: &[String]) -> usize {
        self.df.get(gram).copied().unwrap_or(0)
    }

    /// `ln(N / max(1, df))`.
    pub fn idf(&self, gram: &[String]) -> f64 {
        (self.images as f64 / self.df(gram).max(1) as f64).ln()
    }

    fn vector(&self, counts: &BTreeMap<Vec<String>, usize>) -> BTreeMap<Vec<String>, f64> {
        counts
            .iter()
            .map(|(g, &c)| (g.clone(), c as f64 * self.idf(g)))
            .collect()
    }
}

fn cosine(a: &BTreeMap<Vec<String>, f64>, b: &BTreeMap<Vec<String>, f64>) -> f64 {
    let norm = |v: &BTreeMap<Vec<String>, f64>| v.values().map(|x| x * x).sum::<f64>().sqrt();
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().filter_map(|(g, x)| b.get(g).map(|y| x * y)).sum();
    dot / (na * nb)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CiderScores {
    pub per_image: Vec<f64>,
    pub mean: f64,
}

pub fn cider(hyps: &[Vec<String>], refs: &[Vec<Vec<String>>]) -> Result<CiderScores> {
    if hyps.len() != refs.len() {
        return Err(MetricError::LengthMismatch {
            hyps: hyps.len(),
            refs: refs.len(),
        });
    }
    if refs.len() < 2 {
        return Err(MetricError::TooFewImages(refs.len()));
    }
    if refs.iter().any(Vec::is_empty) {
        return Err(MetricError::NoReferences);
    }
    let stats = CorpusStats::from_refs(refs);
    let per_image: Vec<f64> = hyps
        .iter()
        .zip(refs)
        .map(|(hyp, image_refs)| {
            let h = NGramCounts::new(hyp, MAX_ORDER);
            let r: Vec<NGramCounts> = image_refs.iter().map(|r| NGramCounts::new(r, MAX_ORDER)).collect();
            let per_order: f64 = (1..=MAX_ORDER)
                .map(|n| {
                    let hv = stats.vector(h.order(n));
                    r.iter().map(|rc| cosine(&hv, &stats.vector(rc.order(n)))).sum::<f64>() / r.len() as f64
                })
                .sum();
            10.0 * per_order / MAX_ORDER as f64
        })
        .collect();
    let mean = per_image.iter().sum::<f64>() / per_image.len() as f64;
    Ok(CiderScores { per_image, mean })
}
