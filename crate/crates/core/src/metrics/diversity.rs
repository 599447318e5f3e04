use std::collections::BTreeSet;
use std::fmt;

use super::{MetricError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DiversityRow {
    pub expert: String,
    pub distinct_words: usize,
    pub wps_mean: f64,
    /// Population standard deviation.
    pub wps_std: f64,
    pub vocabulary: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiversityReport {
    pub rows: Vec<DiversityRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VocabularyOverlap {
    pub shared: BTreeSet<String>,
    pub only_first: BTreeSet<String>,
    pub only_second: BTreeSet<String>,
}

pub fn diversity_report(captions_per_expert: &[(String, Vec<Vec<String>>)]) -> Result<DiversityReport> {
    let rows = captions_per_expert
        .iter()
        .map(|(expert, captions)| {
            if captions.is_empty() {
                return Err(MetricError::EmptyCaptions);
            }
            let vocabulary: BTreeSet<String> = captions.iter().flatten().cloned().collect();
            let n = captions.len() as f64;
            let mean = captions.iter().map(|c| c.len() as f64).sum::<f64>() / n;
            let var = captions.iter().map(|c| (c.len() as f64 - mean).powi(2)).sum::<f64>() / n;
            Ok(DiversityRow {
                expert: expert.clone(),
                distinct_words: vocabulary.len(),
                wps_mean: mean,
                wps_std: var.sqrt(),
                vocabulary,
            })
        })
        .collect::<Result<_>>()?;
    Ok(DiversityReport { rows })
}

impl DiversityReport {
    pub fn overlap(&self, a: usize, b: usize) -> VocabularyOverlap {
        let (va, vb) = (&self.rows[a].vocabulary, &self.rows[b].vocabulary);
        VocabularyOverlap {
            shared: va.intersection(vb).cloned().collect(),
            only_first: va.difference(vb).cloned().collect(),
            only_second: vb.difference(va).cloned().collect(),
        }
    }
}

impl fmt::Display for DiversityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<12} {:>14} {:>9} {:>8}",
            "expert", "distinct_words", "wps_mean", "wps_std"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<12} {:>14} {:>9.2} {:>8.2}",
                r.expert, r.distinct_words, r.wps_mean, r.wps_std
            )?;
        }
        Ok(())
    }
}
