//! Pretrained word vectors in the GloVe text format.

use std::collections::BTreeMap;
use std::path::Path;

use super::{PipelineError, Result};
use crate::nn::ParameterSet;
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainedRows {
    pub dim: usize,
    /// Vocabulary index → vector, for tokens found in the file.
    pub rows: BTreeMap<usize, Vec<f64>>,
    /// Matched share of the non-reserved vocabulary.
    pub coverage: f64,
}

/// Each line: a token followed by `d` reals. Term tokens such as `dog_NOUN`
/// are matched by the part before the tag.
pub fn parse_embeddings(text: &str, vocab: &Vocabulary) -> Result<PretrainedRows> {
    let mut by_word: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, tok) in vocab.tokens().iter().enumerate().skip(3) {
        by_word.entry(tok.as_str()).or_default().push(i);
        if let Some((word, _tag)) = tok.rsplit_once('_') {
            if word != tok {
                by_word.entry(word).or_default().push(i);
            }
        }
    }
    let mut dim = None;
    let mut rows = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        let values: Vec<f64> = parts
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| PipelineError::Invalid(format!("embeddings line {}: unparsable value", n + 1)))?;
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(PipelineError::Invalid(format!(
                    "embeddings line {}: {} values, earlier lines have {d}",
                    n + 1,
                    values.len()
                )))
            }
            _ => {}
        }
        if let Some(ids) = by_word.get(word) {
            for &i in ids {
                rows.entry(i).or_insert_with(|| values.clone());
            }
        }
    }
    let candidates = vocab.len().saturating_sub(3);
    let coverage = if candidates == 0 {
        0.0
    } else {
        rows.len() as f64 / candidates as f64
    };
    Ok(PretrainedRows {
        dim: dim.unwrap_or(0),
        rows,
        coverage,
    })
}

pub fn load_embeddings(path: &Path, vocab: &Vocabulary) -> Result<PretrainedRows> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    parse_embeddings(&text, vocab)
}

impl PretrainedRows {
    /// Copies matched rows into `table` (unmatched rows keep their random
    /// initialization) and optionally freezes them.
    pub fn apply(&self, params: &mut ParameterSet, table: &str, freeze: bool) -> Result<()> {
        let id = params
            .id(table)
            .ok_or_else(|| PipelineError::Invalid(format!("no parameter named '{table}'")))?;
        let cols = params.value(id).cols();
        if !self.rows.is_empty() && self.dim != cols {
            return Err(PipelineError::Invalid(format!(
                "embedding file has dimension {}, model expects {cols}",
                self.dim
            )));
        }
        let value = params.value_mut(id);
        for (&r, v) in &self.rows {
            value.row_mut(r).copy_from_slice(v);
        }
        if freeze {
            let rows: Vec<usize> = self.rows.keys().copied().collect();
            params.freeze_rows(id, &rows);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn vocab(words: &[&str]) -> Vocabulary {
        Vocabulary::with_tokens(words.iter().map(|w| w.to_string()))
    }

    #[test]
    fn coverage_cases() {
        let text = "dog 1 2\ncat 3 4\n";
        assert_eq!(parse_embeddings(text, &vocab(&["zebra"])).unwrap().coverage, 0.0);
        assert_eq!(parse_embeddings(text, &vocab(&["dog", "cat"])).unwrap().coverage, 1.0);
        let half = parse_embeddings(text, &vocab(&["dog_NOUN", "sofa_NOUN"])).unwrap();
        assert_eq!(half.coverage, 0.5);
        assert_eq!(half.rows[&3], vec![1.0, 2.0]);
    }

    #[test]
    fn inconsistent_dimension_rejected() {
        let e = parse_embeddings("dog 1 2\ncat 3\n", &vocab(&["dog"])).unwrap_err();
        assert!(e.to_string().contains("line 2"));
    }

    #[test]
    fn applied_rows_are_exact_and_frozen() {
        let v = vocab(&["dog", "cat"]);
        let rows = parse_embeddings("dog 0.1 -0.25\ncat 3e-3 4\n", &v).unwrap();
        let mut ps = ParameterSet::new();
        let id = ps.add("t", Matrix::zeros(5, 2)).unwrap();
        rows.apply(&mut ps, "t", true).unwrap();
        assert_eq!(ps.value(id).row(3), &[0.1, -0.25]);
        assert_eq!(ps.value(id).row(4), &[3e-3, 4.0]);
        assert!(ps.get(id).row_frozen(3) && !ps.get(id).row_frozen(0));
        let mut wrong = ParameterSet::new();
        wrong.add("t", Matrix::zeros(5, 3)).unwrap();
        assert!(rows.apply(&mut wrong, "t", false).is_err());
    }
}
