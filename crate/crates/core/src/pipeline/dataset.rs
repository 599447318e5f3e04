//! JSON-lines datasets and plain-text style corpora.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PipelineError, Result};

/// One image: precomputed features, reference captions and optional terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub features: Vec<f64>,
    pub captions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style: Option<String>,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))
}

/// Parses a dataset, collecting every malformed line before failing.
pub fn parse_dataset(text: &str, feature_dim: usize) -> Result<Vec<DatasetRecord>> {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = n + 1;
        match serde_json::from_str::<DatasetRecord>(line) {
            Err(e) => errors.push(format!("line {line_no}: {e}")),
            Ok(r) if r.features.len() != feature_dim => errors.push(format!(
                "line {line_no}: record '{}' has {} features, expected {feature_dim}",
                r.id,
                r.features.len()
            )),
            Ok(r) if r.features.iter().any(|v| !v.is_finite()) => {
                errors.push(format!("line {line_no}: record '{}' has non-finite features", r.id))
            }
            Ok(r) if r.captions.iter().all(|c| c.trim().is_empty()) => {
                errors.push(format!("line {line_no}: record '{}' has no captions", r.id))
            }
            Ok(r) => records.push(r),
        }
    }
    if !errors.is_empty() {
        return Err(PipelineError::Dataset(errors.join("\n")));
    }
    if records.is_empty() {
        log::warn!("dataset contains no records");
    }
    Ok(records)
}

pub fn load_dataset(path: &Path, feature_dim: usize) -> Result<Vec<DatasetRecord>> {
    parse_dataset(&read(path)?, feature_dim).map_err(|e| match e {
        PipelineError::Dataset(msg) => PipelineError::Dataset(format!("{}:\n{msg}", path.display())),
        other => other,
    })
}

pub fn write_dataset(path: &Path, records: &[DatasetRecord]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| PipelineError::io(path, e))
}

/// Non-empty lines of a style corpus, one sentence each.
pub fn load_corpus(path: &Path) -> Result<Vec<String>> {
    Ok(read(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_no_records() {
        assert!(parse_dataset("", 4).unwrap().is_empty());
    }

    #[test]
    fn one_valid_line() {
        let r = parse_dataset(r#"{"id":"x","features":[1,2,3,4],"captions":["a dog"]}"#, 4).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].terms, None);
    }

    #[test]
    fn errors_name_lines() {
        let text = concat!(
            r#"{"id":"x","features":[1,2,3],"captions":["a dog"]}"#,
            "\n",
            r#"{"id":"y","features":[1,2,3,4],"captions":["ok"]}"#,
            "\n",
            r#"{"id":"z","features":[1,2,3,4],"captions":[]}"#,
            "\nnot json\n"
        );
        let e = parse_dataset(text, 4).unwrap_err().to_string();
        assert!(e.contains("line 1") && e.contains("3 features"), "{e}");
        assert!(e.contains("line 3") && e.contains("no captions"), "{e}");
        assert!(e.contains("line 4"), "{e}");
        assert!(!e.contains("line 2"), "{e}");
    }

    #[test]
    fn write_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let recs = vec![DatasetRecord {
            id: "a".into(),
            features: vec![0.1, -2.5],
            captions: vec!["a cat".into()],
            terms: Some(vec!["cat_NOUN".into()]),
            style: Some("DESCRIPTIVE".into()),
        }];
        write_dataset(&path, &recs).unwrap();
        assert_eq!(load_dataset(&path, 2).unwrap(), recs);
    }
}
