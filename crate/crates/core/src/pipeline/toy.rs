//! Synthetic workspace: concept-bag image features, template captions and two
//! style corpora with disjoint marker words.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::config::Config;
use super::dataset::{write_dataset, DatasetRecord};
use super::{PipelineError, Result};
use crate::rng::seeded;

const OBJECTS: [&str; 8] = ["dog", "cat", "man", "woman", "horse", "bird", "car", "boat"];
const ACTIONS: [&str; 4] = ["running", "sitting", "standing", "walking"];
const SCENES: [&str; 6] = ["park", "beach", "street", "kitchen", "field", "river"];

const CAPTION_TEMPLATES: [&str; 5] = [
    "a {o} {a} in the {s}",
    "a {o} is {a} in a {s}",
    "the {o} {a} near the {s}",
    "a {o} {a} at the {s}",
    "there is a {o} {a} in the {s}",
];
const DESCRIPTIVE_TEMPLATES: [&str; 3] = [
    "a photo of a {o} {a} in the {s}",
    "this picture shows a {o} {a} at the {s}",
    "a photo of the {o} {a} near a {s}",
];
const STORY_TEMPLATES: [&str; 3] = [
    "lo i saw my {o} {a} in the {s}",
    "i remember my {o} {a} by the {s}",
    "lo my {o} was {a} by the {s}",
];

pub const DESCRIPTIVE_MARKERS: [&str; 3] = ["photo", "picture", "shows"];
pub const STORY_MARKERS: [&str; 5] = ["lo", "i", "saw", "my", "remember"];

#[derive(Debug, Clone)]
pub struct ToyOptions {
    pub records: usize,
    pub test_records: usize,
    pub feature_dim: usize,
    pub corpus_sentences: usize,
    pub seed: u64,
}

impl Default for ToyOptions {
    fn default() -> Self {
        Self {
            records: 200,
            test_records: 50,
            feature_dim: 24,
            corpus_sentences: 300,
            seed: 11,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToyWorkspace {
    pub config: PathBuf,
    pub train: PathBuf,
    pub test: PathBuf,
    pub descriptive: PathBuf,
    pub story: PathBuf,
}

fn fill(template: &str, o: &str, a: &str, s: &str) -> String {
    template.replace("{o}", o).replace("{a}", a).replace("{s}", s)
}

/// Desk-scale configuration matching the toy data.
pub fn toy_config(feature_dim: usize) -> Config {
    Config {
        feature_dim,
        term_vocab: 500,
        sent_vocab: 500,
        embed_dim: 32,
        hidden: 64,
        attention_dim: 32,
        learning_rate: 5e-3,
        batch_size: 32,
        term_epochs: 30,
        sent_epochs: 30,
        extra_stopwords: DESCRIPTIVE_MARKERS
            .iter()
            .chain(&STORY_MARKERS)
            .map(|s| s.to_string())
            .collect(),
        ..Config::default()
    }
}

pub fn toy_records(opts: &ToyOptions) -> Vec<DatasetRecord> {
    let mut rng = seeded(opts.seed);
    let mut prototype =
        |_: &str| -> Vec<f64> { (0..opts.feature_dim).map(|_| StandardNormal.sample(&mut rng)).collect() };
    let objects: Vec<Vec<f64>> = OBJECTS.iter().map(|c| prototype(c)).collect();
    let actions: Vec<Vec<f64>> = ACTIONS.iter().map(|c| prototype(c)).collect();
    let scenes: Vec<Vec<f64>> = SCENES.iter().map(|c| prototype(c)).collect();

    let mut rng = seeded(opts.seed.wrapping_add(1));
    (0..opts.records)
        .map(|n| {
            let (oi, ai, si) = (
                rng.gen_range(0..OBJECTS.len()),
                rng.gen_range(0..ACTIONS.len()),
                rng.gen_range(0..SCENES.len()),
            );
            let features = (0..opts.feature_dim)
                .map(|d| {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    objects[oi][d] + actions[ai][d] + scenes[si][d] + 0.1 * noise
                })
                .collect();
            let captions = CAPTION_TEMPLATES
                .iter()
                .map(|t| fill(t, OBJECTS[oi], ACTIONS[ai], SCENES[si]))
                .collect();
            DatasetRecord {
                id: format!("img{n:04}"),
                features,
                captions,
                terms: None,
                style: Some("DESCRIPTIVE".into()),
            }
        })
        .collect()
}

pub fn toy_corpus(templates: &[&str], count: usize, seed: u64) -> Vec<String> {
    let mut rng = seeded(seed);
    (0..count)
        .map(|_| {
            let t = templates.choose(&mut rng).expect("templates");
            let o = OBJECTS.choose(&mut rng).expect("objects");
            let a = ACTIONS.choose(&mut rng).expect("actions");
            let s = SCENES.choose(&mut rng).expect("scenes");
            fill(t, o, a, s)
        })
        .collect()
}

fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let mut text = lines.join("\n");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| PipelineError::io(path, e))
}

/// Writes `config.txt`, `train.jsonl`, `test.jsonl`, `descriptive.txt` and
/// `story.txt` into `dir`.
pub fn write_toy_workspace(dir: &Path, opts: &ToyOptions) -> Result<ToyWorkspace> {
    std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    let ws = ToyWorkspace {
        config: dir.join("config.txt"),
        train: dir.join("train.jsonl"),
        test: dir.join("test.jsonl"),
        descriptive: dir.join("descriptive.txt"),
        story: dir.join("story.txt"),
    };
    let records = toy_records(opts);
    let split = opts.records.saturating_sub(opts.test_records);
    write_dataset(&ws.train, &records[..split])?;
    write_dataset(&ws.test, &records[split..])?;
    write_lines(
        &ws.descriptive,
        &toy_corpus(&DESCRIPTIVE_TEMPLATES, opts.corpus_sentences, opts.seed + 2),
    )?;
    write_lines(
        &ws.story,
        &toy_corpus(&STORY_TEMPLATES, opts.corpus_sentences, opts.seed + 3),
    )?;
    let config = toy_config(opts.feature_dim);
    std::fs::write(&ws.config, config.to_text()).map_err(|e| PipelineError::io(&ws.config, e))?;
    Ok(ws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::tokenize;
    use crate::pipeline::terms::TermExtractor;

    #[test]
    fn records_are_deterministic_and_sized() {
        let opts = ToyOptions::default();
        let a = toy_records(&opts);
        assert_eq!(a.len(), 200);
        assert_eq!(a, toy_records(&opts));
        assert_eq!(a[0].features.len(), 24);
        assert_eq!(a[0].captions.len(), 5);
    }

    #[test]
    fn markers_are_disjoint_and_stripped_from_terms() {
        assert!(DESCRIPTIVE_MARKERS.iter().all(|m| !STORY_MARKERS.contains(m)));
        let config = toy_config(24);
        let ex = TermExtractor::new(20).with_extra_stopwords(&config.extra_stopwords);
        for line in toy_corpus(&STORY_TEMPLATES, 20, 1)
            .iter()
            .chain(&toy_corpus(&DESCRIPTIVE_TEMPLATES, 20, 2))
        {
            let terms = ex.extract(&tokenize(line));
            assert_eq!(terms.len(), 3, "{line} -> {terms:?}");
        }
        let rec = &toy_records(&ToyOptions::default())[0];
        for c in &rec.captions {
            assert_eq!(ex.extract(&tokenize(c)).len(), 3, "{c}");
        }
    }
}
