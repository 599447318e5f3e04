//! Flat `key = value` configuration with every default filled in.

use std::fmt::Write as _;
use std::path::Path;

use super::{PipelineError, Result};
use crate::metrics::ClfConfig;
use crate::nn::AdamConfig;
use crate::sentence_gen::SentenceGenConfig;
use crate::term_gen::TermGenConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub feature_dim: usize,
    pub term_vocab: usize,
    pub sent_vocab: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub attention_dim: usize,
    pub experts: usize,
    pub learning_rate: f64,
    pub clip: f64,
    pub batch_size: usize,
    pub term_weight_decay: f64,
    pub sent_weight_decay: f64,
    pub embed_dropout: f64,
    pub feature_dropout: f64,
    pub term_epochs: usize,
    pub sent_epochs: usize,
    pub max_terms: usize,
    pub max_sentence: usize,
    pub styles: Vec<String>,
    pub descriptive_style: String,
    pub shuffle_terms: bool,
    pub svd_filter: bool,
    pub reset_moments_after_filter: bool,
    pub seed: u64,
    pub embeddings: Option<String>,
    pub freeze_embeddings: bool,
    pub extra_stopwords: Vec<String>,
    pub clf_epochs: usize,
    pub clf_learning_rate: f64,
    pub clf_folds: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            feature_dim: 2048,
            term_vocab: 10000,
            sent_vocab: 20000,
            embed_dim: 512,
            hidden: 512,
            attention_dim: 512,
            experts: 3,
            learning_rate: 1e-3,
            clip: 5.0,
            batch_size: 64,
            term_weight_decay: 1e-6,
            sent_weight_decay: 0.0,
            embed_dropout: 0.1,
            feature_dropout: 0.1,
            term_epochs: 20,
            sent_epochs: 20,
            max_terms: 20,
            max_sentence: 30,
            styles: vec!["DESCRIPTIVE".into(), "STORY".into()],
            descriptive_style: "DESCRIPTIVE".into(),
            shuffle_terms: true,
            svd_filter: true,
            reset_moments_after_filter: false,
            seed: 1,
            embeddings: None,
            freeze_embeddings: true,
            extra_stopwords: Vec::new(),
            clf_epochs: 300,
            clf_learning_rate: 1.0,
            clf_folds: 5,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| PipelineError::Config(format!("invalid value '{value}' for '{key}'")))
}

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        Self::parse(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }

    /// Lines are `key = value`; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| PipelineError::Config(format!("line {}: expected key = value", n + 1)))?;
            config
                .set(key.trim(), value.trim())
                .map_err(|e| PipelineError::Config(format!("line {}: {e}", n + 1)))?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Applies `key=value` overrides, e.g. from the command line.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| PipelineError::Config(format!("override '{o}' is not key=value")))?;
            self.set(k.trim(), v.trim())?;
        }
        self.validate()
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "feature_dim" => self.feature_dim = parse(key, value)?,
            "term_vocab" => self.term_vocab = parse(key, value)?,
            "sent_vocab" => self.sent_vocab = parse(key, value)?,
            "embed_dim" => self.embed_dim = parse(key, value)?,
            "hidden" => self.hidden = parse(key, value)?,
            "attention_dim" => self.attention_dim = parse(key, value)?,
            "experts" => self.experts = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "clip" => self.clip = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "term_weight_decay" => self.term_weight_decay = parse(key, value)?,
            "sent_weight_decay" => self.sent_weight_decay = parse(key, value)?,
            "embed_dropout" => self.embed_dropout = parse(key, value)?,
            "feature_dropout" => self.feature_dropout = parse(key, value)?,
            "term_epochs" => self.term_epochs = parse(key, value)?,
            "sent_epochs" => self.sent_epochs = parse(key, value)?,
            "max_terms" => self.max_terms = parse(key, value)?,
            "max_sentence" => self.max_sentence = parse(key, value)?,
            "styles" => self.styles = list(value),
            "descriptive_style" => self.descriptive_style = value.to_string(),
            "shuffle_terms" => self.shuffle_terms = parse(key, value)?,
            "svd_filter" => self.svd_filter = parse(key, value)?,
            "reset_moments_after_filter" => self.reset_moments_after_filter = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "embeddings" => self.embeddings = (!value.is_empty()).then(|| value.to_string()),
            "freeze_embeddings" => self.freeze_embeddings = parse(key, value)?,
            "extra_stopwords" => self.extra_stopwords = list(value),
            "clf_epochs" => self.clf_epochs = parse(key, value)?,
            "clf_learning_rate" => self.clf_learning_rate = parse(key, value)?,
            "clf_folds" => self.clf_folds = parse(key, value)?,
            _ => return Err(PipelineError::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("feature_dim", self.feature_dim),
            ("embed_dim", self.embed_dim),
            ("hidden", self.hidden),
            ("attention_dim", self.attention_dim),
            ("experts", self.experts),
            ("batch_size", self.batch_size),
            ("max_terms", self.max_terms),
            ("max_sentence", self.max_sentence),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(PipelineError::Config(format!("'{k}' must be positive")));
        }
        if self.term_vocab < 4 || self.sent_vocab < 4 {
            return Err(PipelineError::Config("vocabulary sizes must be at least 4".into()));
        }
        for (k, p) in [
            ("embed_dropout", self.embed_dropout),
            ("feature_dropout", self.feature_dropout),
        ] {
            if !(0.0..1.0).contains(&p) {
                return Err(PipelineError::Config(format!("'{k}' must lie in [0, 1)")));
            }
        }
        if self.styles.is_empty() {
            return Err(PipelineError::Config("'styles' must list at least one style".into()));
        }
        Ok(())
    }

    /// Canonical text form; parsing it yields the same config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("string write");
        kv("feature_dim", self.feature_dim.to_string());
        kv("term_vocab", self.term_vocab.to_string());
        kv("sent_vocab", self.sent_vocab.to_string());
        kv("embed_dim", self.embed_dim.to_string());
        kv("hidden", self.hidden.to_string());
        kv("attention_dim", self.attention_dim.to_string());
        kv("experts", self.experts.to_string());
        kv("learning_rate", self.learning_rate.to_string());
        kv("clip", self.clip.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("term_weight_decay", self.term_weight_decay.to_string());
        kv("sent_weight_decay", self.sent_weight_decay.to_string());
        kv("embed_dropout", self.embed_dropout.to_string());
        kv("feature_dropout", self.feature_dropout.to_string());
        kv("term_epochs", self.term_epochs.to_string());
        kv("sent_epochs", self.sent_epochs.to_string());
        kv("max_terms", self.max_terms.to_string());
        kv("max_sentence", self.max_sentence.to_string());
        kv("styles", self.styles.join(","));
        kv("descriptive_style", self.descriptive_style.clone());
        kv("shuffle_terms", self.shuffle_terms.to_string());
        kv("svd_filter", self.svd_filter.to_string());
        kv(
            "reset_moments_after_filter",
            self.reset_moments_after_filter.to_string(),
        );
        kv("seed", self.seed.to_string());
        kv("embeddings", self.embeddings.clone().unwrap_or_default());
        kv("freeze_embeddings", self.freeze_embeddings.to_string());
        kv("extra_stopwords", self.extra_stopwords.join(","));
        kv("clf_epochs", self.clf_epochs.to_string());
        kv("clf_learning_rate", self.clf_learning_rate.to_string());
        kv("clf_folds", self.clf_folds.to_string());
        s
    }

    pub fn check_style(&self, style: &str) -> Result<()> {
        if self.styles.iter().any(|s| s == style) {
            Ok(())
        } else {
            Err(PipelineError::Invalid(format!(
                "style '{style}' is not configured (styles = {})",
                self.styles.join(",")
            )))
        }
    }

    pub fn term_gen(&self) -> TermGenConfig {
        TermGenConfig {
            feature_dim: self.feature_dim,
            embed_dim: self.embed_dim,
            hidden: self.hidden,
            experts: self.experts,
            max_terms: self.max_terms,
            batch_size: self.batch_size,
            adam: AdamConfig {
                learning_rate: self.learning_rate,
                clip: self.clip,
                weight_decay: self.term_weight_decay,
                ..AdamConfig::default()
            },
            embed_dropout: self.embed_dropout,
            feature_dropout: self.feature_dropout,
            filter: self.svd_filter,
            reset_moments_after_filter: self.reset_moments_after_filter,
            seed: self.seed,
        }
    }

    pub fn sentence_gen(&self) -> SentenceGenConfig {
        SentenceGenConfig {
            embed_dim: self.embed_dim,
            hidden: self.hidden,
            attention_dim: self.attention_dim,
            max_sentence: self.max_sentence,
            batch_size: self.batch_size,
            adam: AdamConfig {
                learning_rate: self.learning_rate,
                clip: self.clip,
                weight_decay: self.sent_weight_decay,
                ..AdamConfig::default()
            },
            embed_dropout: self.embed_dropout,
            shuffle_terms: self.shuffle_terms,
            styles: self.styles.clone(),
            seed: self.seed,
        }
    }

    pub fn clf(&self) -> ClfConfig {
        ClfConfig {
            learning_rate: self.clf_learning_rate,
            epochs: self.clf_epochs,
            folds: self.clf_folds,
            seed: self.seed,
            ..ClfConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = Config::default();
        assert_eq!(Config::parse(&c.to_text()).unwrap(), c);
        assert_eq!(c.term_gen().adam.weight_decay, 1e-6);
        assert_eq!(c.sentence_gen().max_sentence, 30);
    }

    #[test]
    fn parses_and_rejects() {
        let c = Config::parse("# toy\nhidden = 64\nstyles = A, B\n\nembeddings =\n").unwrap();
        assert_eq!(c.hidden, 64);
        assert_eq!(c.styles, vec!["A", "B"]);
        assert_eq!(c.embeddings, None);
        let e = Config::parse("hiden = 3").unwrap_err().to_string();
        assert!(e.contains("line 1") && e.contains("hiden"), "{e}");
        assert!(Config::parse("hidden = x").is_err());
        assert!(Config::parse("hidden = 0").is_err());
        assert!(Config::parse("embed_dropout = 1").is_err());
        assert!(Config::parse("nonsense").is_err());
    }

    #[test]
    fn overrides_apply() {
        let mut c = Config::default();
        c.apply_overrides(&["seed=9".into(), "term_epochs = 2".into()]).unwrap();
        assert_eq!((c.seed, c.term_epochs), (9, 2));
        assert!(c.apply_overrides(&["bad".into()]).is_err());
        assert!(c.check_style("STORY").is_ok());
        assert!(c
            .check_style("ROMANCE")
            .unwrap_err()
            .to_string()
            .contains("DESCRIPTIVE,STORY"));
    }
}
