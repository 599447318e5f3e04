//! Dataset ingestion, training orchestration, checkpoints and evaluation.

use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod embeddings;
pub mod terms;
pub mod toy;

pub use checkpoint::{load_sentence_model, load_term_model, save_sentence_model, save_term_model, Checkpoint};
pub use commands::{
    cmd_evaluate, cmd_generate, cmd_prepare, cmd_report, cmd_train_clf, cmd_train_sent, cmd_train_term, load_captions,
    sentence_examples, term_examples, CaptionRecord, CommandOptions, EvaluationRow,
};
pub use config::Config;
pub use dataset::{load_corpus, load_dataset, parse_dataset, DatasetRecord};
pub use embeddings::{load_embeddings, parse_embeddings, PretrainedRows};
pub use terms::TermExtractor;

use crate::metrics::MetricError;
use crate::nn::NnError;
use crate::sentence_gen::SentenceGenError;
use crate::term_gen::TermGenError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{0}")]
    Missing(String),
    #[error("{0}")]
    Invalid(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Term(#[from] TermGenError),
    #[error(transparent)]
    Sentence(#[from] SentenceGenError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;
