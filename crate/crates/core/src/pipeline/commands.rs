//! The `prepare`, `train-*`, `generate`, `evaluate` and `report` commands.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::checkpoint::{load_sentence_model, load_term_model, save_sentence_model, save_term_model, Checkpoint};
use super::config::Config;
use super::dataset::{load_corpus, load_dataset, write_dataset, DatasetRecord};
use super::embeddings::load_embeddings;
use super::terms::TermExtractor;
use super::toy::{write_toy_workspace, ToyOptions};
use super::{PipelineError, Result};
use crate::metrics::{
    cider, clf_fraction, corpus_bleu, diversity_report, meteor_exact, rouge_l, tokenize, train_clf, ClfModel,
    ClfTraining, CvReport, DiversityReport,
};
use crate::sentence_gen::{SentenceExample, SentenceTokens, Seq2SeqModel, StyleToken};
use crate::term_gen::{FeatureVector, MoreModel, TermExample, TermSequence};
use crate::vocab::Vocabulary;

/// Inputs shared by every command; each command reads the fields it needs.
#[derive(Debug, Clone, Default)]
pub struct CommandOptions {
    pub config: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub corpora: Vec<PathBuf>,
    pub styles: Vec<String>,
    pub expert: Option<usize>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub captions: Option<PathBuf>,
    pub clf: Option<PathBuf>,
    pub term_checkpoint: Option<PathBuf>,
    pub sent_checkpoint: Option<PathBuf>,
    pub resume: bool,
    pub toy: bool,
    pub overrides: Vec<String>,
}

impl CommandOptions {
    pub fn effective_config(&self) -> Result<Config> {
        let mut config = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        config.apply_overrides(&self.overrides)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        Ok(config)
    }

    fn data(&self) -> Result<&Path> {
        self.data
            .as_deref()
            .ok_or_else(|| PipelineError::Missing("--data <dataset.jsonl> is required".into()))
    }

    fn out_dir(&self) -> Result<&Path> {
        std::fs::create_dir_all(&self.out).map_err(|e| PipelineError::io(&self.out, e))?;
        Ok(&self.out)
    }

    fn term_path(&self) -> PathBuf {
        self.term_checkpoint
            .clone()
            .unwrap_or_else(|| self.out.join("term.ckpt"))
    }

    fn sent_path(&self) -> PathBuf {
        self.sent_checkpoint
            .clone()
            .unwrap_or_else(|| self.out.join("sent.ckpt"))
    }

    fn captions_path(&self) -> PathBuf {
        self.captions.clone().unwrap_or_else(|| self.out.join("captions.jsonl"))
    }

    /// `(corpus, style)` pairs from the repeated `--corpus`/`--style` flags.
    fn styled_corpora(&self, config: &Config) -> Result<Vec<(String, Vec<String>)>> {
        if self.corpora.is_empty() || self.corpora.len() != self.styles.len() {
            return Err(PipelineError::Missing(format!(
                "give one --style per --corpus (got {} corpora, {} styles)",
                self.corpora.len(),
                self.styles.len()
            )));
        }
        self.corpora
            .iter()
            .zip(&self.styles)
            .map(|(path, style)| {
                config.check_style(style)?;
                Ok((style.clone(), load_corpus(path)?))
            })
            .collect()
    }
}

fn extractor(config: &Config) -> TermExtractor {
    TermExtractor::new(config.max_terms).with_extra_stopwords(&config.extra_stopwords)
}

fn comment_block(config: &Config) -> String {
    config.to_text().lines().map(|l| format!("# {l}\n")).collect()
}

fn require_file(path: &Path, hint: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(PipelineError::Missing(format!("{} not found; {hint}", path.display())))
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| PipelineError::io(path, e))
}

fn append_line(path: &Path, header: &str, line: &str) -> Result<()> {
    let fresh = !path.exists();
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| PipelineError::io(path, e))?;
    if fresh {
        f.write_all(header.as_bytes()).map_err(|e| PipelineError::io(path, e))?;
    }
    writeln!(f, "{line}").map_err(|e| PipelineError::io(path, e))
}

/// Writes the toy workspace (`--toy`) or fills in missing terms of `--data`.
pub fn cmd_prepare(opts: &CommandOptions) -> Result<()> {
    let out = opts.out_dir()?;
    if opts.toy {
        let ws = write_toy_workspace(
            out,
            &ToyOptions {
                seed: opts.seed.unwrap_or(ToyOptions::default().seed),
                ..ToyOptions::default()
            },
        )?;
        log::info!("toy workspace written to {}", out.display());
        log::info!("config {}", ws.config.display());
        return Ok(());
    }
    let config = opts.effective_config()?;
    let mut records = load_dataset(opts.data()?, config.feature_dim)?;
    let ex = extractor(&config);
    let mut empty = 0;
    for r in records.iter_mut().filter(|r| r.terms.is_none()) {
        let first = r
            .captions
            .iter()
            .map(|c| ex.extract(&tokenize(c)))
            .find(|t| !t.is_empty());
        match first {
            Some(t) => r.terms = Some(t.0),
            None => empty += 1,
        }
    }
    if empty > 0 {
        log::warn!("{empty} records yielded no terms");
    }
    let path = out.join("prepared.jsonl");
    write_dataset(&path, &records)?;
    log::info!("{} records written to {}", records.len(), path.display());
    Ok(())
}

/// Term training pairs: dataset terms once per record, otherwise one
/// extracted sequence per caption. Empty sequences are skipped.
pub fn term_examples(records: &[DatasetRecord], config: &Config) -> Result<Vec<TermExample>> {
    let ex = extractor(config);
    let mut out = Vec::new();
    for r in records {
        let features = FeatureVector::checked(r.features.clone(), config.feature_dim)?;
        let sequences: Vec<TermSequence> = match &r.terms {
            Some(t) => vec![TermSequence::checked(t.clone(), config.max_terms)?],
            None => r.captions.iter().map(|c| ex.extract(&tokenize(c))).collect(),
        };
        for terms in sequences.into_iter().filter(|t| !t.is_empty()) {
            out.push(TermExample {
                features: features.clone(),
                terms,
            });
        }
    }
    if out.is_empty() {
        return Err(PipelineError::Invalid(
            "no training pairs: every term sequence was empty".into(),
        ));
    }
    Ok(out)
}

fn check_resume(saved: &Config, current: &Config) -> Result<()> {
    let mut saved = saved.clone();
    saved.term_epochs = current.term_epochs;
    saved.sent_epochs = current.sent_epochs;
    if &saved != current {
        return Err(PipelineError::Invalid(
            "checkpoint config differs from the current config (only epoch counts may change on resume)".into(),
        ));
    }
    Ok(())
}

/// Trains the expert term generators; returns per-epoch losses (one per expert).
pub fn cmd_train_term(opts: &CommandOptions) -> Result<Vec<Vec<f64>>> {
    let config = opts.effective_config()?;
    let out = opts.out_dir()?.to_path_buf();
    let records = load_dataset(opts.data()?, config.feature_dim)?;
    let examples = term_examples(&records, &config)?;
    let ckpt = opts.term_path();
    let log_path = out.join("term_losses.tsv");

    let mut model = if opts.resume {
        require_file(&ckpt, "nothing to resume")?;
        let (model, saved) = load_term_model(&Checkpoint::load(&ckpt)?)?;
        check_resume(&saved, &config)?;
        model
    } else {
        let vocab = Vocabulary::build(examples.iter().map(|e| e.terms.0.iter()), config.term_vocab);
        let mut model = MoreModel::new(config.term_gen(), vocab)?;
        if let Some(path) = &config.embeddings {
            let rows = load_embeddings(Path::new(path), &model.vocab)?;
            log::info!("term embeddings: coverage {:.3}", rows.coverage);
            for e in &mut model.experts {
                rows.apply(&mut e.params, "embed.table", config.freeze_embeddings)?;
            }
        }
        let _ = std::fs::remove_file(&log_path);
        model
    };

    let header = format!(
        "{}epoch\t{}\n",
        comment_block(&config),
        (1..=config.experts)
            .map(|i| format!("expert{i}"))
            .collect::<Vec<_>>()
            .join("\t")
    );
    let mut history = Vec::new();
    let start = model.experts.first().map_or(0, |e| e.epochs_done);
    for epoch in start + 1..=config.term_epochs {
        let losses = model.train_epoch(&examples)?;
        let cols: Vec<String> = losses.iter().map(|l| format!("{l:.6}")).collect();
        log::info!("term epoch {epoch}: {}", cols.join(" "));
        append_line(&log_path, &header, &format!("{epoch}\t{}", cols.join("\t")))?;
        save_term_model(&model, &config).save(&ckpt)?;
        history.push(losses);
    }
    Ok(history)
}

/// Sentence-generator pairs built from styled corpora via term extraction.
pub fn sentence_examples(corpora: &[(String, Vec<String>)], config: &Config) -> Result<Vec<SentenceExample>> {
    let ex = extractor(config);
    let (mut too_long, mut empty) = (0, 0);
    let mut out = Vec::new();
    for (style, lines) in corpora {
        for line in lines {
            let tokens = tokenize(line);
            if tokens.len() > config.max_sentence {
                too_long += 1;
                continue;
            }
            let terms = ex.extract(&tokens);
            if terms.is_empty() {
                empty += 1;
                continue;
            }
            out.push(SentenceExample {
                terms,
                style: StyleToken::new(style.clone()),
                sentence: SentenceTokens(tokens),
            });
        }
    }
    if too_long + empty > 0 {
        log::warn!("skipped {too_long} sentences over max_sentence and {empty} without terms");
    }
    if out.is_empty() {
        return Err(PipelineError::Invalid(
            "no sentence pairs could be built from the corpora".into(),
        ));
    }
    Ok(out)
}

/// Trains the sentence generator; returns the per-epoch loss.
pub fn cmd_train_sent(opts: &CommandOptions) -> Result<Vec<f64>> {
    let config = opts.effective_config()?;
    let out = opts.out_dir()?.to_path_buf();
    let pairs = sentence_examples(&opts.styled_corpora(&config)?, &config)?;
    let ckpt = opts.sent_path();
    let log_path = out.join("sent_losses.tsv");

    let mut model = if opts.resume {
        require_file(&ckpt, "nothing to resume")?;
        let (model, saved) = load_sentence_model(&Checkpoint::load(&ckpt)?)?;
        check_resume(&saved, &config)?;
        model
    } else {
        let source = Vocabulary::build(pairs.iter().map(|p| p.terms.0.iter()), config.sent_vocab);
        let target = Vocabulary::build(pairs.iter().map(|p| p.sentence.0.iter()), config.sent_vocab);
        let mut model = Seq2SeqModel::new(config.sentence_gen(), &source, target)?;
        if let Some(path) = &config.embeddings {
            let path = Path::new(path);
            let enc = load_embeddings(path, &model.source_vocab)?;
            let dec = load_embeddings(path, &model.target_vocab)?;
            log::info!(
                "sentence embeddings: coverage {:.3} / {:.3}",
                enc.coverage,
                dec.coverage
            );
            enc.apply(&mut model.params, "enc.embed.table", config.freeze_embeddings)?;
            dec.apply(&mut model.params, "dec.embed.table", config.freeze_embeddings)?;
        }
        let _ = std::fs::remove_file(&log_path);
        model
    };

    let header = format!("{}epoch\tloss\n", comment_block(&config));
    let mut history = Vec::new();
    for epoch in model.epochs_done + 1..=config.sent_epochs {
        let loss = model.train_epoch(&pairs, config.shuffle_terms)?;
        log::info!("sentence epoch {epoch}: {loss:.6}");
        append_line(&log_path, &header, &format!("{epoch}\t{loss:.6}"))?;
        save_sentence_model(&model, &config).save(&ckpt)?;
        history.push(loss);
    }
    Ok(history)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ClfFile {
    config: String,
    folds: usize,
    precision: f64,
    recall: f64,
    model: ClfModel,
}

/// Trains the style classifier: the configured descriptive style is the
/// negative class, every other style is positive.
pub fn cmd_train_clf(opts: &CommandOptions) -> Result<ClfTraining> {
    let config = opts.effective_config()?;
    let out = opts.out_dir()?.to_path_buf();
    let (mut styled, mut plain) = (Vec::new(), Vec::new());
    for (style, lines) in opts.styled_corpora(&config)? {
        let target = if style == config.descriptive_style {
            &mut plain
        } else {
            &mut styled
        };
        target.extend(lines.iter().map(|l| tokenize(l)));
    }
    let training = train_clf(&styled, &plain, &config.clf())?;
    let CvReport {
        folds,
        precision,
        recall,
        ..
    } = training.cv;
    log::info!("clf {folds}-fold CV: precision {precision:.4}, recall {recall:.4}");
    let file = ClfFile {
        config: config.to_text(),
        folds,
        precision,
        recall,
        model: training.model.clone(),
    };
    write_text(&out.join("clf.json"), &serde_json::to_string_pretty(&file)?)?;
    Ok(training)
}

pub fn load_clf(path: &Path) -> Result<ClfModel> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    Ok(serde_json::from_str::<ClfFile>(&text)?.model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub id: String,
    pub expert: usize,
    pub k: f64,
    pub style: String,
    pub terms: Vec<String>,
    pub caption: String,
}

/// Runs every (or the selected) expert and decodes one caption per style.
pub fn cmd_generate(opts: &CommandOptions) -> Result<Vec<CaptionRecord>> {
    let config = opts.effective_config()?;
    let out = opts.out_dir()?.to_path_buf();
    let (term_path, sent_path) = (opts.term_path(), opts.sent_path());
    require_file(&term_path, "run `more train-term` first")?;
    require_file(&sent_path, "run `more train-sent` first")?;
    let (terms_model, term_config) = load_term_model(&Checkpoint::load(&term_path)?)?;
    let (sent_model, _) = load_sentence_model(&Checkpoint::load(&sent_path)?)?;
    let records = load_dataset(opts.data()?, term_config.feature_dim)?;

    let styles = if opts.styles.is_empty() {
        sent_model.styles().to_vec()
    } else {
        opts.styles.clone()
    };
    for s in &styles {
        config.check_style(s)?;
    }
    let experts: Vec<usize> = match opts.expert {
        Some(i) => {
            terms_model.expert(i)?;
            vec![i]
        }
        None => (1..=terms_model.experts.len()).collect(),
    };

    let mut captions = Vec::new();
    for r in &records {
        let features = FeatureVector(r.features.clone());
        for &i in &experts {
            let terms = terms_model.generate_terms(&features, i)?;
            for style in &styles {
                let caption = if terms.is_empty() {
                    log::warn!("expert {i} produced no terms for '{}'", r.id);
                    String::new()
                } else {
                    sent_model
                        .decode_sentence(&terms, &StyleToken::new(style.clone()))?
                        .text()
                };
                captions.push(CaptionRecord {
                    id: r.id.clone(),
                    expert: i,
                    k: terms_model.experts[i - 1].spec.k,
                    style: style.clone(),
                    terms: terms.0.clone(),
                    caption,
                });
            }
        }
    }
    let mut text = serde_json::to_string(&serde_json::json!({ "config": config.to_text() }))?;
    text.push('\n');
    for c in &captions {
        text.push_str(&serde_json::to_string(c)?);
        text.push('\n');
    }
    write_text(&out.join("captions.jsonl"), &text)?;
    log::info!("{} captions written", captions.len());
    Ok(captions)
}

/// Reads a captions file, skipping the config header line.
pub fn load_captions(path: &Path) -> Result<Vec<CaptionRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| PipelineError::Dataset(format!("{} line {}: {e}", path.display(), n + 1)))?;
        if value.get("config").is_some() {
            continue;
        }
        out.push(
            serde_json::from_value(value)
                .map_err(|e| PipelineError::Dataset(format!("{} line {}: {e}", path.display(), n + 1)))?,
        );
    }
    if out.is_empty() {
        return Err(PipelineError::Invalid(format!(
            "{} contains no captions",
            path.display()
        )));
    }
    Ok(out)
}

fn group_captions(
    captions: &[CaptionRecord],
    expert: Option<usize>,
    styles: &[String],
) -> BTreeMap<(usize, String), Vec<CaptionRecord>> {
    let mut groups: BTreeMap<(usize, String), Vec<CaptionRecord>> = BTreeMap::new();
    for c in captions {
        if expert.is_some_and(|e| e != c.expert) || (!styles.is_empty() && !styles.contains(&c.style)) {
            continue;
        }
        groups.entry((c.expert, c.style.clone())).or_default().push(c.clone());
    }
    groups
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRow {
    pub expert: usize,
    pub k: f64,
    pub style: String,
    pub captions: usize,
    pub bleu: [f64; 4],
    pub meteor_exact: f64,
    pub rouge_l: f64,
    pub cider: f64,
    pub clf: Option<f64>,
}

/// Scores each (expert, style) caption group against the dataset references.
pub fn cmd_evaluate(opts: &CommandOptions) -> Result<Vec<EvaluationRow>> {
    let config = opts.effective_config()?;
    let out = opts.out_dir()?.to_path_buf();
    let records = load_dataset(opts.data()?, config.feature_dim)?;
    let refs: BTreeMap<&str, Vec<Vec<String>>> = records
        .iter()
        .map(|r| (r.id.as_str(), r.captions.iter().map(|c| tokenize(c)).collect()))
        .collect();
    let captions = load_captions(&opts.captions_path())?;
    let clf = opts.clf.as_deref().map(load_clf).transpose()?;

    let mut rows = Vec::new();
    for ((expert, style), group) in group_captions(&captions, opts.expert, &opts.styles) {
        let mut hyps = Vec::new();
        let mut group_refs = Vec::new();
        for c in &group {
            let r = refs
                .get(c.id.as_str())
                .ok_or_else(|| PipelineError::Invalid(format!("caption id '{}' not in the dataset", c.id)))?;
            hyps.push(tokenize(&c.caption));
            group_refs.push(r.clone());
        }
        let n = hyps.len() as f64;
        let mut bleu = [0.0; 4];
        for (i, b) in bleu.iter_mut().enumerate() {
            *b = corpus_bleu(&hyps, &group_refs, i + 1)?;
        }
        let mut meteor = 0.0;
        let mut rouge = 0.0;
        for (h, r) in hyps.iter().zip(&group_refs) {
            meteor += meteor_exact(h, r)?;
            rouge += rouge_l(h, r)?;
        }
        let cider = if hyps.len() >= 2 {
            cider(&hyps, &group_refs)?.mean
        } else {
            log::warn!("CIDEr skipped for expert {expert} / {style}: needs at least 2 images");
            f64::NAN
        };
        rows.push(EvaluationRow {
            expert,
            k: group[0].k,
            style,
            captions: hyps.len(),
            bleu,
            meteor_exact: meteor / n,
            rouge_l: rouge / n,
            cider,
            clf: clf.as_ref().map(|m| clf_fraction(m, &hyps)).transpose()?,
        });
    }
    if rows.is_empty() {
        return Err(PipelineError::Invalid(
            "no captions match the requested expert/style".into(),
        ));
    }

    let mut text = comment_block(&config);
    text.push_str("expert\tk\tstyle\tcaptions\tbleu1\tbleu2\tbleu3\tbleu4\tmeteor_exact\trouge_l\tcider\tclf\n");
    for r in &rows {
        let label = if r.k == 1.0 {
            "full model".to_string()
        } else {
            format!("{:.4}", r.k)
        };
        let clf = r.clf.map_or("-".to_string(), |v| format!("{v:.4}"));
        writeln!(
            text,
            "{}\t{label}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{clf}",
            r.expert,
            r.style,
            r.captions,
            r.bleu[0],
            r.bleu[1],
            r.bleu[2],
            r.bleu[3],
            r.meteor_exact,
            r.rouge_l,
            r.cider
        )
        .expect("string write");
    }
    write_text(&out.join("evaluation.tsv"), &text)?;
    log::info!("evaluation:\n{text}");
    Ok(rows)
}

/// Diversity report (distinct words, words-per-sentence mean/std) per expert
/// for one style, plus pairwise vocabulary overlap.
pub fn cmd_report(opts: &CommandOptions) -> Result<DiversityReport> {
    let config = opts.effective_config()?;
    let out = opts.out_dir()?.to_path_buf();
    let captions = load_captions(&opts.captions_path())?;
    let style = opts
        .styles
        .first()
        .cloned()
        .unwrap_or_else(|| config.descriptive_style.clone());
    let groups = group_captions(&captions, opts.expert, std::slice::from_ref(&style));
    if groups.is_empty() {
        return Err(PipelineError::Invalid(format!("no captions with style '{style}'")));
    }
    let per_expert: Vec<(String, Vec<Vec<String>>)> = groups
        .into_iter()
        .map(|((expert, _), group)| {
            let k = group[0].k;
            let label = if k == 1.0 {
                format!("{expert} (full)")
            } else {
                format!("{expert} (k={k:.2})")
            };
            (label, group.iter().map(|c| tokenize(&c.caption)).collect())
        })
        .collect();
    let report = diversity_report(&per_expert)?;

    let mut text = comment_block(&config);
    writeln!(text, "# style = {style}").expect("string write");
    text.push_str(&report.to_string());
    text.push('\n');
    for a in 0..report.rows.len() {
        for b in a + 1..report.rows.len() {
            let o = report.overlap(a, b);
            writeln!(
                text,
                "{} vs {}: shared {}, only first {}, only second {}",
                report.rows[a].expert,
                report.rows[b].expert,
                o.shared.len(),
                o.only_first.len(),
                o.only_second.len()
            )
            .expect("string write");
        }
    }
    text.push('\n');
    for row in &report.rows {
        let words: Vec<&str> = row.vocabulary.iter().map(String::as_str).collect();
        writeln!(text, "vocabulary {}: {}", row.expert, words.join(" ")).expect("string write");
    }
    write_text(&out.join("report.txt"), &text)?;
    log::info!("diversity report:\n{report}");
    Ok(report)
}
