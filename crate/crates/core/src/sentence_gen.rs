//! Style-controlled sequence-to-sequence sentence generator.
//!
//! The encoder reads the semantic terms followed by a style token through an
//! embedding layer, batch normalization and a bidirectional GRU. The decoder
//! is a GRU fed with the previous word and an additive-attention context; its
//! initial state is a dense map of the final encoder state.

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::linalg::Matrix;
use crate::nn::{
    argmax, cross_entropy_backward, row_dropout_scales, softmax_cross_entropy, zeros_like, AdamConfig, AdamState,
    Attention, BatchNorm, BiGru, Dense, Embedding, GruParams, NnError, ParameterSet,
};
use crate::rng::{seeded, Rng};
use crate::term_gen::TermSequence;
use crate::vocab::{Vocabulary, BOS, EOS, UNK};

#[derive(Debug, Error, PartialEq)]
pub enum SentenceGenError {
    #[error("unknown style '{label}' (valid: {})", .valid.join(", "))]
    UnknownStyle { label: String, valid: Vec<String> },
    #[error("sentence of length {len} exceeds the maximum of {max}")]
    TooLong { len: usize, max: usize },
    #[error("term sequence is empty")]
    EmptyTerms,
    #[error("no training examples")]
    EmptyData,
    #[error(transparent)]
    Nn(#[from] NnError),
}

pub type Result<T> = std::result::Result<T, SentenceGenError>;

/// A requested output style such as `DESCRIPTIVE` or `STORY`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StyleToken(pub String);

impl StyleToken {
    pub fn new(label: impl Into<String>) -> Self {
        Self(label.into())
    }

    pub fn label(&self) -> &str {
        &self.0
    }

    /// Encoder vocabulary entry for this style.
    pub fn vocab_token(&self) -> String {
        format!("<{}>", self.0)
    }
}

/// Decoded words, without the terminating EOS.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct SentenceTokens(pub Vec<String>);

impl SentenceTokens {
    pub fn text(&self) -> String {
        self.0.join(" ")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceExample {
    pub terms: TermSequence,
    pub style: StyleToken,
    pub sentence: SentenceTokens,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceGenConfig {
    pub embed_dim: usize,
    pub hidden: usize,
    pub attention_dim: usize,
    pub max_sentence: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub embed_dropout: f64,
    pub shuffle_terms: bool,
    pub styles: Vec<String>,
    pub seed: u64,
}

impl Default for SentenceGenConfig {
    fn default() -> Self {
        Self {
            embed_dim: 512,
            hidden: 512,
            attention_dim: 512,
            max_sentence: 30,
            batch_size: 64,
            adam: AdamConfig::default(),
            embed_dropout: 0.1,
            shuffle_terms: true,
            styles: vec!["DESCRIPTIVE".into(), "STORY".into()],
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
struct EncodedSentence {
    /// Term ids followed by the style id.
    source: Vec<usize>,
    inputs: Vec<usize>,
    targets: Vec<usize>,
}

struct DecoderStep {
    attention: crate::nn::AttentionCache,
    gru: crate::nn::GruCache,
    input: usize,
    features: Vec<f64>,
    probs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Seq2SeqModel {
    pub config: SentenceGenConfig,
    pub source_vocab: Vocabulary,
    pub target_vocab: Vocabulary,
    pub params: ParameterSet,
    pub source_embedding: Embedding,
    pub norm: BatchNorm,
    pub encoder: BiGru,
    pub bridge: Dense,
    pub target_embedding: Embedding,
    pub decoder: GruParams,
    pub attention: Attention,
    pub output: Dense,
    pub optimizer: AdamState,
    pub rng: Rng,
    pub epochs_done: usize,
}

impl Seq2SeqModel {
    /// `source_terms` should not contain style tokens; they are added here.
    pub fn new(config: SentenceGenConfig, source_terms: &Vocabulary, target_vocab: Vocabulary) -> Result<Self> {
        let styles = config.styles.iter().map(|s| StyleToken::new(s.clone()).vocab_token());
        let source_vocab = Vocabulary::with_tokens(styles.chain(source_terms.tokens().iter().cloned()));
        let mut rng = seeded(config.seed);
        let mut params = ParameterSet::new();
        let (e, h) = (config.embed_dim, config.hidden);
        let source_embedding = Embedding::new(&mut params, "enc.embed", source_vocab.len(), e, &mut rng)?;
        let norm = BatchNorm::new(&mut params, "enc.bn", e)?;
        let encoder = BiGru::new(&mut params, "enc.gru", e, h, &mut rng)?;
        let bridge = Dense::new(&mut params, "bridge", 2 * h, h, &mut rng)?;
        let target_embedding = Embedding::new(&mut params, "dec.embed", target_vocab.len(), e, &mut rng)?;
        let decoder = GruParams::new(&mut params, "dec.gru", e + 2 * h, h, &mut rng)?;
        let attention = Attention::new(&mut params, "attn", h, 2 * h, config.attention_dim, &mut rng)?;
        let output = Dense::new(&mut params, "out", 3 * h, target_vocab.len(), &mut rng)?;
        let optimizer = AdamState::new(&params, config.adam);
        Ok(Self {
            config,
            source_vocab,
            target_vocab,
            params,
            source_embedding,
            norm,
            encoder,
            bridge,
            target_embedding,
            decoder,
            attention,
            output,
            optimizer,
            rng,
            epochs_done: 0,
        })
    }

    pub fn styles(&self) -> &[String] {
        &self.config.styles
    }

    fn style_id(&self, style: &StyleToken) -> Result<usize> {
        if !self.config.styles.iter().any(|s| s == style.label()) {
            return Err(SentenceGenError::UnknownStyle {
                label: style.label().to_string(),
                valid: self.config.styles.clone(),
            });
        }
        Ok(self.source_vocab.encode(&style.vocab_token()))
    }

    fn encode_source(&self, terms: &TermSequence, style: &StyleToken) -> Result<Vec<usize>> {
        if terms.is_empty() {
            return Err(SentenceGenError::EmptyTerms);
        }
        let style = self.style_id(style)?;
        let mut ids: Vec<usize> = terms.0.iter().map(|t| self.source_vocab.encode(t)).collect();
        ids.push(style);
        Ok(ids)
    }

    fn encode_example(&self, ex: &SentenceExample) -> Result<EncodedSentence> {
        let source = self.encode_source(&ex.terms, &ex.style)?;
        let words = &ex.sentence.0;
        if words.len() > self.config.max_sentence {
            return Err(SentenceGenError::TooLong {
                len: words.len(),
                max: self.config.max_sentence,
            });
        }
        let ids: Vec<usize> = words.iter().map(|w| self.target_vocab.encode(w)).collect();
        let mut inputs = vec![BOS];
        inputs.extend(&ids);
        let mut targets = ids;
        targets.push(EOS);
        Ok(EncodedSentence {
            source,
            inputs,
            targets,
        })
    }

    fn embed_rows(&self, ids: &[usize], scales: &[f64]) -> Result<Vec<Vec<f64>>> {
        ids.iter()
            .map(|&i| Ok(self.source_embedding.lookup(&self.params, i, scales[i])?))
            .collect()
    }

    /// Encoder states for `terms` + `style`, with batch normalization in inference mode.
    pub fn encode_terms(&self, terms: &TermSequence, style: &StyleToken) -> Result<Vec<Vec<f64>>> {
        let source = self.encode_source(terms, style)?;
        let ones = vec![1.0; self.source_vocab.len()];
        let rows = self.embed_rows(&source, &ones)?;
        let batch = Matrix::from_rows(&rows);
        let normalized = self.norm.forward_infer(&self.params, &batch)?;
        let inputs: Vec<Vec<f64>> = (0..normalized.rows()).map(|r| normalized.row(r).to_vec()).collect();
        Ok(self.encoder.forward(&self.params, &inputs)?.states)
    }

    fn initial_state(&self, states: &[Vec<f64>]) -> Result<Vec<f64>> {
        let last = states.last().expect("non-empty encoder output");
        Ok(self
            .bridge
            .forward(&self.params, last)?
            .into_iter()
            .map(f64::tanh)
            .collect())
    }

    /// Teacher-forced pass for one example whose normalized encoder inputs are
    /// given. Returns the summed loss and, when accumulating, `dL/dinputs`.
    fn example_pass(
        &mut self,
        inputs: &[Vec<f64>],
        ex: &EncodedSentence,
        target_scales: &[f64],
        accumulate: bool,
    ) -> Result<(f64, Vec<Vec<f64>>)> {
        let h = self.config.hidden;
        let encoded = self.encoder.forward(&self.params, inputs)?;
        let states = &encoded.states;
        let s0 = self.initial_state(states)?;
        let keys = self.attention.project_keys(&self.params, states)?;

        let mut s = s0.clone();
        let mut steps = Vec::with_capacity(ex.inputs.len());
        let mut loss = 0.0;
        for (&input, &target) in ex.inputs.iter().zip(&ex.targets) {
            let (context, attention) = self.attention.forward(&self.params, &s, states, &keys)?;
            let mut x = self
                .target_embedding
                .lookup(&self.params, input, target_scales[input])?;
            x.extend_from_slice(&context);
            let (next, gru) = self.decoder.step(&self.params, &x, &s)?;
            let mut features = next.clone();
            features.extend_from_slice(&context);
            let logits = self.output.forward(&self.params, &features)?;
            let (l, probs) = softmax_cross_entropy(&logits, target)?;
            loss += l;
            steps.push(DecoderStep {
                attention,
                gru,
                input,
                features,
                probs,
            });
            s = next;
        }
        if !accumulate {
            return Ok((loss, Vec::new()));
        }

        let e = self.config.embed_dim;
        let mut d_states = zeros_like(states);
        let mut d_keys = zeros_like(&keys);
        let mut carry = vec![0.0; h];
        for (step, &target) in steps.iter().zip(&ex.targets).rev() {
            let d_logits = cross_entropy_backward(&step.probs, target, 1.0);
            let d_features = self.output.backward(&mut self.params, &step.features, &d_logits);
            let ds: Vec<f64> = d_features[..h].iter().zip(&carry).map(|(a, b)| a + b).collect();
            let mut d_context = d_features[h..].to_vec();
            let (dx, mut ds_prev) = self.decoder.step_backward(&mut self.params, &step.gru, &ds);
            self.target_embedding
                .backward(&mut self.params, step.input, target_scales[step.input], &dx[..e]);
            for (a, b) in d_context.iter_mut().zip(&dx[e..]) {
                *a += b;
            }
            let ds_attn = self.attention.backward(
                &mut self.params,
                &step.attention,
                states,
                &d_context,
                &mut d_keys,
                &mut d_states,
            );
            for (a, b) in ds_prev.iter_mut().zip(ds_attn) {
                *a += b;
            }
            carry = ds_prev;
        }
        self.attention
            .keys_backward(&mut self.params, states, &d_keys, &mut d_states);
        let d_pre: Vec<f64> = carry.iter().zip(&s0).map(|(d, s)| d * (1.0 - s * s)).collect();
        let last = states.len() - 1;
        let d_last = self.bridge.backward(&mut self.params, &states[last], &d_pre);
        for (a, b) in d_states[last].iter_mut().zip(d_last) {
            *a += b;
        }
        let d_inputs = self.encoder.backward(&mut self.params, &encoded, &d_states);
        Ok((loss, d_inputs))
    }

    /// Forward (and optionally backward) over a mini-batch; batch statistics
    /// are taken over every source position of every example in the batch.
    fn batch_pass(
        &mut self,
        batch: &[EncodedSentence],
        source_scales: &[f64],
        target_scales: &[f64],
        accumulate: bool,
    ) -> Result<(f64, usize)> {
        let mut rows = Vec::new();
        for ex in batch {
            rows.extend(self.embed_rows(&ex.source, source_scales)?);
        }
        let raw = Matrix::from_rows(&rows);
        let (normalized, cache) = self.norm.forward_train(&mut self.params, &raw)?;

        let mut offset = 0;
        let mut loss = 0.0;
        let mut tokens = 0;
        let mut d_normalized = Matrix::zeros(raw.rows(), raw.cols());
        for ex in batch {
            let n = ex.source.len();
            let inputs: Vec<Vec<f64>> = (offset..offset + n).map(|r| normalized.row(r).to_vec()).collect();
            let (l, d_inputs) = self.example_pass(&inputs, ex, target_scales, accumulate)?;
            loss += l;
            tokens += ex.targets.len();
            for (i, d) in d_inputs.into_iter().enumerate() {
                d_normalized.row_mut(offset + i).copy_from_slice(&d);
            }
            offset += n;
        }
        if accumulate {
            let d_raw = self.norm.backward(&mut self.params, &cache, &d_normalized);
            let mut r = 0;
            for ex in batch {
                for &id in &ex.source {
                    self.source_embedding
                        .backward(&mut self.params, id, source_scales[id], d_raw.row(r));
                    r += 1;
                }
            }
        }
        Ok((loss, tokens))
    }

    fn encode_all(&self, data: &[SentenceExample]) -> Result<Vec<EncodedSentence>> {
        if data.is_empty() {
            return Err(SentenceGenError::EmptyData);
        }
        data.iter().map(|ex| self.encode_example(ex)).collect()
    }

    /// One pass over `data`; returns the mean per-token training loss.
    ///
    /// With `shuffle` each example's terms are permuted afresh (the style
    /// token stays last).
    pub fn train_epoch(&mut self, data: &[SentenceExample], shuffle: bool) -> Result<f64> {
        let encoded = self.encode_all(data)?;
        let mut order: Vec<usize> = (0..encoded.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total_loss = 0.0;
        let mut total_tokens = 0;
        for chunk in order.chunks(self.config.batch_size.max(1)) {
            self.params.zero_gradients();
            let source_scales = row_dropout_scales(self.source_vocab.len(), self.config.embed_dropout, &mut self.rng)?;
            let target_scales = row_dropout_scales(self.target_vocab.len(), self.config.embed_dropout, &mut self.rng)?;
            let batch: Vec<EncodedSentence> = chunk
                .iter()
                .map(|&i| {
                    let mut ex = encoded[i].clone();
                    if shuffle {
                        let n = ex.source.len() - 1;
                        ex.source[..n].shuffle(&mut self.rng);
                    }
                    ex
                })
                .collect();
            let (loss, tokens) = self.batch_pass(&batch, &source_scales, &target_scales, true)?;
            self.params.scale_gradients(1.0 / tokens as f64);
            self.optimizer.step(&mut self.params)?;
            total_loss += loss;
            total_tokens += tokens;
        }
        self.epochs_done += 1;
        Ok(total_loss / total_tokens as f64)
    }

    /// Greedy decoding with attention; batch normalization in inference mode.
    pub fn decode_sentence(&self, terms: &TermSequence, style: &StyleToken) -> Result<SentenceTokens> {
        Ok(self.decode_with_attention(terms, style)?.0)
    }

    /// Like [`Seq2SeqModel::decode_sentence`], also returning the attention
    /// weights used at each emitted step.
    pub fn decode_with_attention(
        &self,
        terms: &TermSequence,
        style: &StyleToken,
    ) -> Result<(SentenceTokens, Vec<Vec<f64>>)> {
        let states = self.encode_terms(terms, style)?;
        let keys = self.attention.project_keys(&self.params, &states)?;
        let mut s = self.initial_state(&states)?;
        let mut prev = BOS;
        let mut words = Vec::new();
        let mut weights = Vec::new();
        while words.len() < self.config.max_sentence {
            let (context, cache) = self.attention.forward(&self.params, &s, &states, &keys)?;
            let mut x = self.target_embedding.lookup(&self.params, prev, 1.0)?;
            x.extend_from_slice(&context);
            s = self.decoder.step(&self.params, &x, &s)?.0;
            let mut features = s.clone();
            features.extend_from_slice(&context);
            let mut logits = self.output.forward(&self.params, &features)?;
            logits[BOS] = f64::NEG_INFINITY;
            logits[UNK] = f64::NEG_INFINITY;
            let next = argmax(&logits);
            weights.push(cache.weights);
            if next == EOS {
                break;
            }
            words.push(self.target_vocab.token(next).to_string());
            prev = next;
        }
        Ok((SentenceTokens(words), weights))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{assert_grad_close, numeric_param_grad};

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn example(terms: &str, style: &str, sentence: &str) -> SentenceExample {
        SentenceExample {
            terms: TermSequence(words(terms)),
            style: StyleToken::new(style),
            sentence: SentenceTokens(words(sentence)),
        }
    }

    fn model_for(data: &[SentenceExample], hidden: usize) -> Seq2SeqModel {
        let src = Vocabulary::build(data.iter().map(|e| e.terms.0.iter()), 200);
        let tgt = Vocabulary::build(data.iter().map(|e| e.sentence.0.iter()), 200);
        let config = SentenceGenConfig {
            embed_dim: 8,
            hidden,
            attention_dim: 8,
            max_sentence: 12,
            batch_size: 8,
            adam: AdamConfig {
                learning_rate: 1e-2,
                ..AdamConfig::default()
            },
            embed_dropout: 0.0,
            shuffle_terms: false,
            styles: vec!["DESCRIPTIVE".into(), "STORY".into()],
            seed: 5,
        };
        Seq2SeqModel::new(config, &src, tgt).unwrap()
    }

    fn corpus() -> Vec<SentenceExample> {
        vec![
            example(
                "girl_NOUN posture_NOUN refrigerator_NOUN",
                "DESCRIPTIVE",
                "a girl standing in a kitchen beside a refrigerator",
            ),
            example(
                "girl_NOUN posture_NOUN refrigerator_NOUN",
                "STORY",
                "lo i saw the girl standing by the refrigerator",
            ),
            example("dog_NOUN park_NOUN", "DESCRIPTIVE", "a dog in a park"),
            example("dog_NOUN park_NOUN", "STORY", "lo i saw my dog in the park"),
        ]
    }

    #[test]
    fn encoder_emits_one_state_per_term_plus_style() {
        let data = corpus();
        let model = model_for(&data, 6);
        let terms = TermSequence(words("dog_NOUN"));
        let states = model.encode_terms(&terms, &StyleToken::new("STORY")).unwrap();
        assert_eq!(states.len(), 2);
        assert_eq!(states[0].len(), 12);
        assert_eq!(states, model.encode_terms(&terms, &StyleToken::new("STORY")).unwrap());
        let other = model.encode_terms(&terms, &StyleToken::new("DESCRIPTIVE")).unwrap();
        assert!(states[1].iter().zip(&other[1]).any(|(a, b)| (a - b).abs() > 1e-9));
    }

    #[test]
    fn unknown_style_lists_valid_labels() {
        let data = corpus();
        let model = model_for(&data, 6);
        let err = model
            .decode_sentence(&TermSequence(words("dog_NOUN")), &StyleToken::new("ROMANCE"))
            .unwrap_err();
        assert!(err.to_string().contains("DESCRIPTIVE, STORY"), "{err}");
        assert_eq!(
            model.encode_terms(&TermSequence(vec![]), &StyleToken::new("STORY")),
            Err(SentenceGenError::EmptyTerms)
        );
    }

    #[test]
    fn overlong_sentences_rejected_at_ingestion() {
        let data = corpus();
        let mut model = model_for(&data, 6);
        let long = example("dog_NOUN", "STORY", &["w"; 13].join(" "));
        assert_eq!(
            model.train_epoch(&[long], false),
            Err(SentenceGenError::TooLong { len: 13, max: 12 })
        );
    }

    #[test]
    fn batch_gradients_match_finite_differences() {
        let data = corpus();
        let mut model = model_for(&data, 4);
        let batch = model.encode_all(&data[..2]).unwrap();
        let ones_s = vec![1.0; model.source_vocab.len()];
        let ones_t = vec![1.0; model.target_vocab.len()];
        model.params.zero_gradients();
        model.batch_pass(&batch, &ones_s, &ones_t, true).unwrap();
        let ids: Vec<_> = model
            .params
            .iter()
            .filter(|(_, p)| p.trainable)
            .map(|(id, _)| id)
            .collect();
        for id in ids {
            let numeric = numeric_param_grad(&model.params, id, |ps| {
                let mut probe = model.clone();
                probe.params = ps.clone();
                probe.batch_pass(&batch, &ones_s, &ones_t, false).unwrap().0
            });
            assert_grad_close(model.params.grad(id).as_slice(), &numeric, &model.params.get(id).name);
        }
    }

    #[test]
    fn memorizes_a_single_triple() {
        let data = corpus();
        let mut model = model_for(&data, 32);
        let one = &data[..1];
        let mut loss = f64::INFINITY;
        for _ in 0..300 {
            loss = model.train_epoch(one, false).unwrap();
        }
        assert!(loss < 0.1, "loss {loss}");
        let out = model.decode_sentence(&one[0].terms, &one[0].style).unwrap();
        assert_eq!(out, one[0].sentence);
    }

    #[test]
    fn shuffling_is_seeded_and_actually_applied() {
        let data = corpus();
        let run = |shuffle: bool| {
            let mut m = model_for(&data, 6);
            (0..3)
                .map(|_| m.train_epoch(&data, shuffle).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(true), run(true));
        assert_ne!(run(true), run(false));
    }

    #[test]
    fn style_token_selects_the_marker() {
        let data = corpus();
        let mut model = model_for(&data, 32);
        for _ in 0..300 {
            model.train_epoch(&data, false).unwrap();
        }
        let terms = TermSequence(words("dog_NOUN park_NOUN"));
        let story = model.decode_sentence(&terms, &StyleToken::new("STORY")).unwrap();
        let plain = model.decode_sentence(&terms, &StyleToken::new("DESCRIPTIVE")).unwrap();
        assert!(story.0.contains(&"lo".to_string()), "{story:?}");
        assert!(!plain.0.contains(&"lo".to_string()), "{plain:?}");

        let girl = TermSequence(words("girl_NOUN posture_NOUN refrigerator_NOUN"));
        let (out, weights) = model
            .decode_with_attention(&girl, &StyleToken::new("DESCRIPTIVE"))
            .unwrap();
        assert!(out.0.contains(&"girl".to_string()) && out.0.contains(&"refrigerator".to_string()));
        for w in weights {
            assert!(w.iter().all(|&x| x >= 0.0));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
