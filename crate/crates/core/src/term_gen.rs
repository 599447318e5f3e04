//! Mixture of recurrent experts mapping image features to semantic terms.
//!
//! Every expert is a GRU decoder whose initial state is a dense projection
//! of the feature vector. Experts share architecture, initialisation and
//! data order; they differ only in the diversity factor used when their
//! recurrent matrices are low-rank filtered at the end of each epoch.

use thiserror::Error;

use crate::nn::{
    argmax, cross_entropy_backward, dropout_scales, row_dropout_scales, softmax_cross_entropy, AdamConfig, AdamState,
    Dense, Embedding, GruParams, NnError, ParameterSet,
};
use crate::rng::{seeded, Rng};
use crate::svd_filter::{apply_filter, ExpertSpec, FilterError};
use crate::vocab::{Vocabulary, BOS, EOS, UNK};

#[derive(Debug, Error, PartialEq)]
pub enum TermGenError {
    #[error("feature vector has length {got}, expected {expected}")]
    FeatureLength { expected: usize, got: usize },
    #[error("term sequence of length {len} exceeds the maximum of {max}")]
    TooLong { len: usize, max: usize },
    #[error("no training examples")]
    EmptyData,
    #[error("expert index {index} outside 1..={count}")]
    ExpertOutOfRange { index: usize, count: usize },
    #[error("term '{0}' collides with a reserved vocabulary token")]
    ReservedTerm(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Filter(#[from] FilterError),
}

pub type Result<T> = std::result::Result<T, TermGenError>;

/// Precomputed image features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn checked(values: Vec<f64>, expected: usize) -> Result<Self> {
        if values.len() != expected {
            return Err(TermGenError::FeatureLength {
                expected,
                got: values.len(),
            });
        }
        Ok(Self(values))
    }
}

/// Ordered semantic terms such as `girl_NOUN standing_VERB`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TermSequence(pub Vec<String>);

impl TermSequence {
    pub fn checked(terms: Vec<String>, max_len: usize) -> Result<Self> {
        if terms.len() > max_len {
            return Err(TermGenError::TooLong {
                len: terms.len(),
                max: max_len,
            });
        }
        if let Some(t) = terms.iter().find(|t| t.starts_with('<') && t.ends_with('>')) {
            return Err(TermGenError::ReservedTerm(t.clone()));
        }
        Ok(Self(terms))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn join(&self, sep: &str) -> String {
        self.0.join(sep)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermExample {
    pub features: FeatureVector,
    pub terms: TermSequence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermGenConfig {
    pub feature_dim: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub experts: usize,
    pub max_terms: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub embed_dropout: f64,
    pub feature_dropout: f64,
    /// Run the low-rank filter after every epoch.
    pub filter: bool,
    pub reset_moments_after_filter: bool,
    pub seed: u64,
}

impl Default for TermGenConfig {
    fn default() -> Self {
        Self {
            feature_dim: 2048,
            embed_dim: 512,
            hidden: 512,
            experts: 3,
            max_terms: 20,
            batch_size: 64,
            adam: AdamConfig {
                weight_decay: 1e-6,
                ..AdamConfig::default()
            },
            embed_dropout: 0.1,
            feature_dropout: 0.1,
            filter: true,
            reset_moments_after_filter: false,
            seed: 1,
        }
    }
}

/// One GRU decoder with its own parameters, optimizer state and random stream.
#[derive(Debug, Clone)]
pub struct Expert {
    pub spec: ExpertSpec,
    pub params: ParameterSet,
    pub projection: Dense,
    pub embedding: Embedding,
    pub gru: GruParams,
    pub output: Dense,
    pub optimizer: AdamState,
    pub rng: Rng,
    pub epochs_done: usize,
}

struct Encoded<'a> {
    features: &'a [f64],
    inputs: Vec<usize>,
    targets: Vec<usize>,
}

impl Expert {
    fn new(index: usize, config: &TermGenConfig, vocab_size: usize) -> Result<Self> {
        let mut rng = seeded(config.seed);
        let mut params = ParameterSet::new();
        let projection = Dense::new(&mut params, "proj", config.feature_dim, config.hidden, &mut rng)?;
        let embedding = Embedding::new(&mut params, "embed", vocab_size, config.embed_dim, &mut rng)?;
        let gru = GruParams::new(&mut params, "gru", config.embed_dim, config.hidden, &mut rng)?;
        let output = Dense::new(&mut params, "out", config.hidden, vocab_size, &mut rng)?;
        let spec = ExpertSpec::new(index, config.experts, gru.matrix_names())?;
        let optimizer = AdamState::new(&params, config.adam);
        Ok(Self {
            spec,
            params,
            projection,
            embedding,
            gru,
            output,
            optimizer,
            rng,
            epochs_done: 0,
        })
    }

    /// `h₀ = tanh(W f + b)`.
    pub fn init_state(&self, features: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .projection
            .forward(&self.params, features)?
            .into_iter()
            .map(f64::tanh)
            .collect())
    }

    /// Teacher-forced summed cross-entropy; gradients are accumulated into
    /// `self.params` unless `accumulate` is false.
    fn sequence_pass(
        &mut self,
        example: &Encoded<'_>,
        feature_scales: &[f64],
        row_scales: &[f64],
        accumulate: bool,
    ) -> Result<f64> {
        let features: Vec<f64> = example
            .features
            .iter()
            .zip(feature_scales)
            .map(|(f, s)| f * s)
            .collect();
        let h0 = self.init_state(&features)?;
        let mut h = h0.clone();
        let mut steps = Vec::with_capacity(example.inputs.len());
        let mut loss = 0.0;
        for (&input, &target) in example.inputs.iter().zip(&example.targets) {
            let x = self.embedding.lookup(&self.params, input, row_scales[input])?;
            let (next, cache) = self.gru.step(&self.params, &x, &h)?;
            let logits = self.output.forward(&self.params, &next)?;
            let (l, probs) = softmax_cross_entropy(&logits, target)?;
            loss += l;
            steps.push((cache, next.clone(), probs));
            h = next;
        }
        if !accumulate {
            return Ok(loss);
        }
        let mut carry = vec![0.0; self.gru.hidden];
        for (t, (cache, h_t, probs)) in steps.iter().enumerate().rev() {
            let d_logits = cross_entropy_backward(probs, example.targets[t], 1.0);
            let mut dh = self.output.backward(&mut self.params, h_t, &d_logits);
            for (a, b) in dh.iter_mut().zip(&carry) {
                *a += b;
            }
            let (dx, dh_prev) = self.gru.step_backward(&mut self.params, cache, &dh);
            let input = example.inputs[t];
            self.embedding.backward(&mut self.params, input, row_scales[input], &dx);
            carry = dh_prev;
        }
        let d_pre: Vec<f64> = carry.iter().zip(&h0).map(|(d, h)| d * (1.0 - h * h)).collect();
        self.projection.backward(&mut self.params, &features, &d_pre);
        Ok(loss)
    }

    fn train_epoch(&mut self, data: &[Encoded<'_>], config: &TermGenConfig) -> Result<f64> {
        use rand::seq::SliceRandom;

        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total_loss = 0.0;
        let mut total_tokens = 0usize;
        for batch in order.chunks(config.batch_size.max(1)) {
            self.params.zero_gradients();
            let row_scales = row_dropout_scales(self.embedding.vocab, config.embed_dropout, &mut self.rng)?;
            let mut tokens = 0usize;
            for &i in batch {
                let feature_scales = dropout_scales(config.feature_dim, config.feature_dropout, &mut self.rng)?;
                total_loss += self.sequence_pass(&data[i], &feature_scales, &row_scales, true)?;
                tokens += data[i].targets.len();
            }
            self.params.scale_gradients(1.0 / tokens as f64);
            self.optimizer.step(&mut self.params)?;
            total_tokens += tokens;
        }
        self.epochs_done += 1;
        if config.filter {
            apply_filter(&mut self.params, &self.spec)?;
            if config.reset_moments_after_filter {
                self.optimizer.reset_moments();
            }
        }
        Ok(total_loss / total_tokens as f64)
    }

    fn mean_loss(&mut self, data: &[Encoded<'_>], feature_dim: usize) -> Result<f64> {
        let ones_f = vec![1.0; feature_dim];
        let ones_v = vec![1.0; self.embedding.vocab];
        let mut loss = 0.0;
        let mut tokens = 0;
        for ex in data {
            loss += self.sequence_pass(ex, &ones_f, &ones_v, false)?;
            tokens += ex.targets.len();
        }
        Ok(loss / tokens as f64)
    }

    /// Greedy decoding from BOS; BOS and UNK are never emitted.
    fn generate(&self, features: &[f64], vocab: &Vocabulary, max_terms: usize) -> Result<TermSequence> {
        let mut h = self.init_state(features)?;
        let mut prev = BOS;
        let mut out = Vec::new();
        while out.len() < max_terms {
            let x = self.embedding.lookup(&self.params, prev, 1.0)?;
            h = self.gru.step(&self.params, &x, &h)?.0;
            let mut logits = self.output.forward(&self.params, &h)?;
            logits[BOS] = f64::NEG_INFINITY;
            logits[UNK] = f64::NEG_INFINITY;
            let next = argmax(&logits);
            if next == EOS {
                break;
            }
            out.push(vocab.token(next).to_string());
            prev = next;
        }
        Ok(TermSequence(out))
    }
}

/// The R-expert term generator.
#[derive(Debug, Clone)]
pub struct MoreModel {
    pub config: TermGenConfig,
    pub vocab: Vocabulary,
    pub experts: Vec<Expert>,
}

impl MoreModel {
    pub fn new(config: TermGenConfig, vocab: Vocabulary) -> Result<Self> {
        let experts = (1..=config.experts)
            .map(|i| Expert::new(i, &config, vocab.len()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { config, vocab, experts })
    }

    pub fn expert(&self, index: usize) -> Result<&Expert> {
        if index == 0 || index > self.experts.len() {
            return Err(TermGenError::ExpertOutOfRange {
                index,
                count: self.experts.len(),
            });
        }
        Ok(&self.experts[index - 1])
    }

    pub fn init_state(&self, features: &FeatureVector, expert_index: usize) -> Result<Vec<f64>> {
        self.check_features(features)?;
        self.expert(expert_index)?.init_state(&features.0)
    }

    fn check_features(&self, features: &FeatureVector) -> Result<()> {
        if features.0.len() != self.config.feature_dim {
            return Err(TermGenError::FeatureLength {
                expected: self.config.feature_dim,
                got: features.0.len(),
            });
        }
        Ok(())
    }

    fn encode<'a>(&self, data: &'a [TermExample]) -> Result<Vec<Encoded<'a>>> {
        if data.is_empty() {
            return Err(TermGenError::EmptyData);
        }
        data.iter()
            .map(|ex| {
                self.check_features(&ex.features)?;
                if ex.terms.len() > self.config.max_terms {
                    return Err(TermGenError::TooLong {
                        len: ex.terms.len(),
                        max: self.config.max_terms,
                    });
                }
                let ids: Vec<usize> = ex.terms.0.iter().map(|t| self.vocab.encode(t)).collect();
                let mut inputs = vec![BOS];
                inputs.extend(&ids);
                let mut targets = ids;
                targets.push(EOS);
                Ok(Encoded {
                    features: &ex.features.0,
                    inputs,
                    targets,
                })
            })
            .collect()
    }

    /// One epoch for every expert, each followed by its low-rank filter.
    /// Returns the mean per-token training loss of each expert.
    pub fn train_epoch(&mut self, data: &[TermExample]) -> Result<Vec<f64>> {
        let encoded = self.encode(data)?;
        let config = &self.config;
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            self.experts
                .par_iter_mut()
                .map(|e| e.train_epoch(&encoded, config))
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.experts
                .iter_mut()
                .map(|e| e.train_epoch(&encoded, config))
                .collect()
        }
    }

    /// Teacher-forced mean token loss per expert, without dropout or updates.
    pub fn evaluate_loss(&mut self, data: &[TermExample]) -> Result<Vec<f64>> {
        let encoded = self.encode(data)?;
        let dim = self.config.feature_dim;
        self.experts.iter_mut().map(|e| e.mean_loss(&encoded, dim)).collect()
    }

    pub fn generate_terms(&self, features: &FeatureVector, expert_index: usize) -> Result<TermSequence> {
        self.check_features(features)?;
        self.expert(expert_index)?
            .generate(&features.0, &self.vocab, self.config.max_terms)
    }

    /// Outputs of all experts, ordered by expert index.
    pub fn generate_all(&self, features: &FeatureVector) -> Result<Vec<TermSequence>> {
        (1..=self.experts.len())
            .map(|i| self.generate_terms(features, i))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{assert_grad_close, numeric_param_grad, random_vec};

    fn terms(words: &[&str]) -> TermSequence {
        TermSequence(words.iter().map(|w| w.to_string()).collect())
    }

    fn tiny_config(experts: usize) -> TermGenConfig {
        TermGenConfig {
            feature_dim: 6,
            embed_dim: 8,
            hidden: 12,
            experts,
            max_terms: 5,
            batch_size: 4,
            adam: AdamConfig {
                learning_rate: 1e-2,
                ..AdamConfig::default()
            },
            embed_dropout: 0.0,
            feature_dropout: 0.0,
            filter: true,
            reset_moments_after_filter: false,
            seed: 3,
        }
    }

    fn toy_data() -> (Vocabulary, Vec<TermExample>) {
        let seqs = [
            terms(&["dog_NOUN", "running_VERB", "park_NOUN"]),
            terms(&["cat_NOUN", "sitting_VERB"]),
            terms(&["girl_NOUN", "holding_VERB", "ball_NOUN"]),
        ];
        let vocab = Vocabulary::build(seqs.iter().map(|s| s.0.iter()), 100);
        let mut rng = seeded(99);
        let data = seqs
            .into_iter()
            .map(|t| TermExample {
                features: FeatureVector(random_vec(6, &mut rng)),
                terms: t,
            })
            .collect();
        (vocab, data)
    }

    #[test]
    fn zero_projection_gives_zero_state() {
        let (vocab, _) = toy_data();
        let mut model = MoreModel::new(tiny_config(1), vocab).unwrap();
        let e = &mut model.experts[0];
        e.params.value_mut(e.projection.weight).fill(0.0);
        let state = model.init_state(&FeatureVector(vec![0.0; 6]), 1).unwrap();
        assert_eq!(state, vec![0.0; 12]);
        assert_eq!(
            model.init_state(&FeatureVector(vec![0.0; 5]), 1),
            Err(TermGenError::FeatureLength { expected: 6, got: 5 })
        );
    }

    #[test]
    fn projection_gradient_matches_finite_differences() {
        let (vocab, data) = toy_data();
        let model = MoreModel::new(tiny_config(1), vocab).unwrap();
        let encoded = model.encode(&data).unwrap();
        let mut expert = model.experts[0].clone();
        let ones_f = vec![1.0; 6];
        let ones_v = vec![1.0; expert.embedding.vocab];
        expert.sequence_pass(&encoded[0], &ones_f, &ones_v, true).unwrap();
        let ids: Vec<_> = expert.params.iter().map(|(id, _)| id).collect();
        for id in ids {
            let numeric = numeric_param_grad(&expert.params, id, |ps| {
                let mut probe = expert.clone();
                probe.params = ps.clone();
                probe.sequence_pass(&encoded[0], &ones_f, &ones_v, false).unwrap()
            });
            assert_grad_close(expert.params.grad(id).as_slice(), &numeric, &expert.params.get(id).name);
        }
    }

    #[test]
    fn fresh_model_predicts_near_uniform() {
        let (vocab, data) = toy_data();
        let mut config = tiny_config(1);
        config.hidden = 32;
        let n = vocab.len() as f64;
        let mut model = MoreModel::new(config, vocab).unwrap();
        let loss = model.evaluate_loss(&data).unwrap()[0];
        assert!((loss - n.ln()).abs() / n.ln() < 0.05, "loss {loss} vs ln {}", n.ln());
    }

    #[test]
    fn memorizes_a_single_pair() {
        let (vocab, data) = toy_data();
        let mut config = tiny_config(1);
        config.hidden = 32;
        config.adam.learning_rate = 1e-2;
        let mut model = MoreModel::new(config, vocab).unwrap();
        let one = &data[..1];
        let mut last = f64::INFINITY;
        for _ in 0..200 {
            last = model.train_epoch(one).unwrap()[0];
        }
        assert!(last < 0.1, "loss {last}");
        assert_eq!(model.generate_terms(&one[0].features, 1).unwrap(), one[0].terms);
    }

    #[test]
    fn first_epoch_reduces_loss() {
        let (vocab, data) = toy_data();
        let mut model = MoreModel::new(tiny_config(1), vocab).unwrap();
        let before = model.evaluate_loss(&data).unwrap()[0];
        model.train_epoch(&data).unwrap();
        let after = model.evaluate_loss(&data).unwrap()[0];
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn full_factor_filter_matches_unfiltered_training() {
        let (vocab, data) = toy_data();
        let mut with = MoreModel::new(tiny_config(1), vocab.clone()).unwrap();
        let mut config = tiny_config(1);
        config.filter = false;
        let mut without = MoreModel::new(config, vocab).unwrap();
        for _ in 0..3 {
            let a = with.train_epoch(&data).unwrap()[0];
            let b = without.train_epoch(&data).unwrap()[0];
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn generation_is_deterministic_and_bounded() {
        let (vocab, data) = toy_data();
        let mut model = MoreModel::new(tiny_config(3), vocab).unwrap();
        model.train_epoch(&data).unwrap();
        let f = &data[0].features;
        let all = model.generate_all(f).unwrap();
        assert_eq!(all.len(), 3);
        for (i, seq) in all.iter().enumerate() {
            assert_eq!(*seq, model.generate_terms(f, i + 1).unwrap());
            assert!(seq.len() <= 5);
            assert!(seq.0.iter().all(|t| t != "<bos>" && t != "<unk>"));
        }
        let reversed: Vec<_> = (1..=3).rev().map(|i| model.generate_terms(f, i).unwrap()).collect();
        assert_eq!(reversed.into_iter().rev().collect::<Vec<_>>(), all);
        assert_eq!(
            model.generate_terms(f, 4),
            Err(TermGenError::ExpertOutOfRange { index: 4, count: 3 })
        );
    }

    #[test]
    fn overlong_sequences_are_rejected() {
        let (vocab, mut data) = toy_data();
        let mut model = MoreModel::new(tiny_config(1), vocab).unwrap();
        data[1].terms = terms(&["a", "b", "c", "d", "e", "f"]);
        assert_eq!(model.train_epoch(&data), Err(TermGenError::TooLong { len: 6, max: 5 }));
        assert_eq!(model.train_epoch(&[]), Err(TermGenError::EmptyData));
        assert!(TermSequence::checked(vec!["a".into(); 3], 2).is_err());
    }

    #[test]
    fn expert_factors_are_i_over_r() {
        let (vocab, _) = toy_data();
        let model = MoreModel::new(tiny_config(3), vocab).unwrap();
        let ks: Vec<f64> = model.experts.iter().map(|e| e.spec.k).collect();
        assert_eq!(ks, vec![1.0 / 3.0, 2.0 / 3.0, 1.0]);
        assert_eq!(model.experts[0].spec.target_names.len(), 6);
    }
}
