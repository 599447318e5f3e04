use rand::Rng;

use crate::linalg::dot;

use super::layers::{softmax, xavier_uniform};
use super::{check_dim, NnError, ParamId, ParameterSet, Result};

/// Additive (concat) attention: `score_j = v · tanh(W_q s + W_k e_j)`.
#[derive(Debug, Clone, Copy)]
pub struct Attention {
    pub query: ParamId,
    pub key: ParamId,
    pub score: ParamId,
    pub query_dim: usize,
    pub key_dim: usize,
    pub attn_dim: usize,
}

#[derive(Debug, Clone)]
pub struct AttentionCache {
    state: Vec<f64>,
    activations: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl Attention {
    pub fn new(
        ps: &mut ParameterSet,
        name: &str,
        query_dim: usize,
        key_dim: usize,
        attn_dim: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        Ok(Self {
            query: ps.add(format!("{name}.w_query"), xavier_uniform(attn_dim, query_dim, rng))?,
            key: ps.add(format!("{name}.w_key"), xavier_uniform(attn_dim, key_dim, rng))?,
            score: ps.add(format!("{name}.v"), xavier_uniform(1, attn_dim, rng))?,
            query_dim,
            key_dim,
            attn_dim,
        })
    }

    /// `W_k e_j` for every encoder state; computed once per sequence.
    pub fn project_keys(&self, ps: &ParameterSet, encoder: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if encoder.is_empty() {
            return Err(NnError::EmptySequence);
        }
        encoder
            .iter()
            .map(|e| {
                check_dim("attention key", self.key_dim, e.len())?;
                Ok(ps.value(self.key).matvec(e)?)
            })
            .collect()
    }

    /// Returns the context vector and the cache (holding the weights).
    pub fn forward(
        &self,
        ps: &ParameterSet,
        state: &[f64],
        encoder: &[Vec<f64>],
        keys: &[Vec<f64>],
    ) -> Result<(Vec<f64>, AttentionCache)> {
        check_dim("attention query", self.query_dim, state.len())?;
        let q = ps.value(self.query).matvec(state)?;
        let v = ps.value(self.score).as_slice();
        let activations: Vec<Vec<f64>> = keys
            .iter()
            .map(|k| k.iter().zip(&q).map(|(a, b)| (a + b).tanh()).collect())
            .collect();
        let scores: Vec<f64> = activations.iter().map(|u| dot(v, u)).collect();
        let weights = softmax(&scores);
        let mut context = vec![0.0; self.key_dim];
        for (w, e) in weights.iter().zip(encoder) {
            for (c, x) in context.iter_mut().zip(e) {
                *c += w * x;
            }
        }
        Ok((
            context,
            AttentionCache {
                state: state.to_vec(),
                activations,
                weights,
            },
        ))
    }

    /// Backward through one attention read. Adds into `d_keys` / `d_encoder`
    /// and returns `dL/dstate`.
    pub fn backward(
        &self,
        ps: &mut ParameterSet,
        cache: &AttentionCache,
        encoder: &[Vec<f64>],
        d_context: &[f64],
        d_keys: &mut [Vec<f64>],
        d_encoder: &mut [Vec<f64>],
    ) -> Vec<f64> {
        let w = &cache.weights;
        let d_weights: Vec<f64> = encoder.iter().map(|e| dot(d_context, e)).collect();
        for (de, &a) in d_encoder.iter_mut().zip(w) {
            for (d, c) in de.iter_mut().zip(d_context) {
                *d += a * c;
            }
        }
        let mean: f64 = w.iter().zip(&d_weights).map(|(a, d)| a * d).sum();
        let d_scores: Vec<f64> = w.iter().zip(&d_weights).map(|(a, d)| a * (d - mean)).collect();

        let mut dq = vec![0.0; self.attn_dim];
        {
            let v = ps.value(self.score).as_slice().to_vec();
            let gv = ps.grad_mut(self.score).as_mut_slice();
            for ((u, &ds), dk) in cache.activations.iter().zip(&d_scores).zip(d_keys.iter_mut()) {
                for i in 0..self.attn_dim {
                    gv[i] += ds * u[i];
                    let da = ds * v[i] * (1.0 - u[i] * u[i]);
                    dq[i] += da;
                    dk[i] += da;
                }
            }
        }
        let (wq, gq) = ps.value_and_grad(self.query);
        gq.add_outer(&dq, &cache.state);
        let mut d_state = vec![0.0; self.query_dim];
        wq.matvec_t_acc(&dq, &mut d_state);
        d_state
    }

    /// Backward through [`Attention::project_keys`].
    pub fn keys_backward(
        &self,
        ps: &mut ParameterSet,
        encoder: &[Vec<f64>],
        d_keys: &[Vec<f64>],
        d_encoder: &mut [Vec<f64>],
    ) {
        let (wk, gk) = ps.value_and_grad(self.key);
        for ((e, dk), de) in encoder.iter().zip(d_keys).zip(d_encoder.iter_mut()) {
            gk.add_outer(dk, e);
            wk.matvec_t_acc(dk, de);
        }
    }
}

/// One-shot attention read: `(context, weights)` for a decoder state.
pub fn attend(
    ps: &ParameterSet,
    attn: &Attention,
    state: &[f64],
    encoder: &[Vec<f64>],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let keys = attn.project_keys(ps, encoder)?;
    let (context, cache) = attn.forward(ps, state, encoder, &keys)?;
    Ok((context, cache.weights))
}

/// Zero-initialised key gradient buffers shaped like `keys`.
pub(crate) fn zeros_like(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter().map(|r| vec![0.0; r.len()]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::testutil::{assert_grad_close, numeric_grad, numeric_param_grad, random_vec};

    fn setup(seed: u64) -> (ParameterSet, Attention, rand_chacha::ChaCha8Rng) {
        let mut rng = seeded(seed);
        let mut ps = ParameterSet::new();
        let attn = Attention::new(&mut ps, "attn", 3, 4, 5, &mut rng).unwrap();
        (ps, attn, rng)
    }

    #[test]
    fn single_state_gets_all_weight() {
        let (ps, attn, mut rng) = setup(1);
        let e = random_vec(4, &mut rng);
        let (ctx, w) = attend(&ps, &attn, &random_vec(3, &mut rng), std::slice::from_ref(&e)).unwrap();
        assert_eq!(w, vec![1.0]);
        assert_eq!(ctx, e);
    }

    #[test]
    fn zero_score_vector_gives_uniform_mean() {
        let (mut ps, attn, mut rng) = setup(2);
        ps.value_mut(attn.score).fill(0.0);
        let enc: Vec<Vec<f64>> = (0..4).map(|_| random_vec(4, &mut rng)).collect();
        let (ctx, w) = attend(&ps, &attn, &random_vec(3, &mut rng), &enc).unwrap();
        assert!(w.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        for i in 0..4 {
            let mean = enc.iter().map(|e| e[i]).sum::<f64>() / 4.0;
            assert!((ctx[i] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_form_a_distribution() {
        let (ps, attn, mut rng) = setup(3);
        let enc: Vec<Vec<f64>> = (0..6).map(|_| random_vec(4, &mut rng)).collect();
        let (_, w) = attend(&ps, &attn, &random_vec(3, &mut rng), &enc).unwrap();
        assert!(w.iter().all(|&x| x >= 0.0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let (ps, attn, _) = setup(4);
        assert!(attend(&ps, &attn, &[0.0; 2], &[vec![0.0; 4]]).is_err());
        assert!(attend(&ps, &attn, &[0.0; 3], &[vec![0.0; 3]]).is_err());
        assert_eq!(attend(&ps, &attn, &[0.0; 3], &[]).unwrap_err(), NnError::EmptySequence);
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..5 {
            let (mut ps, attn, mut rng) = setup(100 + seed);
            let state = random_vec(3, &mut rng);
            let enc: Vec<Vec<f64>> = (0..4).map(|_| random_vec(4, &mut rng)).collect();
            let proj = random_vec(4, &mut rng);
            let loss = |ps: &ParameterSet, s: &[f64], enc: &[Vec<f64>]| {
                let (ctx, _) = attend(ps, &attn, s, enc).unwrap();
                dot(&ctx, &proj)
            };
            let keys = attn.project_keys(&ps, &enc).unwrap();
            let (_, cache) = attn.forward(&ps, &state, &enc, &keys).unwrap();
            let mut d_keys = zeros_like(&keys);
            let mut d_enc = zeros_like(&enc);
            let d_state = attn.backward(&mut ps, &cache, &enc, &proj, &mut d_keys, &mut d_enc);
            attn.keys_backward(&mut ps, &enc, &d_keys, &mut d_enc);

            assert_grad_close(&d_state, &numeric_grad(&state, |s| loss(&ps, s, &enc)), "d_state");
            for j in 0..enc.len() {
                let numeric = numeric_grad(&enc[j], |v| {
                    let mut e = enc.clone();
                    e[j] = v.to_vec();
                    loss(&ps, &state, &e)
                });
                assert_grad_close(&d_enc[j], &numeric, "d_encoder");
            }
            for id in [attn.query, attn.key, attn.score] {
                let numeric = numeric_param_grad(&ps, id, |p| loss(p, &state, &enc));
                assert_grad_close(ps.grad(id).as_slice(), &numeric, &ps.get(id).name);
            }
        }
    }
}
