use rand::Rng;

use crate::linalg::Matrix;

use super::{check_dim, NnError, ParamId, ParameterSet, Result};

/// Uniform(−a, a) with a = sqrt(6 / (fan_in + fan_out)).
pub fn xavier_uniform(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-a..a))
}

/// Affine map `y = W x + b`.
#[derive(Debug, Clone, Copy)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Dense {
    pub fn new(ps: &mut ParameterSet, name: &str, input: usize, output: usize, rng: &mut impl Rng) -> Result<Self> {
        let weight = ps.add(format!("{name}.w"), xavier_uniform(output, input, rng))?;
        let bias = ps.add(format!("{name}.b"), Matrix::zeros(output, 1))?;
        Ok(Self {
            weight,
            bias,
            input,
            output,
        })
    }

    pub fn forward(&self, ps: &ParameterSet, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("dense input", self.input, x.len())?;
        let mut y = ps.value(self.weight).matvec(x)?;
        for (o, b) in y.iter_mut().zip(ps.value(self.bias).as_slice()) {
            *o += b;
        }
        Ok(y)
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&self, ps: &mut ParameterSet, x: &[f64], dy: &[f64]) -> Vec<f64> {
        let (w, gw) = ps.value_and_grad(self.weight);
        gw.add_outer(dy, x);
        let mut dx = vec![0.0; self.input];
        w.matvec_t_acc(dy, &mut dx);
        for (g, d) in ps.grad_mut(self.bias).as_mut_slice().iter_mut().zip(dy) {
            *g += d;
        }
        dx
    }
}

/// Lookup table with one row per token.
#[derive(Debug, Clone, Copy)]
pub struct Embedding {
    pub table: ParamId,
    pub vocab: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new(ps: &mut ParameterSet, name: &str, vocab: usize, dim: usize, rng: &mut impl Rng) -> Result<Self> {
        let table = ps.add(format!("{name}.table"), xavier_uniform(vocab, dim, rng))?;
        Ok(Self { table, vocab, dim })
    }

    /// Row `index` multiplied by `scale` (the row's dropout factor, 1 when inactive).
    pub fn lookup(&self, ps: &ParameterSet, index: usize, scale: f64) -> Result<Vec<f64>> {
        if index >= self.vocab {
            return Err(NnError::OutOfVocabulary {
                index,
                size: self.vocab,
            });
        }
        Ok(ps.value(self.table).row(index).iter().map(|v| v * scale).collect())
    }

    pub fn backward(&self, ps: &mut ParameterSet, index: usize, scale: f64, dy: &[f64]) {
        if scale == 0.0 {
            return;
        }
        let row = ps.grad_mut(self.table).row_mut(index);
        for (g, d) in row.iter_mut().zip(dy) {
            *g += scale * d;
        }
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Returns `(−ln p[target], p)` computed through log-sum-exp.
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if target >= logits.len() {
        return Err(NnError::OutOfVocabulary {
            index: target,
            size: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&l| (l - max).exp()).sum();
    let lse = max + sum.ln();
    let probs = logits.iter().map(|&l| (l - lse).exp()).collect();
    Ok((lse - logits[target], probs))
}

/// `dL/dlogits = p − onehot(target)`, scaled by `weight`.
pub fn cross_entropy_backward(probs: &[f64], target: usize, weight: f64) -> Vec<f64> {
    let mut d: Vec<f64> = probs.iter().map(|p| p * weight).collect();
    d[target] -= weight;
    d
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::testutil::{assert_grad_close, numeric_grad, random_vec};

    #[test]
    fn uniform_logits() {
        let p = softmax(&[0.3; 5]);
        assert!(p.iter().all(|&x| (x - 0.2).abs() < 1e-15));
        let (loss, p) = softmax_cross_entropy(&[1.0, 2.0, -0.5], 1).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(loss > 0.0);
    }

    #[test]
    fn confident_target_has_zero_loss() {
        let (loss, _) = softmax_cross_entropy(&[0.0, 800.0, 0.0], 1).unwrap();
        assert_eq!(loss, 0.0);
        assert!(matches!(
            softmax_cross_entropy(&[0.0, 1.0], 2),
            Err(NnError::OutOfVocabulary { index: 2, size: 2 })
        ));
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 0.0]), 1);
    }

    #[test]
    fn embedding_rejects_oov() {
        let mut rng = seeded(1);
        let mut ps = ParameterSet::new();
        let emb = Embedding::new(&mut ps, "e", 4, 3, &mut rng).unwrap();
        assert_eq!(
            emb.lookup(&ps, 4, 1.0),
            Err(NnError::OutOfVocabulary { index: 4, size: 4 })
        );
    }

    #[test]
    fn dense_and_softmax_gradients() {
        let mut rng = seeded(9);
        for _ in 0..5 {
            let mut ps = ParameterSet::new();
            let dense = Dense::new(&mut ps, "d", 4, 6, &mut rng).unwrap();
            let x = random_vec(4, &mut rng);
            let target = 2;
            let loss = |ps: &ParameterSet, x: &[f64]| {
                let logits = dense.forward(ps, x).unwrap();
                softmax_cross_entropy(&logits, target).unwrap().0
            };
            let logits = dense.forward(&ps, &x).unwrap();
            let (_, probs) = softmax_cross_entropy(&logits, target).unwrap();
            let dlogits = cross_entropy_backward(&probs, target, 1.0);
            let dx = dense.backward(&mut ps, &x, &dlogits);

            let num_dx = numeric_grad(&x, |xv| loss(&ps, xv));
            assert_grad_close(&dx, &num_dx, "dense dx");
            for id in [dense.weight, dense.bias] {
                let analytic = ps.grad(id).as_slice().to_vec();
                let numeric = crate::testutil::numeric_param_grad(&ps, id, |p| loss(p, &x));
                assert_grad_close(&analytic, &numeric, &ps.get(id).name);
            }
        }
    }
}
