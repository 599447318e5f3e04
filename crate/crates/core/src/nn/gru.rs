use rand::Rng;

use crate::linalg::Matrix;

use super::layers::xavier_uniform;
use super::{check_dim, sigmoid, NnError, ParamId, ParameterSet, Result};

/// Weights of a GRU cell (Cho et al. formulation):
///
/// ```text
/// z  = σ(W_z x + U_z h + b_z)
/// r  = σ(W_r x + U_r h + b_r)
/// h̃  = tanh(W_h x + U_h (r ⊙ h) + b_h)
/// h' = (1 − z) ⊙ h + z ⊙ h̃
/// ```
#[derive(Debug, Clone)]
pub struct GruParams {
    pub w_z: ParamId,
    pub u_z: ParamId,
    pub b_z: ParamId,
    pub w_r: ParamId,
    pub u_r: ParamId,
    pub b_r: ParamId,
    pub w_h: ParamId,
    pub u_h: ParamId,
    pub b_h: ParamId,
    pub input: usize,
    pub hidden: usize,
    prefix: String,
}

/// Intermediates of one step, enough for an exact backward pass.
#[derive(Debug, Clone)]
pub struct GruCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    candidate: Vec<f64>,
    reset_h: Vec<f64>,
}

impl GruParams {
    pub fn new(ps: &mut ParameterSet, prefix: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Result<Self> {
        let input_mat = |ps: &mut ParameterSet, n: &str, rng: &mut _| {
            ps.add(format!("{prefix}.{n}"), xavier_uniform(hidden, input, rng))
        };
        let w_z = input_mat(ps, "w_z", rng)?;
        let w_r = input_mat(ps, "w_r", rng)?;
        let w_h = input_mat(ps, "w_h", rng)?;
        let hidden_mat = |ps: &mut ParameterSet, n: &str, rng: &mut _| {
            ps.add(format!("{prefix}.{n}"), xavier_uniform(hidden, hidden, rng))
        };
        let u_z = hidden_mat(ps, "u_z", rng)?;
        let u_r = hidden_mat(ps, "u_r", rng)?;
        let u_h = hidden_mat(ps, "u_h", rng)?;
        let b_z = ps.add(format!("{prefix}.b_z"), Matrix::zeros(hidden, 1))?;
        let b_r = ps.add(format!("{prefix}.b_r"), Matrix::zeros(hidden, 1))?;
        let b_h = ps.add(format!("{prefix}.b_h"), Matrix::zeros(hidden, 1))?;
        Ok(Self {
            w_z,
            u_z,
            b_z,
            w_r,
            u_r,
            b_r,
            w_h,
            u_h,
            b_h,
            input,
            hidden,
            prefix: prefix.to_string(),
        })
    }

    /// Names of the six weight matrices (biases excluded).
    pub fn matrix_names(&self) -> Vec<String> {
        ["w_z", "u_z", "w_r", "u_r", "w_h", "u_h"]
            .iter()
            .map(|n| format!("{}.{n}", self.prefix))
            .collect()
    }

    pub fn step(&self, ps: &ParameterSet, x: &[f64], h_prev: &[f64]) -> Result<(Vec<f64>, GruCache)> {
        check_dim("gru input", self.input, x.len())?;
        check_dim("gru hidden state", self.hidden, h_prev.len())?;
        let gate = |w: ParamId, u: ParamId, b: ParamId, h: &[f64]| -> Result<Vec<f64>> {
            let mut a = ps.value(w).matvec(x)?;
            let uh = ps.value(u).matvec(h)?;
            for ((a, uh), b) in a.iter_mut().zip(uh).zip(ps.value(b).as_slice()) {
                *a += uh + b;
            }
            Ok(a)
        };
        let z: Vec<f64> = gate(self.w_z, self.u_z, self.b_z, h_prev)?
            .into_iter()
            .map(sigmoid)
            .collect();
        let r: Vec<f64> = gate(self.w_r, self.u_r, self.b_r, h_prev)?
            .into_iter()
            .map(sigmoid)
            .collect();
        let reset_h: Vec<f64> = r.iter().zip(h_prev).map(|(r, h)| r * h).collect();
        let candidate: Vec<f64> = gate(self.w_h, self.u_h, self.b_h, &reset_h)?
            .into_iter()
            .map(f64::tanh)
            .collect();
        let h = (0..self.hidden)
            .map(|i| (1.0 - z[i]) * h_prev[i] + z[i] * candidate[i])
            .collect();
        Ok((
            h,
            GruCache {
                x: x.to_vec(),
                h_prev: h_prev.to_vec(),
                z,
                r,
                candidate,
                reset_h,
            },
        ))
    }

    /// Accumulates weight gradients; returns `(dL/dx, dL/dh_prev)`.
    pub fn step_backward(&self, ps: &mut ParameterSet, cache: &GruCache, dh: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.hidden;
        let GruCache {
            x,
            h_prev,
            z,
            r,
            candidate,
            reset_h,
        } = cache;
        let mut dx = vec![0.0; self.input];
        let mut dh_prev: Vec<f64> = (0..n).map(|i| dh[i] * (1.0 - z[i])).collect();

        // candidate branch
        let da_h: Vec<f64> = (0..n)
            .map(|i| dh[i] * z[i] * (1.0 - candidate[i] * candidate[i]))
            .collect();
        let mut d_reset_h = vec![0.0; n];
        self.accumulate(
            ps,
            self.w_h,
            self.u_h,
            self.b_h,
            &da_h,
            x,
            reset_h,
            &mut dx,
            &mut d_reset_h,
        );
        for i in 0..n {
            dh_prev[i] += d_reset_h[i] * r[i];
        }

        let da_r: Vec<f64> = (0..n).map(|i| d_reset_h[i] * h_prev[i] * r[i] * (1.0 - r[i])).collect();
        self.accumulate(
            ps,
            self.w_r,
            self.u_r,
            self.b_r,
            &da_r,
            x,
            h_prev,
            &mut dx,
            &mut dh_prev,
        );

        let da_z: Vec<f64> = (0..n)
            .map(|i| dh[i] * (candidate[i] - h_prev[i]) * z[i] * (1.0 - z[i]))
            .collect();
        self.accumulate(
            ps,
            self.w_z,
            self.u_z,
            self.b_z,
            &da_z,
            x,
            h_prev,
            &mut dx,
            &mut dh_prev,
        );

        (dx, dh_prev)
    }

    #[allow(clippy::too_many_arguments)]
    fn accumulate(
        &self,
        ps: &mut ParameterSet,
        w: ParamId,
        u: ParamId,
        b: ParamId,
        da: &[f64],
        x: &[f64],
        h: &[f64],
        dx: &mut [f64],
        dh: &mut [f64],
    ) {
        let (wv, wg) = ps.value_and_grad(w);
        wg.add_outer(da, x);
        wv.matvec_t_acc(da, dx);
        let (uv, ug) = ps.value_and_grad(u);
        ug.add_outer(da, h);
        uv.matvec_t_acc(da, dh);
        for (g, d) in ps.grad_mut(b).as_mut_slice().iter_mut().zip(da) {
            *g += d;
        }
    }
}

/// Two independent GRUs reading the sequence in opposite directions.
#[derive(Debug, Clone)]
pub struct BiGru {
    pub forward: GruParams,
    pub backward: GruParams,
}

#[derive(Debug, Clone)]
pub struct BiGruOutput {
    /// `concat(forward_t, backward_t)` for every position.
    pub states: Vec<Vec<f64>>,
    fwd_caches: Vec<GruCache>,
    bwd_caches: Vec<GruCache>,
}

impl BiGru {
    pub fn new(ps: &mut ParameterSet, prefix: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Result<Self> {
        Ok(Self {
            forward: GruParams::new(ps, &format!("{prefix}.fwd"), input, hidden, rng)?,
            backward: GruParams::new(ps, &format!("{prefix}.bwd"), input, hidden, rng)?,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.forward.hidden + self.backward.hidden
    }

    pub fn forward(&self, ps: &ParameterSet, seq: &[Vec<f64>]) -> Result<BiGruOutput> {
        bidirectional_gru(ps, seq, &self.forward, &self.backward)
    }

    /// Gradients w.r.t. each input position.
    pub fn backward(&self, ps: &mut ParameterSet, out: &BiGruOutput, d_states: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = out.states.len();
        let hf = self.forward.hidden;
        let mut dx: Vec<Vec<f64>> = vec![Vec::new(); n];

        let mut carry = vec![0.0; hf];
        for t in (0..n).rev() {
            let dh: Vec<f64> = d_states[t][..hf].iter().zip(&carry).map(|(a, b)| a + b).collect();
            let (dxt, dprev) = self.forward.step_backward(ps, &out.fwd_caches[t], &dh);
            dx[t] = dxt;
            carry = dprev;
        }

        let mut carry = vec![0.0; self.backward.hidden];
        for t in 0..n {
            let dh: Vec<f64> = d_states[t][hf..].iter().zip(&carry).map(|(a, b)| a + b).collect();
            let (dxt, dprev) = self.backward.step_backward(ps, &out.bwd_caches[t], &dh);
            for (a, b) in dx[t].iter_mut().zip(dxt) {
                *a += b;
            }
            carry = dprev;
        }
        dx
    }
}

/// Runs `fwd` left to right and `bwd` right to left from zero states and
/// concatenates their states per position.
pub fn bidirectional_gru(ps: &ParameterSet, seq: &[Vec<f64>], fwd: &GruParams, bwd: &GruParams) -> Result<BiGruOutput> {
    if seq.is_empty() {
        return Err(NnError::EmptySequence);
    }
    let n = seq.len();
    let mut fwd_states = Vec::with_capacity(n);
    let mut fwd_caches = Vec::with_capacity(n);
    let mut h = vec![0.0; fwd.hidden];
    for x in seq {
        let (next, cache) = fwd.step(ps, x, &h)?;
        fwd_states.push(next.clone());
        fwd_caches.push(cache);
        h = next;
    }

    let mut bwd_states = vec![Vec::new(); n];
    let mut bwd_caches: Vec<Option<GruCache>> = vec![None; n];
    let mut h = vec![0.0; bwd.hidden];
    for t in (0..n).rev() {
        let (next, cache) = bwd.step(ps, &seq[t], &h)?;
        bwd_states[t] = next.clone();
        bwd_caches[t] = Some(cache);
        h = next;
    }

    let states = fwd_states
        .into_iter()
        .zip(bwd_states)
        .map(|(mut f, b)| {
            f.extend(b);
            f
        })
        .collect();
    Ok(BiGruOutput {
        states,
        fwd_caches,
        bwd_caches: bwd_caches.into_iter().map(|c| c.expect("filled")).collect(),
    })
}
