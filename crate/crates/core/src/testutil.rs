//! Central finite-difference oracle shared by the unit tests.

use rand::Rng;

use crate::nn::{ParamId, ParameterSet};

pub const STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;

pub fn random_vec(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn numeric_grad(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + STEP;
            let up = f(&probe);
            probe[i] = x[i] - STEP;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * STEP)
        })
        .collect()
}

pub fn numeric_param_grad(ps: &ParameterSet, id: ParamId, f: impl Fn(&ParameterSet) -> f64) -> Vec<f64> {
    let mut probe = ps.clone();
    let base = ps.value(id).as_slice().to_vec();
    (0..base.len())
        .map(|i| {
            probe.value_mut(id).as_mut_slice()[i] = base[i] + STEP;
            let up = f(&probe);
            probe.value_mut(id).as_mut_slice()[i] = base[i] - STEP;
            let down = f(&probe);
            probe.value_mut(id).as_mut_slice()[i] = base[i];
            (up - down) / (2.0 * STEP)
        })
        .collect()
}

pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).powi(2))
        .sum::<f64>()
        .sqrt();
    let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn: f64 = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    diff / na.max(nn).max(1e-8)
}

pub fn assert_grad_close(analytic: &[f64], numeric: &[f64], what: &str) {
    assert_eq!(analytic.len(), numeric.len(), "{what}: length");
    let err = relative_error(analytic, numeric);
    assert!(
        err < REL_TOL,
        "{what}: relative error {err:e}\n analytic {analytic:?}\n numeric {numeric:?}"
    );
}
