//! Oracles shared by the integration tests: central finite differences and
//! brute-force n-gram / subsequence counting.

#![allow(dead_code)]

use more_core::nn::ParameterSet;

pub const FD_STEP: f64 = 1e-5;

/// Central-difference gradient of `f` at `x`.
pub fn fd_gradient(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + FD_STEP;
            let up = f(&probe);
            probe[i] = orig - FD_STEP;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Central-difference gradient with respect to every entry of parameter `name`.
pub fn fd_param_gradient(ps: &ParameterSet, name: &str, f: impl Fn(&ParameterSet) -> f64) -> Vec<f64> {
    let id = ps.id(name).expect("parameter exists");
    let mut probe = ps.clone();
    let n = ps.value(id).len();
    (0..n)
        .map(|i| {
            let orig = probe.value(id).as_slice()[i];
            probe.value_mut(id).as_mut_slice()[i] = orig + FD_STEP;
            let up = f(&probe);
            probe.value_mut(id).as_mut_slice()[i] = orig - FD_STEP;
            let down = f(&probe);
            probe.value_mut(id).as_mut_slice()[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖, 1e-8)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut a.iter().zip(b).map(|(x, y)| x - y));
    let scale = norm(&mut a.iter().copied()).max(norm(&mut b.iter().copied())).max(1e-8);
    diff / scale
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Every sentence of length `0..=max_len` over `alphabet`.
pub fn all_sentences(alphabet: &[&str], max_len: usize) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new()];
    let mut frontier: Vec<Vec<String>> = vec![Vec::new()];
    for _ in 0..max_len {
        frontier = frontier
            .iter()
            .flat_map(|s| {
                alphabet.iter().map(move |t| {
                    let mut next = s.clone();
                    next.push(t.to_string());
                    next
                })
            })
            .collect();
        out.extend(frontier.iter().cloned());
    }
    out
}

fn count_occurrences(s: &[String], gram: &[String]) -> usize {
    if gram.len() > s.len() {
        return 0;
    }
    (0..=s.len() - gram.len())
        .filter(|&i| &s[i..i + gram.len()] == gram)
        .count()
}

/// Clipped n-gram matches and hypothesis n-gram count, by direct enumeration.
pub fn brute_clipped(hyp: &[String], refs: &[Vec<String>], n: usize) -> (usize, usize) {
    if hyp.len() < n {
        return (0, 0);
    }
    let total = hyp.len() - n + 1;
    let mut clipped = 0;
    for i in 0..total {
        let gram = &hyp[i..i + n];
        if (0..i).any(|j| &hyp[j..j + n] == gram) {
            continue;
        }
        let best_ref = refs.iter().map(|r| count_occurrences(r, gram)).max().unwrap_or(0);
        clipped += count_occurrences(hyp, gram).min(best_ref);
    }
    (clipped, total)
}

fn is_subsequence(needle: &[&String], hay: &[String]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|n| it.any(|h| h == *n))
}

/// Longest common subsequence by enumerating every subsequence of `a`.
pub fn brute_lcs(a: &[String], b: &[String]) -> usize {
    (0u32..1 << a.len())
        .filter_map(|mask| {
            let sub: Vec<&String> = (0..a.len()).filter(|i| mask & (1 << i) != 0).map(|i| &a[i]).collect();
            is_subsequence(&sub, b).then_some(sub.len())
        })
        .max()
        .unwrap_or(0)
}
