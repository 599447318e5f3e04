//! METEOR restricted to exact unigram matches (no stemming or synonyms).

use super::{check_refs, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    /// `(hyp index, ref index)` pairs sorted by hypothesis position.
    pub pairs: Vec<(usize, usize)>,
    pub chunks: usize,
}

impl Alignment {
    /// Repeatedly aligns the longest common run of still-unaligned tokens
    /// (earliest in the hypothesis, then in the reference, on ties).
    pub fn exact(hyp: &[String], reference: &[String]) -> Self {
        let mut used_h = vec![false; hyp.len()];
        let mut used_r = vec![false; reference.len()];
        let mut pairs = Vec::new();
        loop {
            let mut best = (0, 0, 0);
            for i in 0..hyp.len() {
                for j in 0..reference.len() {
                    let mut len = 0;
                    while i + len < hyp.len()
                        && j + len < reference.len()
                        && !used_h[i + len]
                        && !used_r[j + len]
                        && hyp[i + len] == reference[j + len]
                    {
                        len += 1;
                    }
                    if len > best.2 {
                        best = (i, j, len);
                    }
                }
            }
            let (i, j, len) = best;
            if len == 0 {
                break;
            }
            for k in 0..len {
                used_h[i + k] = true;
                used_r[j + k] = true;
                pairs.push((i + k, j + k));
            }
        }
        pairs.sort_unstable();
        let chunks = pairs
            .iter()
            .enumerate()
            .filter(|&(k, &(h, r))| k == 0 || pairs[k - 1] != (h - 1, r.wrapping_sub(1)))
            .count();
        Self { pairs, chunks }
    }

    pub fn matches(&self) -> usize {
        self.pairs.len()
    }
}

fn score_pair(hyp: &[String], reference: &[String]) -> f64 {
    let a = Alignment::exact(hyp, reference);
    let m = a.matches() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let p = m / hyp.len() as f64;
    let r = m / reference.len() as f64;
    let fmean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (a.chunks as f64 / m).powi(3);
    fmean * (1.0 - penalty)
}

/// `F_mean · (1 − 0.5 (chunks/matches)³)` with `F_mean = 10PR/(R+9P)`, best reference.
pub fn meteor_exact(hyp: &[String], refs: &[Vec<String>]) -> Result<f64> {
    check_refs(refs)?;
    Ok(refs.iter().map(|r| score_pair(hyp, r)).fold(0.0, f64::max))
}
