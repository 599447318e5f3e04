use super::{check_refs, Result};

pub const ROUGE_BETA: f64 = 1.2;

pub fn lcs_length(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS F-measure `(1+β²)PR / (R + β²P)`, maximised over references.
pub fn rouge_l(hyp: &[String], refs: &[Vec<String>]) -> Result<f64> {
    check_refs(refs)?;
    if hyp.is_empty() {
        return Ok(0.0);
    }
    let b2 = ROUGE_BETA * ROUGE_BETA;
    let best = refs
        .iter()
        .filter(|r| !r.is_empty())
        .map(|r| {
            let lcs = lcs_length(hyp, r) as f64;
            if lcs == 0.0 {
                return 0.0;
            }
            let p = lcs / hyp.len() as f64;
            let rec = lcs / r.len() as f64;
            (1.0 + b2) * p * rec / (rec + b2 * p)
        })
        .fold(0.0, f64::max);
    Ok(best)
}
