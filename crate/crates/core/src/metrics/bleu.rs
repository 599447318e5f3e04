use std::collections::HashMap;

use super::{check_order, check_refs, NGramCounts, Result};

/// Clipped n-gram matches and the hypothesis n-gram total.
pub fn modified_precision(hyp: &[String], refs: &[Vec<String>], n: usize) -> Result<(usize, usize)> {
    check_order(n)?;
    check_refs(refs)?;
    let hyp_counts = NGramCounts::new(hyp, n);
    let mut max_ref: HashMap<&Vec<String>, usize> = HashMap::new();
    let ref_counts: Vec<NGramCounts> = refs.iter().map(|r| NGramCounts::new(r, n)).collect();
    for rc in &ref_counts {
        for (gram, &c) in rc.order(n) {
            let slot = max_ref.entry(gram).or_insert(0);
            *slot = (*slot).max(c);
        }
    }
    let clipped = hyp_counts
        .order(n)
        .iter()
        .map(|(gram, &c)| c.min(max_ref.get(gram).copied().unwrap_or(0)))
        .sum();
    Ok((clipped, hyp_counts.total(n)))
}

/// Length of the reference closest to `hyp_len`; ties go to the shorter one.
fn closest_ref_len(hyp_len: usize, refs: &[Vec<String>]) -> usize {
    refs.iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(hyp_len), r))
        .unwrap_or(0)
}

/// `exp(min(0, 1 − r/c))`; zero for an empty hypothesis.
pub fn brevity_penalty(hyp_len: usize, ref_len: usize) -> f64 {
    if hyp_len == 0 {
        return 0.0;
    }
    if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    }
}

fn combine(matches: &[(usize, usize)], hyp_len: usize, ref_len: usize) -> f64 {
    if hyp_len == 0 || matches.iter().any(|&(m, t)| m == 0 || t == 0) {
        return 0.0;
    }
    let log_mean = matches.iter().map(|&(m, t)| (m as f64 / t as f64).ln()).sum::<f64>() / matches.len() as f64;
    brevity_penalty(hyp_len, ref_len) * log_mean.exp()
}

/// Sentence BLEU-n, unsmoothed.
pub fn bleu(hyp: &[String], refs: &[Vec<String>], n: usize) -> Result<f64> {
    check_order(n)?;
    check_refs(refs)?;
    let matches = (1..=n)
        .map(|k| modified_precision(hyp, refs, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(combine(&matches, hyp.len(), closest_ref_len(hyp.len(), refs)))
}

/// Corpus BLEU-n: clipped counts and lengths are pooled before combining.
pub fn corpus_bleu(hyps: &[Vec<String>], refs: &[Vec<Vec<String>>], n: usize) -> Result<f64> {
    check_order(n)?;
    if hyps.len() != refs.len() {
        return Err(super::MetricError::LengthMismatch {
            hyps: hyps.len(),
            refs: refs.len(),
        });
    }
    let mut pooled = vec![(0, 0); n];
    let (mut c, mut r) = (0, 0);
    for (hyp, rs) in hyps.iter().zip(refs) {
        for (k, slot) in pooled.iter_mut().enumerate() {
            let (m, t) = modified_precision(hyp, rs, k + 1)?;
            slot.0 += m;
            slot.1 += t;
        }
        c += hyp.len();
        r += closest_ref_len(hyp.len(), rs);
    }
    Ok(combine(&pooled, c, r))
}

#[cfg(test)]
mod tests {
    use super::super::toks;
    use super::*;

    #[test]
    fn identity_scores_one() {
        let s = toks("a man riding a horse on the beach");
        for n in 1..=4 {
            assert_eq!(bleu(&s, std::slice::from_ref(&s), n).unwrap(), 1.0);
        }
    }

    #[test]
    fn clipped_unigrams() {
        let hyp = toks("the the the the the the the");
        let refs = vec![toks("the cat is on the mat"), toks("there is a cat on the mat")];
        assert_eq!(modified_precision(&hyp, &refs, 1).unwrap(), (2, 7));
        assert_eq!(bleu(&hyp, &refs, 1).unwrap(), 2.0 / 7.0);
    }

    #[test]
    fn disjoint_and_empty() {
        assert_eq!(bleu(&toks("x y"), &[toks("a b")], 1).unwrap(), 0.0);
        assert_eq!(bleu(&[], &[toks("a b")], 1).unwrap(), 0.0);
        assert!(bleu(&toks("a"), &[], 1).is_err());
        assert!(bleu(&toks("a"), &[toks("a")], 5).is_err());
    }

    #[test]
    fn brevity_uses_closest_reference() {
        // Refs of length 2 and 4 are equally close to 3; the shorter one wins so no penalty.
        let hyp = toks("a b c");
        let refs = vec![toks("a b c d"), toks("a b")];
        assert_eq!(bleu(&hyp, &refs, 1).unwrap(), 1.0);
        let short = toks("a b");
        let score = bleu(&short, &[toks("a b c d")], 1).unwrap();
        assert!((score - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn bigram_hand_value() {
        // Unigrams 3/4; bigrams "a b", "b c" match and "c e" does not -> 2/3.
        let hyp = toks("a b c e");
        let refs = vec![toks("a b c d")];
        let expected = (0.75f64 * 2.0 / 3.0).sqrt();
        assert!((bleu(&hyp, &refs, 2).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn corpus_pools_counts() {
        let hyps = vec![toks("a b"), toks("c d")];
        let refs = vec![vec![toks("a b")], vec![toks("c x")]];
        // Unigrams 3/4, lengths equal.
        assert!((corpus_bleu(&hyps, &refs, 1).unwrap() - 0.75).abs() < 1e-12);
        let long = vec![
            vec![toks("one two three four five")],
            vec![toks("six seven eight nine")],
        ];
        let same: Vec<_> = long.iter().map(|r| r[0].clone()).collect();
        assert_eq!(corpus_bleu(&same, &long, 4).unwrap(), 1.0);
    }

    fn all_sentences(max_len: usize) -> Vec<Vec<String>> {
        let mut out = vec![Vec::new()];
        let mut frontier = vec![Vec::<String>::new()];
        for _ in 0..max_len {
            frontier = frontier
                .iter()
                .flat_map(|s| ["a", "b", "c"].map(|t| [s.clone(), vec![t.to_string()]].concat()))
                .collect();
            out.extend(frontier.iter().cloned());
        }
        out
    }

    fn occurrences(s: &[String], gram: &[String]) -> usize {
        (0..s.len()).filter(|&i| s[i..].starts_with(gram)).count()
    }

    #[test]
    fn exhaustive_brute_force_agreement() {
        let sentences = all_sentences(5);
        assert_eq!(sentences.len(), 364);
        for hyp in &sentences {
            for r in &sentences {
                let refs = std::slice::from_ref(r);
                for n in 1..=4 {
                    let total = hyp.len().saturating_sub(n - 1);
                    let mut clipped = 0;
                    for i in 0..total {
                        let gram = &hyp[i..i + n];
                        if (0..i).any(|j| &hyp[j..j + n] == gram) {
                            continue;
                        }
                        clipped += occurrences(hyp, gram).min(occurrences(r, gram));
                    }
                    assert_eq!(modified_precision(hyp, refs, n).unwrap(), (clipped, total));
                }
                let (m, t) = modified_precision(hyp, refs, 1).unwrap();
                let expected = if hyp.is_empty() || m == 0 {
                    0.0
                } else {
                    let bp = if hyp.len() >= r.len() {
                        1.0
                    } else {
                        (1.0 - r.len() as f64 / hyp.len() as f64).exp()
                    };
                    bp * m as f64 / t as f64
                };
                assert!((bleu(hyp, refs, 1).unwrap() - expected).abs() < 1e-12);
            }
        }
    }
}
