use rand::Rng;

use crate::linalg::Matrix;

use super::{Mode, NnError, Result};

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(NnError::InvalidProbability(p));
    }
    Ok(())
}

/// Inverted-dropout factors: 0 with probability `p`, otherwise `1/(1−p)`.
/// Draws nothing from `rng` when `p == 0`.
pub fn dropout_scales(n: usize, p: f64, rng: &mut impl Rng) -> Result<Vec<f64>> {
    check_probability(p)?;
    if p == 0.0 {
        return Ok(vec![1.0; n]);
    }
    let keep = 1.0 / (1.0 - p);
    Ok((0..n).map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep }).collect())
}

/// Per-word factors for embedding dropout: a dropped word loses its whole row.
pub fn row_dropout_scales(rows: usize, p: f64, rng: &mut impl Rng) -> Result<Vec<f64>> {
    dropout_scales(rows, p, rng)
}

/// Embedding dropout applied to a whole table: each word row is zeroed with
/// probability `p` and survivors are scaled by `1/(1−p)`. Inference mode
/// returns the table unchanged.
pub fn embedding_dropout(table: &Matrix, p: f64, rng: &mut impl Rng, mode: Mode) -> Result<Matrix> {
    check_probability(p)?;
    if mode == Mode::Inference {
        return Ok(table.clone());
    }
    let scales = row_dropout_scales(table.rows(), p, rng)?;
    let mut out = table.clone();
    for (r, s) in scales.into_iter().enumerate() {
        out.row_mut(r).iter_mut().for_each(|v| *v *= s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn table() -> Matrix {
        Matrix::from_fn(8, 3, |r, c| 1.0 + r as f64 + 0.1 * c as f64)
    }

    #[test]
    fn zero_rate_is_identity() {
        let t = table();
        assert_eq!(embedding_dropout(&t, 0.0, &mut seeded(1), Mode::Training).unwrap(), t);
        assert_eq!(embedding_dropout(&t, 0.7, &mut seeded(1), Mode::Inference).unwrap(), t);
    }

    #[test]
    fn half_rate_zeroes_or_doubles_rows() {
        let t = table();
        let out = embedding_dropout(&t, 0.5, &mut seeded(3), Mode::Training).unwrap();
        let mut dropped = 0;
        for r in 0..t.rows() {
            if out.row(r).iter().all(|&v| v == 0.0) {
                dropped += 1;
            } else {
                for (o, v) in out.row(r).iter().zip(t.row(r)) {
                    assert_eq!(*o, 2.0 * v);
                }
            }
        }
        assert!(dropped > 0 && dropped < t.rows(), "dropped {dropped}");
    }

    #[test]
    fn rejects_rate_of_one() {
        assert_eq!(
            embedding_dropout(&table(), 1.0, &mut seeded(0), Mode::Training),
            Err(NnError::InvalidProbability(1.0))
        );
    }

    #[test]
    fn unbiased_in_expectation() {
        let t = table();
        let mut rng = seeded(17);
        let draws = 10_000;
        let mut sum = Matrix::zeros(t.rows(), t.cols());
        for _ in 0..draws {
            sum.add_assign(&embedding_dropout(&t, 0.3, &mut rng, Mode::Training).unwrap())
                .unwrap();
        }
        let mean = sum.scale(1.0 / draws as f64);
        for (m, v) in mean.as_slice().iter().zip(t.as_slice()) {
            assert!((m - v).abs() / v < 0.05, "mean {m} vs {v}");
        }
    }
}
