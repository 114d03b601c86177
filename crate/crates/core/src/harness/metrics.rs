//! Score normalization and the robustness metric.

use std::collections::BTreeMap;

use super::HarnessError;

/// `(raw - random) / (oracle - random)`: 0 at the random-policy level and 1
/// at the oracle level.
pub fn normalized_score(
    raw: f64,
    reference_random: f64,
    reference_oracle: f64,
) -> Result<f64, HarnessError> {
    let span = reference_oracle - reference_random;
    if !(span.is_finite() && span > 0.0) || !raw.is_finite() {
        return Err(HarnessError::Config(format!(
            "degenerate score references: random {reference_random}, oracle {reference_oracle}"
        )));
    }
    Ok((raw - reference_random) / span)
}

/// Population variance.
pub fn population_variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

/// Normalized scores indexed by game and then by hyperparameter value.
/// Hyperparameters are keyed by their position in the grid.
pub type ScoreTable = BTreeMap<String, BTreeMap<usize, f64>>;

/// Per-game population variance over hyperparameter values, averaged over
/// games. Every game must cover the same hyperparameter cells.
pub fn robustness_metric(scores: &ScoreTable) -> Result<f64, HarnessError> {
    let Some(first) = scores.values().next() else {
        return Err(HarnessError::Config("empty score table".into()));
    };
    let cells: Vec<usize> = first.keys().copied().collect();
    if cells.is_empty() {
        return Err(HarnessError::Config(
            "score table has no hyperparameter cells".into(),
        ));
    }
    let mut total = 0.0;
    for (game, row) in scores {
        let mut values = Vec::with_capacity(cells.len());
        for c in &cells {
            match row.get(c) {
                Some(v) if v.is_finite() => values.push(*v),
                _ => {
                    return Err(HarnessError::Config(format!(
                        "missing score for game {game}, cell {c}"
                    )))
                }
            }
        }
        if row.len() != cells.len() {
            return Err(HarnessError::Config(format!("game {game} has extra cells")));
        }
        total += population_variance(&values);
    }
    Ok(total / scores.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table(rows: &[(&str, &[f64])]) -> ScoreTable {
        rows.iter()
            .map(|(g, v)| (g.to_string(), v.iter().copied().enumerate().collect()))
            .collect()
    }

    #[test]
    fn normalization_is_affine() {
        assert_eq!(normalized_score(2.0, 2.0, 6.0).unwrap(), 0.0);
        assert_eq!(normalized_score(6.0, 2.0, 6.0).unwrap(), 1.0);
        assert_eq!(normalized_score(4.0, 2.0, 6.0).unwrap(), 0.5);
        assert!(normalized_score(4.0, 6.0, 6.0).is_err());
        assert!(normalized_score(4.0, 7.0, 6.0).is_err());
    }

    #[test]
    fn robustness_examples() {
        assert_eq!(
            robustness_metric(&table(&[("a", &[3.0, 3.0, 3.0]), ("b", &[1.0, 1.0, 1.0])])).unwrap(),
            0.0
        );
        assert_eq!(
            robustness_metric(&table(&[("a", &[0.0, 2.0])])).unwrap(),
            1.0
        );
        assert_eq!(robustness_metric(&table(&[("a", &[0.5])])).unwrap(), 0.0);
    }

    #[test]
    fn missing_cells_are_errors() {
        assert!(robustness_metric(&table(&[("a", &[0.0, 2.0]), ("b", &[1.0])])).is_err());
        assert!(robustness_metric(&table(&[("a", &[0.0]), ("b", &[1.0, 2.0])])).is_err());
        assert!(robustness_metric(&table(&[("a", &[f64::NAN])])).is_err());
        assert!(robustness_metric(&ScoreTable::new()).is_err());
    }

    #[test]
    fn matches_two_pass_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let grid: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..3).map(|_| rng.random_range(-5.0..5.0)).collect())
                .collect();
            let t: ScoreTable = grid
                .iter()
                .enumerate()
                .map(|(g, row)| (g.to_string(), row.iter().copied().enumerate().collect()))
                .collect();
            // E[x²] - E[x]² per row, then the column mean.
            let expected = grid
                .iter()
                .map(|r| {
                    let m = (r[0] + r[1] + r[2]) / 3.0;
                    (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]) / 3.0 - m * m
                })
                .sum::<f64>()
                / 3.0;
            assert!((robustness_metric(&t).unwrap() - expected).abs() < 1e-12);
        }
    }
}
