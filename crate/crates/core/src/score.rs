//! Video-level prediction from per-chunk class scores by temporal average
//! pooling. Scores are used as given (logits or probabilities); no softmax
//! is applied.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScoreError {
    #[error("no chunks to aggregate")]
    Empty,
    #[error("chunk {chunk_index}: expected {expected} scores, found {found}")]
    LengthMismatch {
        chunk_index: usize,
        expected: usize,
        found: usize,
    },
    #[error("chunk {chunk_index}: score vector is empty or not finite")]
    InvalidScores { chunk_index: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreVector {
    pub chunk_index: usize,
    pub scores: Vec<f64>,
}

impl ScoreVector {
    pub fn new(chunk_index: usize, scores: Vec<f64>) -> Self {
        Self {
            chunk_index,
            scores,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VideoPrediction {
    pub mean_scores: Vec<f64>,
    pub label: usize,
    pub label_name: Option<String>,
}

impl VideoPrediction {
    pub fn with_class_names(mut self, names: &[String]) -> Self {
        self.label_name = names.get(self.label).cloned();
        self
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Averages score vectors class-wise. Summation is compensated and runs in
/// `chunk_index` order, so the result does not depend on the order of `vectors`.
pub fn temporal_average_pool(vectors: &[ScoreVector]) -> Result<VideoPrediction, ScoreError> {
    let first = vectors.first().ok_or(ScoreError::Empty)?;
    let k = first.scores.len();
    for v in vectors {
        if v.scores.len() != k {
            return Err(ScoreError::LengthMismatch {
                chunk_index: v.chunk_index,
                expected: k,
                found: v.scores.len(),
            });
        }
        if k == 0 || v.scores.iter().any(|s| !s.is_finite()) {
            return Err(ScoreError::InvalidScores {
                chunk_index: v.chunk_index,
            });
        }
    }

    let mut order: Vec<&ScoreVector> = vectors.iter().collect();
    order.sort_by_key(|v| v.chunk_index);

    let mut sums = vec![0.0f64; k];
    let mut carry = vec![0.0f64; k];
    for v in order {
        for ((acc, c), &s) in sums.iter_mut().zip(carry.iter_mut()).zip(&v.scores) {
            let t = *acc + s;
            // Neumaier: keep the low-order bits lost by the addition.
            *c += if acc.abs() >= s.abs() {
                (*acc - t) + s
            } else {
                (s - t) + *acc
            };
            *acc = t;
        }
    }
    let n = vectors.len() as f64;
    let mean_scores: Vec<f64> = sums
        .into_iter()
        .zip(carry)
        .map(|(s, c)| (s + c) / n)
        .collect();
    Ok(VideoPrediction {
        label: argmax(&mean_scores),
        mean_scores,
        label_name: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_vectors_average() {
        let p = temporal_average_pool(&[
            ScoreVector::new(0, vec![0.2, 0.8]),
            ScoreVector::new(1, vec![0.4, 0.6]),
        ])
        .unwrap();
        assert!((p.mean_scores[0] - 0.3).abs() < 1e-15);
        assert!((p.mean_scores[1] - 0.7).abs() < 1e-15);
        assert_eq!(p.label, 1);
    }

    #[test]
    fn single_vector_is_identity() {
        let v = vec![-1.5, 3.0, 2.0];
        let p = temporal_average_pool(&[ScoreVector::new(7, v.clone())]).unwrap();
        assert_eq!(p.mean_scores, v);
        assert_eq!(p.label, 1);
    }

    #[test]
    fn ties_pick_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        let p = temporal_average_pool(&[ScoreVector::new(0, vec![0.5, 0.5])]).unwrap();
        assert_eq!(p.label, 0);
    }

    #[test]
    fn errors() {
        assert_eq!(temporal_average_pool(&[]), Err(ScoreError::Empty));
        assert_eq!(ScoreError::Empty.to_string(), "no chunks to aggregate");
        let err = temporal_average_pool(&[
            ScoreVector::new(0, vec![1.0, 2.0]),
            ScoreVector::new(4, vec![1.0]),
        ])
        .unwrap_err();
        assert_eq!(
            err,
            ScoreError::LengthMismatch {
                chunk_index: 4,
                expected: 2,
                found: 1
            }
        );
        assert!(temporal_average_pool(&[ScoreVector::new(3, vec![f64::NAN])]).is_err());
        assert!(temporal_average_pool(&[ScoreVector::new(3, vec![])]).is_err());
    }

    #[test]
    fn label_name_lookup() {
        let names = vec!["wave".to_string(), "clap".to_string()];
        let p = temporal_average_pool(&[ScoreVector::new(0, vec![0.1, 0.9])])
            .unwrap()
            .with_class_names(&names);
        assert_eq!(p.label_name.as_deref(), Some("clap"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_vectors() -> impl Strategy<Value = Vec<ScoreVector>> {
            (1usize..6).prop_flat_map(|k| {
                prop::collection::vec(prop::collection::vec(-10.0f64..10.0, k), 1..40).prop_map(
                    |rows| {
                        rows.into_iter()
                            .enumerate()
                            .map(|(i, s)| ScoreVector::new(i, s))
                            .collect()
                    },
                )
            })
        }

        proptest! {
            #[test]
            fn shuffle_invariant(v in arb_vectors(), seed in any::<u64>()) {
                use rand::{seq::SliceRandom, SeedableRng};
                let a = temporal_average_pool(&v).unwrap();
                let mut shuffled = v.clone();
                shuffled.shuffle(&mut rand::rngs::StdRng::seed_from_u64(seed));
                prop_assert_eq!(temporal_average_pool(&shuffled).unwrap(), a);
            }

            #[test]
            fn positive_scaling_keeps_label(v in arb_vectors(), c in 0.01f64..100.0) {
                let a = temporal_average_pool(&v).unwrap();
                let scaled: Vec<ScoreVector> = v
                    .iter()
                    .map(|s| ScoreVector::new(s.chunk_index, s.scores.iter().map(|x| x * c).collect()))
                    .collect();
                let b = temporal_average_pool(&scaled).unwrap();
                // Scaling can break an exact tie only through rounding; skip near-ties.
                let mut sorted = a.mean_scores.clone();
                sorted.sort_by(|x, y| y.partial_cmp(x).unwrap());
                if sorted.len() < 2 || sorted[0] - sorted[1] > 1e-9 {
                    prop_assert_eq!(a.label, b.label);
                }
            }

            #[test]
            fn mean_within_per_class_bounds(v in arb_vectors()) {
                let p = temporal_average_pool(&v).unwrap();
                for (k, m) in p.mean_scores.iter().enumerate() {
                    let lo = v.iter().map(|s| s.scores[k]).fold(f64::INFINITY, f64::min);
                    let hi = v.iter().map(|s| s.scores[k]).fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(lo - 1e-12 <= *m && *m <= hi + 1e-12);
                }
            }
        }
    }
}
