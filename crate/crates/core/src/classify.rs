//! Zero-shot scoring: softmax over similarity scores.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// Numerically stable softmax of `scale · scores` (max-subtracted).
pub fn softmax(scores: &[f64], scale: f64) -> Vec<f64> {
    if scores.is_empty() {
        return Vec::new();
    }
    let max = scores.iter().fold(f64::NEG_INFINITY, |m, &s| m.max(s * scale));
    let exps: Vec<f64> = scores.iter().map(|&s| libm::exp(s * scale - max)).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Index of the largest score; the first one wins ties.
pub fn argmax(scores: &[f64]) -> Option<usize> {
    scores
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &s)| match best {
            Some((_, b)) if b >= s => best,
            _ => Some((i, s)),
        })
        .map(|(i, _)| i)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label_index: usize,
    pub similarities: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl Classification {
    /// Pick the label with the highest similarity; probabilities are the
    /// softmax of the similarities at scale 1.
    pub fn from_similarities(similarities: Vec<f64>) -> Result<Self, CoreError> {
        let label_index = argmax(&similarities).ok_or(CoreError::EmptyLabelSet)?;
        let probabilities = softmax(&similarities, 1.0);
        Ok(Classification {
            label_index,
            similarities,
            probabilities,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn single_label_is_certain() {
        let c = Classification::from_similarities(vec![0.13]).unwrap();
        assert_eq!(c.label_index, 0);
        assert_eq!(c.probabilities, vec![1.0]);
    }

    #[test]
    fn exact_match_wins() {
        let c = Classification::from_similarities(vec![1.0, 0.4]).unwrap();
        assert_eq!(c.label_index, 0);
        assert!(c.probabilities[0] > c.probabilities[1]);
    }

    #[test]
    fn empty_is_an_error() {
        assert_eq!(Classification::from_similarities(vec![]), Err(CoreError::EmptyLabelSet));
    }

    #[test]
    fn softmax_handles_large_inputs() {
        let p = softmax(&[1000.0, 999.0], 1.0);
        assert!(p.iter().all(|x| x.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn probabilities_sum_to_one(s in prop::collection::vec(-1.0f64..1.0, 1..32)) {
            let p = softmax(&s, 1.0);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn argmax_invariant_under_positive_rescaling(
            s in prop::collection::vec(-1.0f64..1.0, 1..32),
            c in 1e-3f64..1e3,
        ) {
            let scaled = softmax(&s, c);
            let plain = softmax(&s, 1.0);
            prop_assert_eq!(argmax(&scaled), argmax(&plain));
            prop_assert_eq!(argmax(&plain), argmax(&s));
        }
    }
}
