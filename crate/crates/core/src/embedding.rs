//! Unit-norm embeddings and the dot-product kernels every index shares.
//!
//! Embeddings are computed in `f64`. Indexes store `f32` components (the
//! on-disk width) and accumulate in `f64`, so a stored vector scores the same
//! before and after a save/load round trip.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// Norms below this are treated as the zero vector.
pub const ZERO_NORM_FLOOR: f64 = 1e-12;

const LANES: usize = 8;

/// A fixed-dimension vector with unit L2 norm.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Embedding {
    values: Vec<f64>,
}

impl Embedding {
    /// Normalize `values`, checking them against the configured dimension.
    pub fn normalize(values: &[f64], dim: usize) -> Result<Self, CoreError> {
        if values.len() != dim {
            return Err(CoreError::DimensionMismatch {
                expected: dim,
                actual: values.len(),
            });
        }
        Self::from_unnormalized(values.to_vec())
    }

    /// Normalize a vector of any nonzero length.
    pub fn from_unnormalized(mut values: Vec<f64>) -> Result<Self, CoreError> {
        if values.is_empty() {
            return Err(CoreError::ZeroVector);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite);
        }
        let norm = libm::sqrt(dot_f64(&values, &values));
        if norm.is_nan() || norm < ZERO_NORM_FLOOR {
            return Err(CoreError::ZeroVector);
        }
        for v in values.iter_mut() {
            *v /= norm;
        }
        Ok(Embedding { values })
    }

    /// Widen stored `f32` components. Renormalizes, so the result is an
    /// embedding again even though `f32` rounding moved it off the sphere.
    pub fn from_f32(values: &[f32]) -> Result<Self, CoreError> {
        Self::from_unnormalized(values.iter().map(|&v| v as f64).collect())
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Components narrowed to the storage width.
    pub fn to_f32(&self) -> Vec<f32> {
        self.values.iter().map(|&v| v as f32).collect()
    }

    pub fn check_dim(&self, dim: usize) -> Result<(), CoreError> {
        if self.dim() == dim {
            Ok(())
        } else {
            Err(CoreError::DimensionMismatch {
                expected: dim,
                actual: self.dim(),
            })
        }
    }
}

impl<'de> Deserialize<'de> for Embedding {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(deserializer)?;
        Embedding::from_unnormalized(values).map_err(serde::de::Error::custom)
    }
}

/// Cosine similarity of two embeddings, i.e. their dot product.
pub fn cosine(a: &Embedding, b: &Embedding) -> Result<f64, CoreError> {
    if a.dim() != b.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    Ok(dot_f64(&a.values, &b.values))
}

// The three kernels below use the same eight-lane accumulation so that
// `dot_f32_f32(x, y) == dot_f32_f64(x, widen(y))` bit for bit.

/// Dot product of two equal-length `f64` slices.
#[inline]
pub fn dot_f64(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; LANES];
    let chunks = a.len() / LANES;
    for c in 0..chunks {
        let base = c * LANES;
        let (xa, xb) = (&a[base..base + LANES], &b[base..base + LANES]);
        for l in 0..LANES {
            acc[l] += xa[l] * xb[l];
        }
    }
    for i in chunks * LANES..a.len() {
        acc[i % LANES] += a[i] * b[i];
    }
    reduce(acc)
}

/// Dot product of a stored `f32` vector with an `f64` query.
#[inline]
pub fn dot_f32_f64(stored: &[f32], query: &[f64]) -> f64 {
    debug_assert_eq!(stored.len(), query.len());
    let mut acc = [0.0f64; LANES];
    let chunks = stored.len() / LANES;
    for c in 0..chunks {
        let base = c * LANES;
        let (xa, xb) = (&stored[base..base + LANES], &query[base..base + LANES]);
        for l in 0..LANES {
            acc[l] += xa[l] as f64 * xb[l];
        }
    }
    for i in chunks * LANES..stored.len() {
        acc[i % LANES] += stored[i] as f64 * query[i];
    }
    reduce(acc)
}

/// Dot product of two stored `f32` vectors, accumulated in `f64`.
#[inline]
pub fn dot_f32_f32(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; LANES];
    let chunks = a.len() / LANES;
    for c in 0..chunks {
        let base = c * LANES;
        let (xa, xb) = (&a[base..base + LANES], &b[base..base + LANES]);
        for l in 0..LANES {
            acc[l] += xa[l] as f64 * xb[l] as f64;
        }
    }
    for i in chunks * LANES..a.len() {
        acc[i % LANES] += a[i] as f64 * b[i] as f64;
    }
    reduce(acc)
}

#[inline]
fn reduce(acc: [f64; LANES]) -> f64 {
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_three_four_five() {
        let e = Embedding::normalize(&[3.0, 4.0], 2).unwrap();
        assert!((e.values()[0] - 0.6).abs() < 1e-12);
        assert!((e.values()[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn normalize_unit_is_unchanged() {
        let e = Embedding::normalize(&[1.0, 0.0, 0.0, 0.0], 4).unwrap();
        assert_eq!(e.values(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn normalize_rejects_zero_and_wrong_dim() {
        assert_eq!(Embedding::normalize(&[0.0, 0.0], 2), Err(CoreError::ZeroVector));
        assert_eq!(
            Embedding::normalize(&[1.0, 0.0, 0.0], 2),
            Err(CoreError::DimensionMismatch { expected: 2, actual: 3 })
        );
        assert_eq!(Embedding::normalize(&[f64::NAN, 1.0], 2), Err(CoreError::NonFinite));
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn cosine_examples() {
        let x = Embedding::normalize(&[1.0, 0.0], 2).unwrap();
        let y = Embedding::normalize(&[0.0, 1.0], 2).unwrap();
        let d = Embedding::normalize(&[0.707107, 0.707107], 2).unwrap();
        assert_eq!(cosine(&x, &x).unwrap(), 1.0);
        assert_eq!(cosine(&x, &y).unwrap(), 0.0);
        assert!((cosine(&x, &d).unwrap() - 0.707107).abs() < 1e-6);
        let z = Embedding::normalize(&[1.0, 0.0, 0.0], 3).unwrap();
        assert!(matches!(cosine(&x, &z), Err(CoreError::DimensionMismatch { .. })));
    }

    #[test]
    fn kernels_agree_bitwise_on_widened_input() {
        let a: Vec<f32> = (0..37).map(|i| (i as f32 * 0.37).sin()).collect();
        let b: Vec<f32> = (0..37).map(|i| (i as f32 * 1.1).cos()).collect();
        let wide: Vec<f64> = b.iter().map(|&v| v as f64).collect();
        assert_eq!(dot_f32_f32(&a, &b).to_bits(), dot_f32_f64(&a, &wide).to_bits());
    }

    fn nonzero_vec() -> impl Strategy<Value = Vec<f64>> {
        (1usize..40)
            .prop_flat_map(|n| prop::collection::vec(-100.0f64..100.0, n))
            .prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-3))
    }

    proptest! {
        #[test]
        fn cosine_is_symmetric(pair in (1usize..40).prop_flat_map(|n| (
            prop::collection::vec(-1.0f64..1.0, n),
            prop::collection::vec(-1.0f64..1.0, n),
        ))) {
            let (a, b) = pair;
            if let (Ok(a), Ok(b)) = (Embedding::from_unnormalized(a), Embedding::from_unnormalized(b)) {
                let ab = cosine(&a, &b).unwrap();
                prop_assert_eq!(ab.to_bits(), cosine(&b, &a).unwrap().to_bits());
                prop_assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&ab));
            }
        }

        #[test]
        fn normalize_is_idempotent_and_unit(v in nonzero_vec()) {
            let once = Embedding::from_unnormalized(v.clone()).unwrap();
            let norm = libm::sqrt(dot_f64(once.values(), once.values()));
            prop_assert!((norm - 1.0).abs() < 1e-6);
            let twice = Embedding::normalize(once.values(), v.len()).unwrap();
            for (x, y) in once.values().iter().zip(twice.values()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn positive_scaling_does_not_change_embedding(v in nonzero_vec(), c in 1e-3f64..1e3) {
            let base = Embedding::from_unnormalized(v.clone()).unwrap();
            let scaled = Embedding::from_unnormalized(v.iter().map(|x| x * c).collect()).unwrap();
            for (x, y) in base.values().iter().zip(scaled.values()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
