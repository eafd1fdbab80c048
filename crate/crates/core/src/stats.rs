//! Nearest-rank percentiles for latency reporting.

use alloc::vec::Vec;

/// The `p`-th percentile (0 < p ≤ 100) by nearest rank: the smallest sample
/// such that at least `p`% of samples are ≤ it. `None` for no samples.
pub fn percentile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = libm::ceil(p / 100.0 * sorted.len() as f64) as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Percentiles {
    pub p50: f64,
    pub p95: f64,
    pub p99: f64,
}

pub fn summarize(samples: &[f64]) -> Option<Percentiles> {
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(Percentiles {
        p50: percentile(&sorted, 50.0)?,
        p95: percentile(&sorted, 95.0)?,
        p99: percentile(&sorted, 99.0)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_sample_fills_every_percentile() {
        let p = summarize(&[4.2]).unwrap();
        assert_eq!((p.p50, p.p95, p.p99), (4.2, 4.2, 4.2));
    }

    #[test]
    fn nearest_rank_on_one_to_hundred() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        let p = summarize(&xs).unwrap();
        assert_eq!((p.p50, p.p95, p.p99), (50.0, 95.0, 99.0));
    }

    #[test]
    fn empty_has_none() {
        assert!(summarize(&[]).is_none());
        assert_eq!(percentile(&[], 50.0), None);
    }

    proptest! {
        #[test]
        fn percentiles_are_monotone(xs in prop::collection::vec(0.0f64..1e4, 1..200)) {
            let p = summarize(&xs).unwrap();
            prop_assert!(p.p50 <= p.p95 && p.p95 <= p.p99);
        }
    }
}
