//! Ranked results and the bounded top-k collector behind every search.
//!
//! Ordering is total: higher score first, then ascending record id.

use alloc::collections::BinaryHeap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedHit {
    pub record_id: String,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

/// `Less` means `a` ranks ahead of `b`.
#[inline]
pub fn rank_order(a_score: f64, a_id: &str, b_score: f64, b_id: &str) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_id.cmp(b_id))
}

struct Candidate<'a> {
    score: f64,
    id: &'a str,
}

impl PartialEq for Candidate<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate<'_> {}
impl PartialOrd for Candidate<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate<'_> {
    // Worse candidates compare greater, so the heap top is the one to evict.
    fn cmp(&self, other: &Self) -> Ordering {
        rank_order(self.score, self.id, other.score, other.id)
    }
}

/// Keeps the best `k` (score, id) pairs seen so far.
pub struct TopK<'a> {
    k: usize,
    heap: BinaryHeap<Candidate<'a>>,
}

impl<'a> TopK<'a> {
    pub fn new(k: usize) -> Self {
        TopK {
            k,
            heap: BinaryHeap::with_capacity(k.saturating_add(1).min(4096)),
        }
    }

    #[inline]
    pub fn push(&mut self, score: f64, id: &'a str) {
        if self.k == 0 {
            return;
        }
        if self.heap.len() < self.k {
            self.heap.push(Candidate { score, id });
            return;
        }
        let worst = self.heap.peek().expect("heap is full");
        if score < worst.score {
            return;
        }
        let cand = Candidate { score, id };
        if cand < *worst {
            self.heap.pop();
            self.heap.push(cand);
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn into_hits(self) -> Vec<RankedHit> {
        let sorted = self.heap.into_sorted_vec();
        sorted
            .into_iter()
            .enumerate()
            .map(|(i, c)| RankedHit {
                record_id: c.id.into(),
                score: c.score,
                rank: i + 1,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn keeps_best_with_id_tiebreak() {
        let ids = ["d", "b", "a", "c", "e"];
        let scores = [0.5, 0.9, 0.5, 0.5, 0.1];
        let mut top = TopK::new(3);
        for (id, s) in ids.iter().zip(scores) {
            top.push(s, id);
        }
        let hits = top.into_hits();
        let got: Vec<_> = hits.iter().map(|h| (h.record_id.as_str(), h.rank)).collect();
        assert_eq!(got, vec![("b", 1), ("a", 2), ("c", 3)]);
    }

    #[test]
    fn zero_k_collects_nothing() {
        let mut top = TopK::new(0);
        top.push(1.0, "a");
        assert!(top.into_hits().is_empty());
    }
}
