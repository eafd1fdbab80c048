//! Flat and HNSW indexes checked against a brute-force linear scan.

use guiscout_core::codec;
use guiscout_core::embedding::Embedding;
use guiscout_core::rng::SplitMix64;
use guiscout_core::{FlatIndex, HnswIndex, HnswParams, IndexKind, VectorIndex};
use proptest::prelude::*;

fn random_unit(rng: &mut SplitMix64, dim: usize) -> Embedding {
    let mut v = vec![0.0; dim];
    rng.fill_gaussian(&mut v);
    Embedding::from_unnormalized(v).unwrap()
}

/// Naive oracle: widen each stored component, sum left to right, sort by
/// (score desc, id asc).
fn brute_force(corpus: &[(String, Vec<f32>)], q: &Embedding, k: usize) -> Vec<String> {
    let mut scored: Vec<(f64, &str)> = corpus
        .iter()
        .map(|(id, v)| {
            let s: f64 = v.iter().zip(q.values()).map(|(&a, &b)| a as f64 * b).sum();
            (s, id.as_str())
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    scored.into_iter().take(k).map(|(_, id)| id.to_string()).collect()
}

#[test]
fn thousand_inserts_match_linear_scan() {
    let mut rng = SplitMix64::new(1);
    let dim = 32;
    let mut flat = FlatIndex::new(dim);
    let mut corpus = Vec::new();
    for i in 0..1000 {
        let e = random_unit(&mut rng, dim);
        let id = format!("r{:04}", (i * 7919) % 1000);
        flat.insert(&id, &e).unwrap();
        corpus.push((id, e.to_f32()));
    }
    for _ in 0..50 {
        let q = random_unit(&mut rng, dim);
        let got: Vec<String> = flat.search(&q, 10).unwrap().into_iter().map(|h| h.record_id).collect();
        assert_eq!(got, brute_force(&corpus, &q, 10));
    }
}

#[test]
fn ties_follow_id_order_like_the_oracle() {
    // Quantized vectors make many exact ties.
    let dim = 4;
    let mut flat = FlatIndex::new(dim);
    let mut corpus = Vec::new();
    let mut rng = SplitMix64::new(5);
    for i in 0..300 {
        let v: Vec<f64> = (0..dim).map(|_| (rng.next_u64() % 3) as f64 - 1.0).collect();
        let Ok(e) = Embedding::from_unnormalized(v) else { continue };
        let id = format!("t{}", 1000 - i);
        flat.insert(&id, &e).unwrap();
        corpus.push((id, e.to_f32()));
    }
    let q = Embedding::from_unnormalized(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
    let got: Vec<String> = flat.search(&q, 40).unwrap().into_iter().map(|h| h.record_id).collect();
    assert_eq!(got, brute_force(&corpus, &q, 40));
}

#[test]
fn save_load_preserves_results_for_seeded_queries() {
    let mut rng = SplitMix64::new(11);
    let dim = 24;
    for kind in [IndexKind::Flat, IndexKind::Hnsw] {
        let mut ix = VectorIndex::new(kind, dim, 42, HnswParams::default()).unwrap();
        for i in 0..1000 {
            ix.insert(&format!("n{i}"), &random_unit(&mut rng, dim)).unwrap();
        }
        let back = codec::decode(&codec::encode(&ix), Some(dim)).unwrap();
        for _ in 0..100 {
            let q = random_unit(&mut rng, dim);
            assert_eq!(ix.search(&q, 10).unwrap(), back.search(&q, 10).unwrap());
        }
    }
}

#[test]
fn hnsw_recall_on_uniform_sphere() {
    let dim = 64;
    let mut rng = SplitMix64::new(3);
    let mut flat = FlatIndex::new(dim);
    let mut hnsw = HnswIndex::new(dim, HnswParams::default(), 42).unwrap();
    for i in 0..5000 {
        let e = random_unit(&mut rng, dim);
        flat.insert(&format!("{i}"), &e).unwrap();
        hnsw.insert(&format!("{i}"), &e).unwrap();
    }
    assert_eq!(hnsw.reachable_from_entry(), 5000);
    let mut found = 0;
    for _ in 0..100 {
        let q = random_unit(&mut rng, dim);
        let truth = flat.search(&q, 10).unwrap();
        let got = hnsw.search(&q, 10).unwrap();
        found += truth.iter().filter(|t| got.iter().any(|g| g.record_id == t.record_id)).count();
    }
    let recall = found as f64 / 1000.0;
    assert!(recall >= 0.95, "recall@10 = {recall}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn flat_results_ignore_insertion_order(seed in any::<u64>(), rot in 0usize..50) {
        let mut rng = SplitMix64::new(seed);
        let items: Vec<(String, Embedding)> =
            (0..50).map(|i| (format!("p{i}"), random_unit(&mut rng, 6))).collect();
        let q = random_unit(&mut rng, 6);
        let mut a = FlatIndex::new(6);
        let mut b = FlatIndex::new(6);
        for (id, e) in &items {
            a.insert(id, e).unwrap();
        }
        for (id, e) in items.iter().cycle().skip(rot).take(items.len()).collect::<Vec<_>>().into_iter().rev() {
            b.insert(id, e).unwrap();
        }
        prop_assert_eq!(a.search(&q, 7).unwrap(), b.search(&q, 7).unwrap());
    }

    #[test]
    fn ranks_are_contiguous_and_scores_monotone(seed in any::<u64>(), k in 1usize..30) {
        let mut rng = SplitMix64::new(seed);
        let mut ix = VectorIndex::new(IndexKind::Hnsw, 5, seed, HnswParams::with_m(4)).unwrap();
        for i in 0..40 {
            ix.insert(&format!("{i}"), &random_unit(&mut rng, 5)).unwrap();
        }
        let hits = ix.search(&random_unit(&mut rng, 5), k).unwrap();
        prop_assert!(hits.len() <= k.min(40));
        for (i, h) in hits.iter().enumerate() {
            prop_assert_eq!(h.rank, i + 1);
        }
        prop_assert!(hits.windows(2).all(|w| w[0].score >= w[1].score));
    }
}
