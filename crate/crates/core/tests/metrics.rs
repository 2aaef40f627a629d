mod common;

use common::random_tree;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use treenc::baselines::{classify_with_threshold, node_similarities, search_threshold};
use treenc::embedding::{pool_tokens, EmbeddingError, EmbeddingProvider, HashEmbedder, PooledText};
use treenc::evaluation::{depth_bucket, depth_report, macro_average, prf1, Prf, DEPTH_LEVELS};
use treenc::model::bce_term;
use treenc::training::majority_vote;

fn gold_strategy() -> impl Strategy<Value = Vec<(bool, Option<bool>)>> {
    prop::collection::vec((any::<bool>(), prop::option::of(any::<bool>())), 0..60)
}

struct Scaled<'a>(&'a HashEmbedder, f64);

impl EmbeddingProvider for Scaled<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn embed(&self, text: &str) -> Result<PooledText<f64>, EmbeddingError> {
        let mut p = self.0.embed(text)?;
        p.vector.iter_mut().for_each(|x| *x *= self.1);
        Ok(p)
    }
}

proptest! {
    #[test]
    fn prf_matches_counting(pairs in gold_strategy()) {
        let (pred, gold): (Vec<bool>, Vec<Option<bool>>) = pairs.iter().cloned().unzip();
        let count = |p: bool, g: bool| pairs.iter().filter(|&&(a, b)| a == p && b == Some(g)).count() as f64;
        let (tp, fp, fn_) = (count(true, true), count(true, false), count(false, true));
        let got = prf1(&pred, &gold);
        let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let r = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f = if tp > 0.0 { 2.0 * tp / (2.0 * tp + fp + fn_) } else { 0.0 };
        prop_assert!((got.precision - p).abs() < 1e-12);
        prop_assert!((got.recall - r).abs() < 1e-12);
        prop_assert!((got.f1 - f).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&got.f1));
    }

    #[test]
    fn prf_ignores_order(pairs in gold_strategy(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let split = |v: &[(bool, Option<bool>)]| -> (Vec<bool>, Vec<Option<bool>>) { v.iter().cloned().unzip() };
        let (a, b) = split(&pairs);
        let (c, d) = split(&shuffled);
        prop_assert_eq!(prf1(&a, &b), prf1(&c, &d));
    }

    #[test]
    fn macro_is_arithmetic_mean(f in prop::collection::vec(0.0f64..=1.0, 1..10)) {
        let scores: Vec<Prf> = f.iter().map(|&x| Prf { precision: x, recall: 1.0 - x, f1: x, undefined: false }).collect();
        let m = macro_average(&scores);
        let mean = f.iter().sum::<f64>() / f.len() as f64;
        prop_assert!((m.f1 - mean).abs() < 1e-12);
        prop_assert!((m.precision - mean).abs() < 1e-12);
    }

    #[test]
    fn depth_buckets_partition_the_range(ds in prop::collection::vec(0.0f64..20.0, 2..40)) {
        let min = ds.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = ds.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let scores: Vec<(f64, f64)> = ds.iter().map(|&d| (d, d / 20.0)).collect();
        let report = depth_report(&scores);
        prop_assert_eq!(report.levels.len(), DEPTH_LEVELS);
        prop_assert_eq!(report.levels.iter().map(|l| l.trees).sum::<usize>(), ds.len());
        for &d in &ds {
            let b = depth_bucket(d, min, max);
            prop_assert!(b < DEPTH_LEVELS);
            if max > min {
                let w = (max - min) / DEPTH_LEVELS as f64;
                let lo = min + b as f64 * w;
                prop_assert!(d >= lo - 1e-9);
                if b + 1 < DEPTH_LEVELS {
                    prop_assert!(d < lo + w + 1e-9);
                }
            }
        }
        for (k, level) in report.levels.iter().enumerate() {
            let members: Vec<f64> = ds.iter().cloned().filter(|&d| depth_bucket(d, min, max) == k).collect();
            prop_assert_eq!(level.trees, members.len());
            match level.mean_f1 {
                None => prop_assert!(members.is_empty()),
                Some(m) => {
                    let want = members.iter().map(|d| d / 20.0).sum::<f64>() / members.len() as f64;
                    prop_assert!((m - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn majority_matches_counting(votes in prop::collection::vec(prop::collection::vec(any::<bool>(), 7), 1..8)) {
        let got = majority_vote(&votes);
        for i in 0..7 {
            let yes = votes.iter().filter(|v| v[i]).count();
            prop_assert_eq!(got[i], yes > votes.len() - yes);
        }
    }

    #[test]
    fn pooling_is_mean_and_order_free(tokens in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 1..10)) {
        let pooled = pool_tokens(&tokens).unwrap();
        let mut rev = tokens.clone();
        rev.reverse();
        let back = pool_tokens(&rev).unwrap();
        for j in 0..4 {
            let mean = tokens.iter().map(|t| t[j]).sum::<f64>() / tokens.len() as f64;
            prop_assert!((pooled.vector[j] - mean).abs() < 1e-12);
            prop_assert!((back.vector[j] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn similarity_ignores_vector_scale(seed in any::<u64>(), scale in 0.01f64..100.0) {
        let tree = random_tree(&mut ChaCha8Rng::seed_from_u64(seed), 12, "kayak");
        let base = HashEmbedder::new(8, 3);
        let a = node_similarities(&tree, &base).unwrap();
        let b = node_similarities(&tree, &Scaled(&base, scale)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn loss_and_decision_values() {
    assert!((bce_term(0.0f64, 1.0) - std::f64::consts::LN_2).abs() < 1e-12);
    assert!((bce_term(0.0f64, 0.0) - std::f64::consts::LN_2).abs() < 1e-12);
    assert!(bce_term(40.0f64, 1.0) < 1e-15);
    assert!((bce_term(-40.0f64, 1.0) - 40.0).abs() < 1e-12);
    assert_eq!(
        treenc::model::predict_labels(&[0.5f64, 0.51], 0.5),
        vec![false, true]
    );
    let votes: Vec<Vec<bool>> = [1, 1, 1, 0, 0].iter().map(|&v| vec![v == 1]).collect();
    assert_eq!(majority_vote(&votes), vec![true]);
}

#[test]
fn similarity_threshold_example() {
    let (t, _) = search_threshold(&[vec![0.2, 0.8]], &[vec![Some(false), Some(true)]]);
    assert!((t - 0.21).abs() < 1e-12);
    assert_eq!(classify_with_threshold(&[0.2, 0.8], t), vec![false, true]);
}
