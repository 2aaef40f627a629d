use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dom::DomTree;
use crate::embedding::splitmix64;

use super::EvalError;

pub const DEFAULT_RATIOS: [f64; 3] = [0.75, 0.10, 0.15];
pub const DEFAULT_REPLICATES: usize = 5;
pub const SPLIT_VERSION: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Val,
    Test,
}

/// Interests assigned to each partition in one replicate, each list sorted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicateSplit {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl ReplicateSplit {
    pub fn partition_of(&self, interest: &str) -> Option<Partition> {
        let has = |v: &[String]| v.binary_search_by(|s| s.as_str().cmp(interest)).is_ok();
        if has(&self.train) {
            Some(Partition::Train)
        } else if has(&self.val) {
            Some(Partition::Val)
        } else if has(&self.test) {
            Some(Partition::Test)
        } else {
            None
        }
    }

    pub fn interests(&self, part: Partition) -> &[String] {
        match part {
            Partition::Train => &self.train,
            Partition::Val => &self.val,
            Partition::Test => &self.test,
        }
    }

    /// Indices of `trees` whose interest lies in `part`.
    pub fn select(&self, trees: &[DomTree], part: Partition) -> Vec<usize> {
        trees
            .iter()
            .enumerate()
            .filter(|(_, t)| self.partition_of(&t.interest) == Some(part))
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub version: u64,
    pub seed: u64,
    pub ratios: [f64; 3],
    pub replicates: Vec<ReplicateSplit>,
}

impl SplitSpec {
    /// Replicate `n`, numbered from 1.
    pub fn replicate(&self, n: usize) -> Result<&ReplicateSplit, EvalError> {
        n.checked_sub(1)
            .and_then(|i| self.replicates.get(i))
            .ok_or(EvalError::NoSuchReplicate {
                requested: n,
                available: self.replicates.len(),
            })
    }
}

/// Partition sizes for `n` interests: boundaries at the rounded cumulative
/// ratios, clamped so every partition keeps at least one interest.
pub fn partition_sizes(n: usize, ratios: [f64; 3]) -> Result<[usize; 3], EvalError> {
    if n < 3 {
        return Err(EvalError::TooFewInterests(n));
    }
    let total: f64 = ratios.iter().sum();
    if ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(EvalError::Ratios(ratios));
    }
    let b1 = ((ratios[0] / total * n as f64).round() as usize).clamp(1, n - 2);
    let b2 = (((ratios[0] + ratios[1]) / total * n as f64).round() as usize).clamp(b1 + 1, n - 1);
    Ok([b1, b2 - b1, n - b2])
}

/// Shuffles the distinct interests once per replicate and cuts them into
/// train, validation and test groups.
pub fn split_by_interest(
    trees: &[DomTree],
    seed: u64,
    ratios: [f64; 3],
    replicates: usize,
) -> Result<SplitSpec, EvalError> {
    let interests: Vec<String> = trees
        .iter()
        .map(|t| t.interest.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let [n_train, n_val, _] = partition_sizes(interests.len(), ratios)?;
    let replicates = (0..replicates)
        .map(|r| {
            let mut order = interests.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(r as u64 + 1)));
            order.shuffle(&mut rng);
            let sorted = |s: &[String]| {
                let mut v = s.to_vec();
                v.sort();
                v
            };
            ReplicateSplit {
                train: sorted(&order[..n_train]),
                val: sorted(&order[n_train..n_train + n_val]),
                test: sorted(&order[n_train + n_val..]),
            }
        })
        .collect();
    Ok(SplitSpec {
        version: SPLIT_VERSION,
        seed,
        ratios,
        replicates,
    })
}
