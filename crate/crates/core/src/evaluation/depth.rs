use serde::{Deserialize, Serialize};

use crate::dom::DomTree;

pub const DEPTH_LEVELS: usize = 5;

/// Mean node level of a tree, root = 0.
pub fn tree_depth(tree: &DomTree) -> f64 {
    let lv = tree.levels();
    lv.iter().sum::<usize>() as f64 / lv.len().max(1) as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthLevel {
    pub lo: f64,
    pub hi: f64,
    pub trees: usize,
    /// `None` when no tree falls in the interval.
    pub mean_f1: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthReport {
    pub min_depth: f64,
    pub max_depth: f64,
    pub levels: Vec<DepthLevel>,
}

/// Interval of `depth` among [`DEPTH_LEVELS`] equal-width intervals over
/// `[min, max]`; the top interval is closed.
pub fn depth_bucket(depth: f64, min: f64, max: f64) -> usize {
    let width = (max - min) / DEPTH_LEVELS as f64;
    if width <= 0.0 {
        return 0;
    }
    (((depth - min) / width).floor() as usize).min(DEPTH_LEVELS - 1)
}

/// Mean per-tree F1 within each depth interval. `scores` holds
/// `(depth, f1)` pairs.
pub fn depth_report(scores: &[(f64, f64)]) -> DepthReport {
    assert!(!scores.is_empty(), "depth report needs at least one tree");
    let min = scores.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let max = scores.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let mut sums = [0.0; DEPTH_LEVELS];
    let mut counts = [0usize; DEPTH_LEVELS];
    for &(d, f) in scores {
        let b = depth_bucket(d, min, max);
        sums[b] += f;
        counts[b] += 1;
    }
    let width = (max - min) / DEPTH_LEVELS as f64;
    let levels = (0..DEPTH_LEVELS)
        .map(|i| DepthLevel {
            lo: min + width * i as f64,
            hi: if i + 1 == DEPTH_LEVELS {
                max
            } else {
                min + width * (i + 1) as f64
            },
            trees: counts[i],
            mean_f1: (counts[i] > 0).then(|| sums[i] / counts[i] as f64),
        })
        .collect();
    DepthReport {
        min_depth: min,
        max_depth: max,
        levels,
    }
}
