use serde::{Deserialize, Serialize};

use crate::dom::DomTree;
use crate::embedding::EmbeddingProvider;
use crate::evaluation::metrics::Confusion;

use super::BaselineError;

/// The 99 candidate thresholds 0.01, 0.02, ..., 0.99.
pub fn threshold_grid() -> Vec<f64> {
    (1..=99).map(|k| k as f64 / 100.0).collect()
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, BaselineError> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(BaselineError::ZeroNorm);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Cosine similarity between each node's pooled text and its tree's interest.
pub fn node_similarities(
    tree: &DomTree,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<f64>, BaselineError> {
    let c = provider.embed(&tree.interest)?;
    tree.nodes
        .iter()
        .map(|n| cosine(&provider.embed(&n.text)?.vector, &c.vector))
        .collect()
}

/// Positive iff the similarity reaches the threshold.
pub fn classify_with_threshold(sims: &[f64], threshold: f64) -> Vec<bool> {
    sims.iter().map(|&s| s >= threshold).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityResult {
    /// Per tree, per node.
    pub sims: Vec<Vec<f64>>,
    pub threshold: f64,
    /// `(threshold, pooled F1)` for every grid point.
    pub table: Vec<(f64, f64)>,
}

/// Grid threshold with the highest pooled F1 on the labeled reference trees;
/// ties go to the smallest threshold.
pub fn search_threshold(sims: &[Vec<f64>], gold: &[Vec<Option<bool>>]) -> (f64, Vec<(f64, f64)>) {
    let table: Vec<(f64, f64)> = threshold_grid()
        .into_iter()
        .map(|t| {
            let mut c = Confusion::default();
            for (s, g) in sims.iter().zip(gold) {
                c.merge(&Confusion::from_labels(&classify_with_threshold(s, t), g));
            }
            (t, c.prf().f1)
        })
        .collect();
    let best = table
        .iter()
        .fold(table[0], |best, &e| if e.1 > best.1 { e } else { best });
    (best.0, table)
}

/// Similarities of the reference trees and the threshold chosen on them.
pub fn similarity_classify(
    reference: &[DomTree],
    provider: &dyn EmbeddingProvider,
) -> Result<SimilarityResult, BaselineError> {
    let sims = reference
        .iter()
        .map(|t| node_similarities(t, provider))
        .collect::<Result<Vec<_>, _>>()?;
    let gold: Vec<Vec<Option<bool>>> = reference
        .iter()
        .map(|t| t.nodes.iter().map(|n| n.label.as_bool()).collect())
        .collect();
    let (threshold, table) = search_threshold(&sims, &gold);
    Ok(SimilarityResult {
        sims,
        threshold,
        table,
    })
}
