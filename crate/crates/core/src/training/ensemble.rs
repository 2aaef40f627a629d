use crate::model::{predict_labels, probabilities, EncodedTree, ModelError, NodeClassifier};
use crate::scalar::Scalar;

/// Per node, positive iff strictly more than half of the voters say so.
pub fn majority_vote(votes: &[Vec<bool>]) -> Vec<bool> {
    let Some(first) = votes.first() else {
        return Vec::new();
    };
    (0..first.len())
        .map(|i| 2 * votes.iter().filter(|v| v[i]).count() > votes.len())
        .collect()
}

/// Ensemble prediction: `(mean probability, majority-vote label)` per node.
pub fn predict_ensemble<T: Scalar, M: NodeClassifier<T>>(
    models: &[M],
    tree: &EncodedTree<T>,
) -> Result<(Vec<f64>, Vec<bool>), ModelError> {
    assert!(!models.is_empty(), "ensemble needs at least one model");
    let probs: Vec<Vec<T>> = models
        .iter()
        .map(|m| probabilities(m, tree))
        .collect::<Result<_, _>>()?;
    let votes: Vec<Vec<bool>> = probs.iter().map(|p| predict_labels(p, 0.5)).collect();
    let n = tree.len();
    let mean = (0..n)
        .map(|i| probs.iter().map(|p| p[i].as_f64()).sum::<f64>() / probs.len() as f64)
        .collect();
    Ok((mean, majority_vote(&votes)))
}
