use crate::dom::{DomTree, Label};
use crate::embedding::{EmbeddingError, EmbeddingProvider};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::tree_index::TreeIndex;

use super::tags::TagVocab;

/// Interleaved sinusoid of an integer position:
/// `[2k] = sin(i / 10000^(2k/d))`, `[2k+1] = cos(i / 10000^(2k/d))`.
pub fn sinusoid<T: Scalar>(index: usize, dim: usize) -> Vec<T> {
    (0..dim)
        .map(|j| {
            let pair = (j / 2 * 2) as f64;
            let angle = index as f64 / 10000f64.powf(pair / dim as f64);
            T::lit(if j % 2 == 0 { angle.sin() } else { angle.cos() })
        })
        .collect()
}

fn sinusoid_matrix<T: Scalar>(indices: &[usize], dim: usize) -> Matrix<T> {
    let mut m = Matrix::zeros(indices.len(), dim);
    for (r, &i) in indices.iter().enumerate() {
        m.row_mut(r).copy_from_slice(&sinusoid(i, dim));
    }
    m
}

/// Everything the models need from one tree, computed once up front.
#[derive(Clone, Debug)]
pub struct EncodedTree<T> {
    /// Pooled token embeddings, one row per node (n × d_embed).
    pub text: Matrix<T>,
    /// Pooled interest embedding (1 × d_embed).
    pub interest: Matrix<T>,
    pub tags: Vec<usize>,
    /// 0/1 targets; `None` for unlabeled nodes.
    pub targets: Vec<Option<T>>,
    /// Additive path and sibling masks.
    pub path_mask: Matrix<T>,
    pub sibling_mask: Matrix<T>,
    /// Sinusoids of the global, level and sibling indices (n × d_model).
    pub sin_global: Matrix<T>,
    pub sin_level: Matrix<T>,
    pub sin_sibling: Matrix<T>,
    pub mean_depth: f64,
}

impl<T: Scalar> EncodedTree<T> {
    pub fn new(
        tree: &DomTree,
        provider: &dyn EmbeddingProvider,
        vocab: &TagVocab,
        d_model: usize,
    ) -> Result<Self, EmbeddingError> {
        let index = TreeIndex::new(tree);
        let d_embed = provider.dim();
        let mut text = Matrix::zeros(tree.len(), d_embed);
        for (r, node) in tree.nodes.iter().enumerate() {
            let v = provider.embed(&node.text)?.vector;
            for (o, x) in text.row_mut(r).iter_mut().zip(v) {
                *o = T::lit(x);
            }
        }
        let interest: Vec<T> = provider
            .embed(&tree.interest)?
            .vector
            .into_iter()
            .map(T::lit)
            .collect();
        Ok(Self {
            text,
            interest: Matrix::row_vector(&interest),
            tags: tree.nodes.iter().map(|n| vocab.id(&n.tag)).collect(),
            targets: tree
                .nodes
                .iter()
                .map(|n| match n.label {
                    Label::Positive => Some(T::one()),
                    Label::Negative => Some(T::zero()),
                    Label::Unlabeled => None,
                })
                .collect(),
            path_mask: index.path_mask.additive(),
            sibling_mask: index.sibling_mask.additive(),
            sin_global: sinusoid_matrix(&index.positions.global, d_model),
            sin_level: sinusoid_matrix(&index.positions.level, d_model),
            sin_sibling: sinusoid_matrix(&index.positions.sibling, d_model),
            mean_depth: index.mean_depth(),
        })
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn labeled_count(&self) -> usize {
        self.targets.iter().filter(|t| t.is_some()).count()
    }

    /// Gold labels as booleans, `None` where unlabeled.
    pub fn gold(&self) -> Vec<Option<bool>> {
        self.targets
            .iter()
            .map(|t| t.map(|v| v > T::lit(0.5)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dom::Element;
    use crate::embedding::HashEmbedder;

    #[test]
    fn sinusoid_at_zero_alternates() {
        assert_eq!(sinusoid::<f64>(0, 6), vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn sinusoid_matches_textbook_formula() {
        let d = 8;
        let v = sinusoid::<f64>(3, d);
        for k in 0..d / 2 {
            let w = 1.0 / 10000f64.powf(2.0 * k as f64 / d as f64);
            assert!((v[2 * k] - (3.0 * w).sin()).abs() < 1e-9);
            assert!((v[2 * k + 1] - (3.0 * w).cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn encoding_shapes() {
        let tree = Element::new("ul", "gear")
            .with_children(vec![
                Element::new("li", "tent").labeled(Label::Positive),
                Element::new("li", "stove").labeled(Label::Negative),
            ])
            .into_tree("camping", None);
        let enc = EncodedTree::<f64>::new(&tree, &HashEmbedder::new(6, 1), &TagVocab::default(), 4)
            .unwrap();
        assert_eq!(enc.text.shape(), (3, 6));
        assert_eq!(enc.interest.shape(), (1, 6));
        assert_eq!(enc.targets, vec![None, Some(1.0), Some(0.0)]);
        assert_eq!(enc.labeled_count(), 2);
        assert_eq!(enc.sin_level.row(1), sinusoid::<f64>(1, 4).as_slice());
        assert_eq!(enc.sin_sibling.row(2), sinusoid::<f64>(1, 4).as_slice());
        assert_eq!(enc.path_mask[(1, 2)], f64::NEG_INFINITY);
        assert_eq!(enc.sibling_mask[(1, 2)], 0.0);
    }
}
