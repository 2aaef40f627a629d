//! Positional indices and structural attention masks of a DOM tree.

use std::fmt;

use crate::dom::DomTree;
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Dense boolean |V|×|V| mask; `true` marks a pair allowed to attend.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttentionMask {
    n: usize,
    allowed: Vec<bool>,
}

impl AttentionMask {
    pub fn none(n: usize) -> Self {
        Self {
            n,
            allowed: vec![false; n * n],
        }
    }

    /// Every pair may attend (the plain encoder).
    pub fn full(n: usize) -> Self {
        Self {
            n,
            allowed: vec![true; n * n],
        }
    }

    pub fn from_predicate(n: usize, allowed: impl Fn(usize, usize) -> bool) -> Self {
        let mut m = Self::none(n);
        for u in 0..n {
            for v in 0..n {
                m.allowed[u * n + v] = allowed(u, v);
            }
        }
        m
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn allowed(&self, u: usize, v: usize) -> bool {
        self.allowed[u * self.n + v]
    }

    #[inline]
    fn allow(&mut self, u: usize, v: usize) {
        self.allowed[u * self.n + v] = true;
    }

    /// Indices `u` may attend to, ascending.
    pub fn row_support(&self, u: usize) -> Vec<usize> {
        (0..self.n).filter(|&v| self.allowed(u, v)).collect()
    }

    /// First row with no allowed entry, if any.
    pub fn degenerate_row(&self) -> Option<usize> {
        (0..self.n).find(|&u| !(0..self.n).any(|v| self.allowed(u, v)))
    }

    /// Additive form: `0` where allowed, `-inf` elsewhere.
    pub fn additive<T: Scalar>(&self) -> Matrix<T> {
        Matrix::from_vec(
            self.n,
            self.n,
            self.allowed
                .iter()
                .map(|&a| if a { T::zero() } else { T::neg_infinity() })
                .collect(),
        )
    }
}

/// Text grid with `0` for attendable pairs and `X` for masked ones, one row
/// per line.
impl fmt::Display for AttentionMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for u in 0..self.n {
            for v in 0..self.n {
                f.write_str(if self.allowed(u, v) { "0" } else { "X" })?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PositionalIndices {
    /// DFS position.
    pub global: Vec<usize>,
    /// Depth, root = 0.
    pub level: Vec<usize>,
    /// Order among the children of the same parent; root = 0.
    pub sibling: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeIndex {
    pub positions: PositionalIndices,
    pub path_mask: AttentionMask,
    pub sibling_mask: AttentionMask,
}

impl TreeIndex {
    pub fn new(tree: &DomTree) -> Self {
        Self {
            positions: compute_positional_indices(tree),
            path_mask: compute_path_mask(tree),
            sibling_mask: compute_sibling_mask(tree),
        }
    }

    pub fn len(&self) -> usize {
        self.positions.global.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Mean node depth, the per-tree depth used in depth breakdowns.
    pub fn mean_depth(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.positions.level.iter().sum::<usize>() as f64 / self.len() as f64
    }
}

pub fn compute_positional_indices(tree: &DomTree) -> PositionalIndices {
    let n = tree.len();
    let mut sibling = vec![0usize; n];
    let mut next_child = vec![0usize; n];
    for node in &tree.nodes {
        if let Some(p) = node.parent {
            sibling[node.id] = next_child[p];
            next_child[p] += 1;
        }
    }
    PositionalIndices {
        global: (0..n).collect(),
        level: tree.levels(),
        sibling,
    }
}

/// Ancestor/descendant pairs and the diagonal.
pub fn compute_path_mask(tree: &DomTree) -> AttentionMask {
    let n = tree.len();
    let mut m = AttentionMask::none(n);
    for node in &tree.nodes {
        let u = node.id;
        m.allow(u, u);
        let mut cur = node.parent;
        while let Some(a) = cur {
            m.allow(u, a);
            m.allow(a, u);
            cur = tree.nodes[a].parent;
        }
    }
    m
}

/// Same-parent pairs and the diagonal; the root is its own singleton set.
pub fn compute_sibling_mask(tree: &DomTree) -> AttentionMask {
    let n = tree.len();
    let mut m = AttentionMask::none(n);
    for group in tree.children() {
        for &u in &group {
            for &v in &group {
                m.allow(u, v);
            }
        }
    }
    for u in 0..n {
        m.allow(u, u);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dom::Element;

    /// root(A(A1,A2),B)
    fn sample() -> DomTree {
        Element::new("div", "")
            .with_children(vec![
                Element::new("ul", "A")
                    .with_children(vec![Element::new("li", "A1"), Element::new("li", "A2")]),
                Element::new("p", "B"),
            ])
            .into_tree("x", None)
    }

    fn chain(depth: usize) -> DomTree {
        let mut e = Element::new("p", "leaf");
        for _ in 1..depth {
            e = Element::new("div", "").with_children(vec![e]);
        }
        e.into_tree("x", None)
    }

    #[test]
    fn positional_indices_of_small_tree() {
        let p = compute_positional_indices(&sample());
        assert_eq!(p.global, vec![0, 1, 2, 3, 4]);
        assert_eq!(p.level, vec![0, 1, 2, 2, 1]);
        assert_eq!(p.sibling, vec![0, 0, 0, 1, 1]);

        let single = compute_positional_indices(&Element::new("p", "x").into_tree("x", None));
        assert_eq!(
            (single.global, single.level, single.sibling),
            (vec![0], vec![0], vec![0])
        );

        let c = compute_positional_indices(&chain(5));
        assert_eq!(c.level, vec![0, 1, 2, 3, 4]);
        assert!(c.sibling.iter().all(|&s| s == 0));
    }

    #[test]
    fn path_mask_entries() {
        let m = compute_path_mask(&sample());
        assert!(m.allowed(0, 2)); // root, A1
        assert!(m.allowed(1, 2)); // A, A1
        assert!(!m.allowed(2, 3)); // A1, A2
        assert!(!m.allowed(1, 4)); // A, B
        let add = m.additive::<f64>();
        assert_eq!(add[(1, 2)], 0.0);
        assert_eq!(add[(2, 3)], f64::NEG_INFINITY);
    }

    #[test]
    fn sibling_mask_entries() {
        let m = compute_sibling_mask(&sample());
        assert!(m.allowed(1, 4)); // A, B
        assert!(m.allowed(2, 3)); // A1, A2
        assert!(!m.allowed(1, 2)); // A, A1
        assert!(!m.allowed(0, 1)); // root, A
        let c = compute_sibling_mask(&chain(4));
        assert_eq!(c, AttentionMask::from_predicate(4, |u, v| u == v));
    }

    #[test]
    fn singleton_masks() {
        let t = Element::new("p", "x").into_tree("x", None);
        assert_eq!(compute_path_mask(&t).to_string(), "0\n");
        assert_eq!(compute_sibling_mask(&t).to_string(), "0\n");
    }

    #[test]
    fn text_grid_golden() {
        let idx = TreeIndex::new(&sample());
        assert_eq!(
            idx.path_mask.to_string(),
            "00000\n0000X\n000XX\n00X0X\n0XXX0\n"
        );
        assert_eq!(
            idx.sibling_mask.to_string(),
            "0XXXX\nX0XX0\nXX00X\nXX00X\nX0XX0\n"
        );
        assert_eq!(idx.mean_depth(), 6.0 / 5.0);
    }
}
